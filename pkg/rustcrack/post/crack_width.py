"""
Surface crack width from the inelastic strain along the top surface:

    w = integral over the top surface of (1 - g(phi)) (eps_x - eps*_x) ds
"""
import logging

import numpy as np

from rustcrack.config.constants import OUTPUT
from rustcrack.fem.kernels import EDGE_POINTS, EDGE_WEIGHTS, edge_lengths
from rustcrack.models.mesh import BoundaryTag, Mesh
from rustcrack.utils.error_handler import MeshError

logger = logging.getLogger(__name__)


def surface_parents(mesh: Mesh, tag=BoundaryTag.TOP_SURFACE):
    """Edges carrying ``tag`` and the triangle owning each of them."""
    edges = mesh.edges(tag)
    if len(edges) == 0:
        raise MeshError(f'mesh has no {BoundaryTag(tag).name} edges')
    lookup = {}
    for element, tri in enumerate(mesh.triangles):
        for i, j in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            lookup[(min(i, j), max(i, j))] = element
    parents = np.array([lookup[(min(a, b), max(a, b))] for a, b in edges], dtype=np.int64)
    return edges, parents


def crack_width(mesh: Mesh, strain, eigenstrain, phi, degradation, surface=None):
    """
    Crack width (m) by two-point Gauss integration on every top-surface edge.

    Parameters
    ----------
    strain : (n_elements, 3) element strains
    eigenstrain : (n_elements,) mean isotropic eigenstrain per element
    phi : (n_nodes,) phase field
    degradation : callable ``g(phi_points, elements)``
    surface : optional precomputed ``surface_parents(mesh)``
    """
    edges, parents = surface if surface is not None else surface_parents(mesh)
    phi = np.asarray(phi, dtype=float)
    ends = phi[edges]
    points = ends[:, :1] * (1.0 - EDGE_POINTS) + ends[:, 1:] * EDGE_POINTS
    damage = 1.0 - degradation(np.clip(points, 0.0, 1.0), parents)
    inelastic = np.asarray(strain, dtype=float)[parents, 0] - np.asarray(eigenstrain, dtype=float)[parents]
    lengths = edge_lengths(mesh.nodes, edges)
    width = float(np.sum(lengths[:, None] * EDGE_WEIGHTS * damage * inelastic[:, None]))
    if width < 0.0:
        logger.warning('Negative crack width integral clamped to zero', extra={'width': width})
        return 0.0
    return width


def relative_width(width, reference=None):
    reference = OUTPUT['RELATIVE_WIDTH_REFERENCE'] if reference is None else reference
    return width / reference
