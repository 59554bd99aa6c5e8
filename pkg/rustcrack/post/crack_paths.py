"""
Crack connectivity between rebars and the free surfaces.

Concrete nodes whose phase field exceeds a threshold form a graph along the
triangle edges. A rebar reaches a surface (or another rebar) when a node on
its interface shares a connected component with a node on that surface.
"""
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from rustcrack.models.mesh import BoundaryTag, Mesh

SIDES = ('top', 'bottom', 'left', 'right')


@dataclass
class CrackPaths:
    """Connectivity summary at one ``threshold``."""
    threshold: float
    rebar_to_surface: Dict[int, Tuple[str, ...]] = field(default_factory=dict)
    rebar_pairs: Tuple[Tuple[int, int], ...] = ()

    def reaches(self, rebar, side):
        return side in self.rebar_to_surface.get(rebar, ())

    def joins(self, first, second):
        return (min(first, second), max(first, second)) in self.rebar_pairs

    @property
    def surface_cracked(self):
        """True once any rebar is joined to the top surface."""
        return any('top' in sides for sides in self.rebar_to_surface.values())


def damage_components(mesh: Mesh, phi, threshold):
    """Component label per node; -1 for nodes at or below ``threshold``."""
    phi = np.asarray(phi, dtype=float)
    damaged = mesh.concrete_nodes & (phi > threshold)
    tri = mesh.triangles[mesh.concrete_elements]
    pairs = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    pairs = pairs[damaged[pairs[:, 0]] & damaged[pairs[:, 1]]]
    n = mesh.n_nodes
    graph = sp.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return np.where(damaged, labels, -1)


def rebar_interface_nodes(mesh: Mesh):
    """Nodes on rebar-surface edges, grouped by the nearest rebar."""
    nodes = np.unique(mesh.edges(BoundaryTag.REBAR_SURFACE))
    if nodes.size == 0 or not mesh.rebars:
        return {}
    points = mesh.nodes[nodes]
    gaps = np.column_stack([np.hypot(points[:, 0] - x, points[:, 1] - y) - r for x, y, r in mesh.rebars])
    owner = np.argmin(np.abs(gaps), axis=1)
    return {index: nodes[owner == index] for index in range(len(mesh.rebars))}


def side_nodes(mesh: Mesh):
    """Outer boundary nodes on each side of the bounding box."""
    boundary = np.unique(mesh.boundary_edges[mesh.boundary_tags != BoundaryTag.REBAR_SURFACE])
    x, y = mesh.nodes[boundary, 0], mesh.nodes[boundary, 1]
    low, high = mesh.nodes.min(axis=0), mesh.nodes.max(axis=0)
    tolerance = 1e-9 * float(np.max(high - low))
    return {
        'top': boundary[np.abs(y - high[1]) <= tolerance],
        'bottom': boundary[np.abs(y - low[1]) <= tolerance],
        'left': boundary[np.abs(x - low[0]) <= tolerance],
        'right': boundary[np.abs(x - high[0]) <= tolerance],
    }


def _labels_at(labels, nodes):
    found = labels[nodes]
    return set(found[found >= 0].tolist())


def crack_paths(mesh: Mesh, phi, threshold, interfaces=None, sides=None) -> CrackPaths:
    """
    Which rebars are joined to which sides, and to each other, by nodes with
    ``phi > threshold``. ``interfaces`` and ``sides`` may be precomputed
    with :func:`rebar_interface_nodes` and :func:`side_nodes`.
    """
    labels = damage_components(mesh, phi, threshold)
    interfaces = rebar_interface_nodes(mesh) if interfaces is None else interfaces
    sides = side_nodes(mesh) if sides is None else sides
    rebar_labels = {index: _labels_at(labels, nodes) for index, nodes in interfaces.items()}
    side_labels = {side: _labels_at(labels, nodes) for side, nodes in sides.items()}

    reached = {index: tuple(side for side in SIDES if found & side_labels.get(side, set()))
               for index, found in rebar_labels.items()}
    pairs = tuple((i, j) for i in rebar_labels for j in rebar_labels
                  if i < j and rebar_labels[i] & rebar_labels[j])
    return CrackPaths(threshold=threshold, rebar_to_surface=reached, rebar_pairs=pairs)
