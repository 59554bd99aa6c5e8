"""
Linear-triangle mesh with region and boundary tags.
"""
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Tuple

import numpy as np

from rustcrack.utils.error_handler import MeshError


class Region(IntEnum):
    CONCRETE = 0
    STEEL = 1
    SCI = 2


class BoundaryTag(IntEnum):
    OUTER = 0
    REBAR_SURFACE = 1
    TOP_SURFACE = 2


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Unstructured P1 triangle mesh, coordinates in metres.

    Attributes
    ----------
    nodes : (n_nodes, 2) float array
    triangles : (n_elements, 3) int array, counter-clockwise
    regions : (n_elements,) int array of :class:`Region`
    boundary_edges : (n_edges, 2) int array
    boundary_tags : (n_edges,) int array of :class:`BoundaryTag`
    porosity : (n_elements,) initial porosity p_0 per triangle (0 in steel)
    weak_zone : (n_elements,) bool, strength-reduced band of the bar benchmark
    rebars : tuple of (x, y, radius) for each rebar, metres
    """
    nodes: np.ndarray
    triangles: np.ndarray
    regions: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    porosity: np.ndarray = None
    weak_zone: np.ndarray = None
    rebars: Tuple[Tuple[float, float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        n_elements = len(self.triangles)
        object.__setattr__(self, 'nodes', np.array(self.nodes, dtype=float))
        object.__setattr__(self, 'triangles', np.array(self.triangles, dtype=np.int64).reshape(-1, 3))
        object.__setattr__(self, 'regions', np.array(self.regions, dtype=np.int8))
        object.__setattr__(self, 'boundary_edges',
                           np.array(self.boundary_edges, dtype=np.int64).reshape(-1, 2))
        object.__setattr__(self, 'boundary_tags', np.array(self.boundary_tags, dtype=np.int8))
        porosity = np.zeros(n_elements) if self.porosity is None else self.porosity
        object.__setattr__(self, 'porosity', np.array(porosity, dtype=float))
        weak = np.zeros(n_elements, dtype=bool) if self.weak_zone is None else self.weak_zone
        object.__setattr__(self, 'weak_zone', np.array(weak, dtype=bool))
        object.__setattr__(self, 'rebars', tuple(tuple(float(v) for v in bar) for bar in self.rebars))
        for array in (self.nodes, self.triangles, self.regions, self.boundary_edges,
                      self.boundary_tags, self.porosity, self.weak_zone):
            array.setflags(write=False)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.triangles)

    @property
    def signed_areas(self):
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self):
        return np.abs(self.signed_areas)

    @property
    def centroids(self):
        return self.nodes[self.triangles].mean(axis=1)

    @property
    def steel_elements(self):
        return self.regions == Region.STEEL

    @property
    def concrete_elements(self):
        """Concrete and SCI triangles (everything the phase field and transport live on)."""
        return self.regions != Region.STEEL

    @property
    def concrete_nodes(self):
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.triangles[self.concrete_elements].ravel()] = True
        return mask

    def edges(self, tag):
        """Boundary edges carrying ``tag``."""
        return self.boundary_edges[self.boundary_tags == int(tag)]

    def region_area(self, region):
        return float(self.areas[self.regions == int(region)].sum())

    def element_sizes(self):
        """Longest edge of each triangle."""
        p = self.nodes[self.triangles]
        lengths = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)
        return lengths.max(axis=1)

    def with_porosity(self, bulk_porosity, sci_porosity):
        porosity = np.where(self.regions == Region.SCI, sci_porosity, bulk_porosity)
        porosity = np.where(self.regions == Region.STEEL, 0.0, porosity)
        return replace(self, porosity=porosity)

    def with_boundary(self, boundary_edges, boundary_tags):
        return replace(self, boundary_edges=boundary_edges, boundary_tags=boundary_tags)

    def nodal_porosity(self):
        """Area-weighted nodal p_0 over adjacent concrete triangles (0 on steel-only nodes)."""
        weights = np.zeros(self.n_nodes)
        total = np.zeros(self.n_nodes)
        mask = self.concrete_elements
        tri = self.triangles[mask]
        share = np.repeat(self.areas[mask] / 3.0, 3)
        np.add.at(weights, tri.ravel(), share)
        np.add.at(total, tri.ravel(), share * np.repeat(self.porosity[mask], 3))
        out = np.zeros(self.n_nodes)
        np.divide(total, weights, out=out, where=weights > 0)
        return out


def edge_owners(mesh: Mesh):
    """Map each undirected edge (i, j), i < j, to the list of triangles containing it."""
    owners = {}
    for element, (a, b, c) in enumerate(mesh.triangles):
        for i, j in ((a, b), (b, c), (c, a)):
            key = (i, j) if i < j else (j, i)
            owners.setdefault(key, []).append(element)
    return owners


def free_edges(triangles):
    """Edges used by exactly one triangle, as an (n, 2) array."""
    tri = np.asarray(triangles)
    all_edges = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
    unique, counts = np.unique(all_edges, axis=0, return_counts=True)
    return unique[counts == 1]


def check_mesh(mesh: Mesh, sci_thickness=None, tolerance=1e-14):
    """
    Verify mesh invariants; raises MeshError naming the first offender.
    """
    areas = mesh.signed_areas
    scale = max(float(np.abs(areas).max(initial=0.0)), 1e-300)
    bad = np.flatnonzero(areas <= tolerance * scale)
    if bad.size:
        raise MeshError('degenerate or inverted triangle', element_id=int(bad[0]))

    owners = edge_owners(mesh)
    for (i, j), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        key = (int(min(i, j)), int(max(i, j)))
        parents = owners.get(key, [])
        if tag == BoundaryTag.REBAR_SURFACE:
            if len(parents) == 2:
                kinds = sorted(int(mesh.regions[p] == Region.STEEL) for p in parents)
                if kinds != [0, 1]:
                    raise MeshError(f'rebar-surface edge {key} does not separate steel from concrete')
            elif len(parents) != 1:
                raise MeshError(f'rebar-surface edge {key} has {len(parents)} parent triangles')
        elif len(parents) != 1:
            raise MeshError(f'boundary edge {key} belongs to {len(parents)} triangles')

    if sci_thickness is not None and mesh.rebars:
        sci = np.flatnonzero(mesh.regions == Region.SCI)
        if sci.size:
            distance = surface_distance(mesh.centroids[sci], mesh.rebars)
            outside = sci[distance > sci_thickness * (1 + 1e-9)]
            if outside.size:
                raise MeshError('SCI triangle outside the SCI layer', element_id=int(outside[0]))
    return True


def surface_distance(points, rebars):
    """Signed distance from each point to the nearest rebar surface (negative inside steel)."""
    points = np.atleast_2d(points)
    best = np.full(len(points), np.inf)
    for x, y, radius in rebars:
        d = np.hypot(points[:, 0] - x, points[:, 1] - y) - radius
        best = np.minimum(best, d)
    return best
