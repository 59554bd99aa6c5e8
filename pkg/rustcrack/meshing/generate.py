"""
Built-in mesh generation.

Rebar cross-sections are meshed from graded point clouds: concentric node
rings follow each rebar surface (resolving the SCI layer and the cover with
geometric grading), a coarse lattice fills the rest of the section and
boundary nodes are spaced by the local size. The cloud is triangulated with
Qhull's Delaunay algorithm. Ring chords are Gabriel edges of the cloud, so
the triangulation conforms to the polygonal rebar surfaces.
"""
import logging
import math

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from rustcrack.config.constants import BAR_BENCHMARK, MESH
from rustcrack.models.mesh import BoundaryTag, Mesh, Region, free_edges, surface_distance
from rustcrack.utils.error_handler import GeometryError, RefinementError

logger = logging.getLogger(__name__)


# ============================================================================
# STRUCTURED MESHES
# ============================================================================

def generate_rectangle_mesh(width, height, nx, ny, mirror_x=True):
    """
    Structured triangle mesh of ``[0, width] x [0, height]``.

    Each cell is split along one diagonal. With ``mirror_x`` the diagonal
    direction flips at mid-width (and alternates by row) so the mesh is
    mirror-symmetric about ``x = width / 2``.
    """
    if nx < 1 or ny < 1:
        raise RefinementError('a structured mesh needs at least one cell per direction')
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    triangles = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
            left_half = (i + 0.5) < nx / 2.0
            rising = (left_half != bool(j % 2)) if mirror_x else True
            if rising:
                triangles.extend([(a, b, c), (a, c, d)])
            else:
                triangles.extend([(a, b, d), (b, c, d)])
    triangles = np.asarray(triangles, dtype=np.int64)
    edges = free_edges(triangles)
    return Mesh(
        nodes=nodes,
        triangles=triangles,
        regions=np.full(len(triangles), Region.CONCRETE),
        boundary_edges=edges,
        boundary_tags=np.full(len(edges), BoundaryTag.OUTER),
    )


def generate_bar_mesh(length, height, element_size, weak_zone_length=None):
    """
    Tension bar with a strength-reduced band centred at mid-length.

    Parameters
    ----------
    length, height : float
        Bar dimensions (m).
    element_size : float
        Edge length of the structured cells (m).
    weak_zone_length : float, optional
        Length of the tagged mid-section band; defaults to 8 mm.
    """
    weak = BAR_BENCHMARK['weak_zone_length'] if weak_zone_length is None else weak_zone_length
    if length <= 0 or height <= 0 or element_size <= 0:
        raise RefinementError('bar dimensions and element size must be positive')
    if element_size > weak * (1 + 1e-12):
        raise RefinementError(
            f'element size {element_size:.4g} m does not resolve the {weak:.4g} m weak zone'
        )
    nx = int(round(length / element_size))
    ny = int(round(height / element_size))
    if nx < 2 or ny < 2:
        raise RefinementError('element size must split each bar dimension into at least 2 elements')

    mesh = generate_rectangle_mesh(length, height, nx, ny)
    x_mid = mesh.centroids[:, 0]
    tol = 1e-9 * length
    band = np.abs(x_mid - 0.5 * length) <= 0.5 * weak + tol
    logger.debug('Generated bar mesh', extra={'nx': nx, 'ny': ny, 'weak_elements': int(band.sum())})
    return Mesh(
        nodes=mesh.nodes,
        triangles=mesh.triangles,
        regions=mesh.regions,
        boundary_edges=mesh.boundary_edges,
        boundary_tags=mesh.boundary_tags,
        weak_zone=band,
    )


# ============================================================================
# REBAR CROSS-SECTIONS
# ============================================================================

def _ring_layout(radius, sci_thickness, h_sci, h_bulk, h_far, refinement_radius, grading, reach):
    """
    Radii and spacings of the node rings around one rebar.

    Returns a list of ``(ring_radius, tangential_spacing, radial_spacing)``
    from the centre outwards. The SCI always gets at least two layers.
    """
    rings = []

    # Steel interior: spacing coarsens towards the centre
    spacing = h_sci
    r = radius
    inner = []
    steel_cap = max(h_bulk, radius / 3.0)
    while True:
        spacing = min(spacing * grading, steel_cap)
        r -= spacing
        if r < 0.75 * spacing:
            break
        inner.append((r, spacing, spacing))
    rings.extend(reversed(inner))

    n_sci = max(2, int(math.ceil(sci_thickness / h_sci - 1e-9))) if sci_thickness > 0 else 0
    rings.append((radius, h_sci, h_sci))
    if n_sci:
        dr = sci_thickness / n_sci
        for k in range(1, n_sci + 1):
            rings.append((radius + k * dr, h_sci, dr))
        spacing = dr
        r = radius + sci_thickness
    else:
        spacing = h_sci
        r = radius

    # Cover: grade to h_bulk, hold until the refinement radius, then grade to h_far
    while r - radius < reach:
        cap = h_bulk if (r - radius) < refinement_radius else h_far
        spacing = min(spacing * grading, cap)
        r += spacing
        tangential = max(spacing, h_sci)
        rings.append((r, tangential, spacing))
        if spacing >= h_far and (r - radius) >= refinement_radius:
            break
    return rings


def _ring_points(cx, cy, ring_radius, spacing, h_sci):
    chord_error = MESH['CHORD_ERROR_FACTOR'] * h_sci
    n = int(math.ceil(2.0 * math.pi * ring_radius / spacing))
    if ring_radius > chord_error:
        n_chord = int(math.ceil(math.pi / math.acos(max(-1.0, 1.0 - chord_error / ring_radius))))
        n = max(n, n_chord)
    n = max(n, 8)
    angles = 2.0 * math.pi * np.arange(n) / n
    return np.column_stack([cx + ring_radius * np.cos(angles), cy + ring_radius * np.sin(angles)])


def _size_function(layouts, rebars, h_far):
    """Local target spacing at arbitrary points, from the ring layout of the nearest rebar."""
    tables = []
    for (cx, cy, radius), rings in zip(rebars, layouts):
        outer = [(r - radius, t) for r, t, _ in rings if r >= radius]
        s = np.array([o[0] for o in outer])
        h = np.array([o[1] for o in outer])
        tables.append((cx, cy, radius, s, h))

    def size(points):
        points = np.atleast_2d(points)
        out = np.full(len(points), h_far)
        best = np.full(len(points), np.inf)
        for cx, cy, radius, s, h in tables:
            dist = np.hypot(points[:, 0] - cx, points[:, 1] - cy) - radius
            local = np.interp(np.maximum(dist, 0.0), s, h, right=h_far)
            closer = dist < best
            out = np.where(closer, local, out)
            best = np.minimum(best, dist)
        return out

    return size


def _edge_points(start, end, size):
    """Nodes along a straight boundary segment spaced by the local size."""
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    length = float(np.linalg.norm(end - start))
    direction = (end - start) / length
    positions = [0.0]
    while positions[-1] < length:
        h = float(size(start + positions[-1] * direction)[0])
        positions.append(positions[-1] + h)
    positions = np.asarray(positions)
    # rescale so the last node lands on the corner
    n = max(len(positions) - 1, 1)
    positions = positions[:n + 1] * (length / positions[n])
    return start + np.outer(positions, direction), np.r_[np.diff(positions), positions[-1] - positions[-2]]


def _check_layout(geometry, sci_thickness):
    bars = geometry.rebars
    for a in range(len(bars)):
        for b in range(a + 1, len(bars)):
            gap = math.hypot(bars[a].x - bars[b].x, bars[a].y - bars[b].y) - bars[a].radius - bars[b].radius
            if gap <= 2.0 * sci_thickness:
                raise GeometryError(
                    f'rebars {a} and {b} overlap or their interface layers touch (gap {gap:.4g} m)'
                )


def generate_rebar_cross_section(geometry, h_sci, h_bulk, sci_thickness=None, h_far=None,
                                 refinement_radius=None, grading=None,
                                 bulk_porosity=None, sci_porosity=None):
    """
    Mesh a rectangular concrete section with circular steel bars.

    Parameters
    ----------
    geometry : GeometrySpec
    h_sci : float
        Target element size in the SCI layer (m).
    h_bulk : float
        Element size in the refined cover region (m).
    sci_thickness : float, optional
        SCI layer thickness (m), default 0.2 mm.
    h_far : float, optional
        Coarsest element size away from the bars (m), default ``h_bulk``.
    refinement_radius : float, optional
        Distance from each bar surface over which ``h_bulk`` is held.
    grading : float, optional
        Ratio between successive ring spacings.
    bulk_porosity, sci_porosity : float, optional
        When given, per-triangle p_0 is filled in.

    Returns
    -------
    Mesh
    """
    from rustcrack.config.constants import TRANSPORT

    if h_sci <= 0 or h_bulk <= 0 or h_sci > h_bulk:
        raise RefinementError('element sizes must satisfy 0 < h_sci <= h_bulk')
    sci_thickness = TRANSPORT['sci_thickness'] if sci_thickness is None else sci_thickness
    h_far = h_bulk if h_far is None else max(h_far, h_bulk)
    refinement_radius = MESH['refinement_radius'] if refinement_radius is None else refinement_radius
    grading = MESH['grading'] if grading is None else grading
    _check_layout(geometry, sci_thickness)

    width, height = geometry.width, geometry.height
    rebars = tuple((bar.x, bar.y, bar.radius) for bar in geometry.rebars)
    reach = math.hypot(width, height)

    layouts = [
        _ring_layout(radius, sci_thickness, h_sci, h_bulk, h_far, refinement_radius, grading, reach)
        for (_, _, radius) in rebars
    ]
    size = _size_function(layouts, rebars, h_far)

    # Candidate points in priority order: corners, boundary, rings (inside out), lattice
    candidates = []
    spacings = []
    corners = np.array([[0.0, 0.0], [width, 0.0], [width, height], [0.0, height]])
    candidates.append(corners)
    spacings.append(np.full(4, 0.0))
    for k in range(4):
        points, steps = _edge_points(corners[k], corners[(k + 1) % 4], size)
        candidates.append(points[1:-1])
        spacings.append(steps[1:-1])

    margin = 1e-12 * reach
    for index, ((cx, cy, radius), rings) in enumerate(zip(rebars, layouts)):
        ordered = sorted(rings, key=lambda ring: abs(ring[0] - radius))
        for ring_radius, tangential, radial in ordered:
            points = _ring_points(cx, cy, ring_radius, tangential, h_sci)
            own = np.hypot(points[:, 0] - cx, points[:, 1] - cy) - radius
            others = surface_distance(points, rebars[:index] + rebars[index + 1:]) if len(rebars) > 1 else np.full(len(points), np.inf)
            local = min(tangential, radial)
            inside = ((points[:, 0] > 0.5 * local) & (points[:, 0] < width - 0.5 * local)
                      & (points[:, 1] > 0.5 * local) & (points[:, 1] < height - 0.5 * local))
            keep = inside & (own <= others + margin)
            candidates.append(points[keep])
            spacings.append(np.full(int(keep.sum()), local))
        candidates.append(np.array([[cx, cy]]))
        spacings.append(np.array([0.0]))

    nx = max(int(math.ceil(width / h_far)), 1)
    ny = max(int(math.ceil(height / h_far)), 1)
    gx, gy = np.meshgrid(np.linspace(0.0, width, nx + 1)[1:-1], np.linspace(0.0, height, ny + 1)[1:-1])
    lattice = np.column_stack([gx.ravel(), gy.ravel()])
    if rebars:
        lattice = lattice[size(lattice) >= h_far * (1 - 1e-9)]
        lattice = lattice[surface_distance(lattice, rebars) > 0]
    candidates.append(lattice)
    spacings.append(np.full(len(lattice), h_far))

    points = np.vstack(candidates)
    spacing = np.concatenate(spacings)
    points = _thin(points, spacing, size)

    tri = Delaunay(points, qhull_options='Qbb Qc Qz Q12')
    triangles = _orient(points, tri.simplices)
    areas = _signed_area(points, triangles)
    local_h = size(points[triangles].mean(axis=1))
    triangles = triangles[areas > 1e-8 * local_h ** 2]

    centroids = points[triangles].mean(axis=1)
    distance = surface_distance(centroids, rebars) if rebars else np.full(len(triangles), np.inf)
    regions = np.full(len(triangles), Region.CONCRETE, dtype=np.int8)
    regions[distance <= sci_thickness] = Region.SCI
    regions[distance < 0] = Region.STEEL

    used = np.unique(triangles)
    remap = np.full(len(points), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    points = points[used]
    triangles = remap[triangles]

    edges, tags = _boundary(points, triangles, regions, height, geometry.top_surface)
    mesh = Mesh(
        nodes=points,
        triangles=triangles,
        regions=regions,
        boundary_edges=edges,
        boundary_tags=tags,
        rebars=rebars,
    )
    if bulk_porosity is not None:
        mesh = mesh.with_porosity(bulk_porosity, sci_porosity if sci_porosity is not None else bulk_porosity)
    logger.info(
        'Generated cross-section mesh',
        extra={'nodes': mesh.n_nodes, 'elements': mesh.n_elements, 'rebars': len(rebars)},
    )
    return mesh


def _thin(points, spacing, size):
    """Drop candidates closer than half the local size to an earlier accepted point."""
    tree = cKDTree(points)
    local = np.where(spacing > 0, spacing, size(points))
    accepted = np.zeros(len(points), dtype=bool)
    for i in range(len(points)):
        neighbours = tree.query_ball_point(points[i], 0.45 * local[i])
        if not any(accepted[j] for j in neighbours if j < i):
            accepted[i] = True
    return points[accepted]


def _signed_area(points, triangles):
    p = points[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _orient(points, triangles):
    triangles = np.array(triangles, dtype=np.int64)
    flip = _signed_area(points, triangles) < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    return triangles


def _boundary(points, triangles, regions, height, tag_top):
    outer = free_edges(triangles)
    on_top = np.all(np.abs(points[outer][:, :, 1] - height) <= 1e-9 * max(height, 1.0), axis=1)
    outer_tags = np.where(on_top & tag_top, BoundaryTag.TOP_SURFACE, BoundaryTag.OUTER)

    steel = regions == Region.STEEL
    all_edges = np.sort(np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]), axis=1)
    owner_steel = np.tile(steel, 3)
    unique, inverse = np.unique(all_edges, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    steel_count = np.bincount(inverse, weights=owner_steel.astype(float), minlength=len(unique))
    total = np.bincount(inverse, minlength=len(unique))
    interface = unique[(total == 2) & (steel_count == 1)]

    edges = np.vstack([outer, interface]) if len(interface) else outer
    tags = np.concatenate([outer_tags, np.full(len(interface), BoundaryTag.REBAR_SURFACE)])
    return edges, tags.astype(np.int8)
