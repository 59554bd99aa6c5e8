"""
Mesh exchange: ASCII MSH v2 import and legacy ASCII VTK export/import.
"""
import logging
from pathlib import Path

import meshio
import numpy as np

from rustcrack.models.mesh import BoundaryTag, Mesh, Region, check_mesh, free_edges
from rustcrack.utils.error_handler import MeshError, OutputError
from rustcrack.utils.file_operations import atomic_output

logger = logging.getLogger(__name__)

MSH_LENGTH_UNIT = 1.0e-3  # coordinates in .msh files are millimetres

REGION_NAMES = {
    'concrete': Region.CONCRETE,
    'steel': Region.STEEL,
    'sci': Region.SCI,
}

BOUNDARY_NAMES = {
    'outer': BoundaryTag.OUTER,
    'rebar_surface': BoundaryTag.REBAR_SURFACE,
    'rebarsurface': BoundaryTag.REBAR_SURFACE,
    'top_surface': BoundaryTag.TOP_SURFACE,
    'topsurface': BoundaryTag.TOP_SURFACE,
}


def _physical_lookup(msh, dim, names):
    """Map physical tag numbers of dimension ``dim`` to enum members."""
    lookup = {}
    for name, (tag, tag_dim) in ((n, v[:2]) for n, v in msh.field_data.items()):
        if int(tag_dim) != dim:
            continue
        key = name.strip().lower().replace(' ', '_')
        if key not in names:
            raise MeshError(f'unknown physical group {name!r}')
        lookup[int(tag)] = names[key]
    return lookup


def _cells(msh, cell_type):
    blocks = [(i, block) for i, block in enumerate(msh.cells) if block.type == cell_type]
    if not blocks:
        return np.zeros((0, 3 if cell_type == 'triangle' else 2), dtype=np.int64), None
    data = np.vstack([block.data for _, block in blocks])
    physical = msh.cell_data.get('gmsh:physical')
    tags = None
    if physical is not None:
        tags = np.concatenate([np.asarray(physical[i]) for i, _ in blocks])
    return data.astype(np.int64), tags


def import_msh(path, rebars=(), bulk_porosity=None, sci_porosity=None):
    """
    Read an ASCII MSH v2 file (coordinates in mm) into a Mesh.

    Physical groups named concrete / steel / sci tag triangles; outer /
    rebar_surface / top_surface tag line elements. Boundary edges without a
    line element are tagged outer.
    """
    path = Path(path)
    try:
        msh = meshio.read(path, file_format='gmsh')
    except (meshio.ReadError, OSError, ValueError, KeyError) as exc:
        raise MeshError(f'cannot read {path}: {exc}') from exc

    nodes = np.asarray(msh.points, dtype=float)[:, :2] * MSH_LENGTH_UNIT
    triangles, tri_tags = _cells(msh, 'triangle')
    if len(triangles) == 0:
        raise MeshError(f'{path.name} contains no triangles')
    lines, line_tags = _cells(msh, 'line')

    region_lookup = _physical_lookup(msh, 2, REGION_NAMES)
    boundary_lookup = _physical_lookup(msh, 1, BOUNDARY_NAMES)

    if tri_tags is None or not region_lookup:
        regions = np.full(len(triangles), Region.CONCRETE, dtype=np.int8)
    else:
        try:
            regions = np.array([region_lookup[int(t)] for t in tri_tags], dtype=np.int8)
        except KeyError as exc:
            raise MeshError(f'unknown physical group {exc.args[0]} on triangles') from exc

    p = nodes[triangles]
    signed = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                    - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    scale = max(float(np.abs(signed).max()), 1e-300)
    degenerate = np.flatnonzero(np.abs(signed) <= 1e-12 * scale)
    if degenerate.size:
        raise MeshError('zero-area triangle', element_id=int(degenerate[0]) + 1)
    flip = signed < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]

    tagged = {}
    if len(lines):
        for k, (a, b) in enumerate(lines):
            if line_tags is None or not boundary_lookup:
                tag = BoundaryTag.OUTER
            else:
                if int(line_tags[k]) not in boundary_lookup:
                    raise MeshError(f'unknown physical group {int(line_tags[k])} on line elements')
                tag = boundary_lookup[int(line_tags[k])]
            tagged[(min(a, b), max(a, b))] = tag
    for a, b in free_edges(triangles):
        tagged.setdefault((int(a), int(b)), BoundaryTag.OUTER)

    edges = np.array(list(tagged.keys()), dtype=np.int64).reshape(-1, 2)
    tags = np.array([int(t) for t in tagged.values()], dtype=np.int8)
    mesh = Mesh(nodes=nodes, triangles=triangles, regions=regions,
                boundary_edges=edges, boundary_tags=tags, rebars=tuple(rebars))
    if bulk_porosity is not None:
        mesh = mesh.with_porosity(bulk_porosity, sci_porosity if sci_porosity is not None else bulk_porosity)
    check_mesh(mesh)
    logger.info('Imported mesh', extra={'path': str(path), 'nodes': mesh.n_nodes, 'elements': mesh.n_elements})
    return mesh


def _as_vector3(values):
    values = np.asarray(values, dtype=float)
    if values.ndim == 2 and values.shape[1] == 2:
        values = np.column_stack([values, np.zeros(len(values))])
    return values


def write_mesh_vtk(mesh: Mesh, path, point_data=None, cell_data=None):
    """Write the mesh (plus optional nodal / element arrays) as legacy ASCII VTK."""
    points = np.column_stack([mesh.nodes, np.zeros(mesh.n_nodes)])
    cells_extra = {'region': [np.asarray(mesh.regions, dtype=np.int32)]}
    for name, values in (cell_data or {}).items():
        cells_extra[name] = [np.asarray(values, dtype=float)]
    vtk = meshio.Mesh(
        points,
        [('triangle', np.asarray(mesh.triangles))],
        point_data={name: _as_vector3(values) for name, values in (point_data or {}).items()},
        cell_data=cells_extra,
    )
    path = Path(path)
    try:
        with atomic_output(path) as temp_path:
            meshio.write(temp_path, vtk, file_format='vtk', binary=False)
    except OSError as exc:
        raise OutputError(f'cannot write {path}: {exc}') from exc
    return path


def read_vtk(path):
    """Read a legacy VTK file written by :func:`write_mesh_vtk`.

    Returns the mesh (regions restored, boundary recomputed as outer) and a
    dict of point-data arrays.
    """
    path = Path(path)
    try:
        vtk = meshio.read(path, file_format='vtk')
    except (meshio.ReadError, OSError, ValueError, KeyError) as exc:
        raise MeshError(f'cannot read {path}: {exc}') from exc
    triangles = vtk.cells_dict.get('triangle')
    if triangles is None or len(triangles) == 0:
        raise MeshError(f'{path.name} contains no triangles')
    region = vtk.cell_data_dict.get('region', {}).get('triangle')
    regions = np.zeros(len(triangles), dtype=np.int8) if region is None else np.asarray(region, dtype=np.int8)
    edges = free_edges(triangles)
    mesh = Mesh(
        nodes=np.asarray(vtk.points)[:, :2],
        triangles=triangles,
        regions=regions,
        boundary_edges=edges,
        boundary_tags=np.full(len(edges), BoundaryTag.OUTER),
    )
    return mesh, {name: np.asarray(values) for name, values in vtk.point_data.items()}
