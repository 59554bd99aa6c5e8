"""
Result files: VTK snapshots, time-series and probe CSVs, sweep tables.
"""
import csv
import io
import logging
from pathlib import Path

import numpy as np

from rustcrack.meshing.msh_io import write_mesh_vtk
from rustcrack.models.mesh import Mesh
from rustcrack.physics.mechanics import principal_stress
from rustcrack.utils.error_handler import OutputError
from rustcrack.utils.file_operations import atomic_output, atomic_write_text

logger = logging.getLogger(__name__)

TIME_SERIES_COLUMNS = (
    ('time', 's'),
    ('time_days', 'day'),
    ('crack_width', 'm'),
    ('relative_width', '-'),
    ('precipitate_volume', 'm^2 per unit thickness'),
    ('max_phi', '-'),
    ('iron_inventory', 'mol per m thickness'),
    ('injected_iron', 'mol per m thickness'),
    ('mass_drift', '-'),
    ('min_phi_change', '-'),
)

SNAPSHOT_FIELDS = ('c_II', 'c_III', 'theta_p', 'S_p', 'phi', 'u', 'sigma1')


def _format(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def csv_text(rows, columns, comments=()):
    """CSV with ``#`` comment lines, a header row and repr-precision floats."""
    buffer = io.StringIO()
    for line in comments:
        buffer.write(f'# {line}\n')
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format(row.get(name, '')) for name in columns])
    return buffer.getvalue()


def write_csv(rows, path, columns=None, units=None, comments=()):
    """Write a list of dict rows; an empty list gives a header-only file."""
    if columns is None:
        columns = [name for name, _ in TIME_SERIES_COLUMNS]
        units = dict(TIME_SERIES_COLUMNS)
    header = list(comments)
    if units:
        header.append('units: ' + ', '.join(f'{name} [{units[name]}]' for name in columns if name in units))
    try:
        atomic_write_text(Path(path), csv_text(rows, columns, header))
    except OSError as exc:
        raise OutputError(f'cannot write {path}: {exc}') from exc
    return Path(path)


def nodal_average(mesh: Mesh, element_values, element_mask=None):
    """Area-weighted average of element values at the nodes."""
    mask = np.ones(mesh.n_elements, dtype=bool) if element_mask is None else np.asarray(element_mask, dtype=bool)
    weights = np.zeros(mesh.n_nodes)
    total = np.zeros(mesh.n_nodes)
    areas = mesh.areas[mask]
    tri = mesh.triangles[mask]
    values = np.asarray(element_values, dtype=float)[mask]
    np.add.at(weights, tri.ravel(), np.repeat(areas, 3))
    np.add.at(total, tri.ravel(), np.repeat(areas * values, 3))
    out = np.zeros(mesh.n_nodes)
    np.divide(total, weights, out=out, where=weights > 0)
    return out


def snapshot_fields(mesh: Mesh, state):
    """Nodal arrays of a SimulationState keyed by the snapshot names."""
    species = state.species
    sigma1 = principal_stress(state.mechanics.effective_stress)
    return {
        'c_II': species.c_ii,
        'c_III': species.c_iii,
        'theta_p': species.theta_p,
        'S_p': species.saturation,
        'phi': state.phi,
        'u': state.mechanics.displacement,
        'sigma1': nodal_average(mesh, sigma1),
    }


def write_vtk(mesh: Mesh, state, path):
    """Legacy ASCII VTK snapshot with the nodal fields plus element sigma1 and history."""
    cell_data = {
        'sigma1_element': principal_stress(state.mechanics.effective_stress),
        'history': state.mechanics.history,
    }
    return write_mesh_vtk(mesh, path, point_data=snapshot_fields(mesh, state), cell_data=cell_data)


def write_probe_csv(lines, path, coordinate_name, comments=()):
    """
    ``lines`` maps a column name to a ProbeLine; all lines are written side by
    side and shorter (truncated) lines are padded with empty cells.
    """
    names = list(lines)
    length = max((len(line.coordinate) for line in lines.values()), default=0)
    rows = []
    for i in range(length):
        row = {}
        for name in names:
            line = lines[name]
            if i < len(line.coordinate):
                row[f'{name}_{coordinate_name}'] = float(line.coordinate[i])
                row[name] = float(line.values[i])
        rows.append(row)
    columns = []
    for name in names:
        columns.extend([f'{name}_{coordinate_name}', name])
    notes = list(comments) + [f'{name} truncated' for name in names if lines[name].truncated]
    return write_csv(rows, path, columns=columns, comments=notes)


def write_meta(path, entries):
    text = ''.join(f'{key}: {value}\n' for key, value in entries.items())
    atomic_write_text(Path(path), text)
    return Path(path)


def write_sweep_xlsx(rows, columns, path):
    """Spreadsheet copy of a sweep table."""
    try:
        from openpyxl import Workbook
    except ImportError as exc:
        raise OutputError('openpyxl is required for .xlsx export') from exc
    workbook = Workbook()
    sheet = workbook.active
    sheet.title = 'sweep'
    sheet.append(list(columns))
    for row in rows:
        sheet.append([row.get(name) for name in columns])
    path = Path(path)
    try:
        with atomic_output(path) as temp_path:
            workbook.save(temp_path)
    except OSError as exc:
        raise OutputError(f'cannot write {path}: {exc}') from exc
    return path
