"""
Parametric sweeps: one full run per parameter value, then a table of the
surface crack width at the report days.

Points run in separate processes (``RUSTCRACK_WORKERS`` caps the pool) and
each writes into its own directory under the sweep directory. The table is
assembled after every point has finished, in the order the values were
given, so it does not depend on completion order.
"""
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from rustcrack.config.constants import ENV_WORKERS
from rustcrack.config.loader import apply_overrides, config_from_mapping, config_to_mapping
from rustcrack.config.moduli import concrete_from_tensile_strength
from rustcrack.config.units import UnitError, parse_quantity
from rustcrack.models.params import SimulationConfig
from rustcrack.post.crack_width import relative_width
from rustcrack.post.writers import write_csv, write_sweep_xlsx
from rustcrack.utils.error_handler import ConfigError
from rustcrack.utils.output_paths import new_run_id, run_directory

logger = logging.getLogger(__name__)

# Name -> dotted config keys set to the value
SWEEP_PARAMETERS = {
    'd': ('geometry.rebars.*.diameter',),
    'c': ('geometry.rebars.*.y',),
    'p_0': ('transport.bulk_porosity',),
    'i_a': ('transport.current_density',),
    'E_p': ('rust.young_modulus',),
    'nu_p': ('rust.poisson_ratio',),
    'ft_gf': ('concrete',),
    'theta_l_D_m': ('transport.diffusivity_ii', 'transport.diffusivity_iii'),
    'k_II_III': ('transport.rate_ii_to_iii',),
    'c_ox': ('transport.oxygen_concentration',),
    'd_SCI': ('transport.sci_thickness',),
    'k_III_p': ('transport.rate_iii_to_p',),
}


def check_parameter(name):
    if name not in SWEEP_PARAMETERS:
        raise ConfigError(f'unknown sweep parameter {name!r}; sweepable: {", ".join(SWEEP_PARAMETERS)}',
                          field=name)
    return name


def worker_count(points, environ=None):
    """Pool size from ``RUSTCRACK_WORKERS`` (default: CPU count), never more than the points."""
    env = os.environ if environ is None else environ
    raw = str(env.get(ENV_WORKERS, '') or '').strip()
    if raw:
        try:
            workers = int(raw)
        except ValueError as exc:
            raise ConfigError(f'{ENV_WORKERS} must be an integer, got {raw!r}') from exc
        if workers < 1:
            raise ConfigError(f'{ENV_WORKERS} must be at least 1')
    else:
        workers = os.cpu_count() or 1
    return max(1, min(workers, points))


def _length(value, field):
    try:
        return parse_quantity(value, 'length')
    except UnitError as exc:
        raise ConfigError(str(exc), field=field) from exc


def _tensile_strength(value):
    # Plain numbers are MPa
    if isinstance(value, str):
        try:
            return parse_quantity(value, 'pressure')
        except UnitError as exc:
            raise ConfigError(str(exc), field='ft_gf') from exc
    return float(value) * 1e6


def configure_point(config: SimulationConfig, name, value) -> SimulationConfig:
    """
    Config for one sweep point.

    ``d`` keeps each bar's cover and ``c`` keeps each bar's diameter by
    moving the bar centre vertically. ``p_0`` keeps the SCI/bulk porosity
    ratio. ``ft_gf`` derives E_c and G_f from the tensile strength.
    """
    check_parameter(name)
    geometry = config.geometry
    if name in ('d', 'c'):
        if not geometry.rebars:
            raise ConfigError(f'sweep over {name!r} needs at least one rebar', field=name)
        overrides = {}
        size = _length(value, name)
        for index, bar in enumerate(geometry.rebars):
            cover = geometry.cover(index) if name == 'd' else size
            diameter = size if name == 'd' else bar.diameter
            overrides[f'geometry.rebars.{index}.diameter'] = diameter
            overrides[f'geometry.rebars.{index}.y'] = geometry.height - cover - 0.5 * diameter
        return apply_overrides(config, overrides)
    if name == 'p_0':
        ratio = config.transport.sci_porosity / config.transport.bulk_porosity
        point = apply_overrides(config, {'transport.bulk_porosity': value})
        return apply_overrides(point, {'transport.sci_porosity': point.transport.bulk_porosity * ratio})
    if name == 'ft_gf':
        concrete = concrete_from_tensile_strength(_tensile_strength(value), config.concrete.poisson_ratio)
        concrete['heterogeneity'] = config.concrete.heterogeneity
        return apply_overrides(config, {'concrete': concrete})
    return apply_overrides(config, {key: value for key in SWEEP_PARAMETERS[name]})


def _run_point(mapping, directory, report_days):
    """Worker entry point; takes plain data so it pickles cleanly."""
    from rustcrack.simulation.driver import run

    config = config_from_mapping(mapping)
    output = run(config, directory=Path(directory))
    reference = config.output.relative_width_reference
    row = {
        'run_id': output.run_id,
        'status': 'completed' if output.abort_reason is None else 'aborted',
        'abort_reason': output.abort_reason or '',
    }
    for day in report_days:
        width = output.width_at(day)
        row[f'w_{day:g}d'] = width
        row[f'relative_w_{day:g}d'] = relative_width(width, reference)
    return row


def _failed_row(job, exc):
    """Table row for a point whose run raised; the other points still report."""
    run_id = job[0]['output']['run_id']
    logger.error('Sweep point failed', extra={'run_id': run_id, 'error': f'{type(exc).__name__}: {exc}'})
    return {'run_id': run_id, 'status': 'failed', 'abort_reason': f'{type(exc).__name__}: {exc}'}


def sweep_columns(report_days):
    columns = ['parameter', 'value', 'run_id', 'status']
    for day in report_days:
        columns.extend([f'w_{day:g}d', f'relative_w_{day:g}d'])
    columns.append('abort_reason')
    return columns


def run_sweep(config: SimulationConfig, name, values, directory=None, workers=None, xlsx=False):
    """
    Run every point and write ``sweep_<name>.csv`` (and ``.xlsx`` when asked).

    Returns the table rows in the order of ``values``. A point whose run raises
    becomes a row with status ``failed`` and the error in ``abort_reason``.
    """
    check_parameter(name)
    values = list(values)
    if not values:
        raise ConfigError('a sweep needs at least one value', field=name)
    points = [configure_point(config, name, value) for value in values]
    sweep_id = config.output.run_id or new_run_id(f'{config.name}-sweep-{name}')
    directory = Path(directory) if directory is not None else run_directory(sweep_id)
    directory.mkdir(parents=True, exist_ok=True)
    report_days = list(config.output.report_days)

    jobs = []
    for index, point in enumerate(points):
        run_id = f'{name}_{index:02d}'
        mapping = config_to_mapping(point)
        mapping['output']['run_id'] = run_id
        jobs.append((mapping, str(directory / run_id), report_days))

    workers = min(workers or worker_count(len(jobs)), len(jobs))
    logger.info('Sweep started', extra={'parameter': name, 'points': len(jobs), 'workers': workers,
                                        'directory': str(directory)})
    results = []
    if workers == 1:
        for job in jobs:
            try:
                results.append(_run_point(*job))
            except Exception as exc:
                results.append(_failed_row(job, exc))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_point, *job) for job in jobs]
            for job, future in zip(jobs, futures):
                try:
                    results.append(future.result())
                except Exception as exc:
                    results.append(_failed_row(job, exc))

    rows = []
    for value, result in zip(values, results):
        rows.append({'parameter': name, 'value': value, **result})
    columns = sweep_columns(report_days)
    write_csv(rows, directory / f'sweep_{name}.csv', columns=columns,
              comments=[f'sweep {sweep_id}', 'w in m'])
    if xlsx:
        write_sweep_xlsx(rows, columns, directory / f'sweep_{name}.xlsx')
    logger.info('Sweep finished', extra={'parameter': name, 'points': len(rows)})
    return rows
