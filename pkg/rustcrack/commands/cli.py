"""
rustcrack command line.

Usage
-----
    # One simulation; results under out/<run-id>/
    python run.py run configs/test2.yaml

    # Print the fully resolved SI configuration and exit
    python run.py run configs/test2.yaml --dump-config

    # Override single values (units accepted)
    python run.py run configs/test2.yaml --set transport.current_density="5 uA/cm2"

    # Sweep one parameter; RUSTCRACK_WORKERS caps the process pool
    python run.py sweep configs/test2.yaml --param i_a --values "0.1 uA/cm2,1 uA/cm2,10 uA/cm2" --xlsx

    # Tension-bar comparison of the phase-field variants
    python run.py bench-bar --variant all

    # Mesh statistics, optionally the mesh itself as VTK
    python run.py mesh-info configs/test2.yaml --vtk mesh.vtk

Exit codes: 0 success, 2 configuration/geometry/mesh error, 3 solver
failure (run aborted), 4 output error.
"""
import argparse
import sys
from pathlib import Path

import numpy as np
import yaml
from pydantic import ValidationError

from rustcrack import __version__
from rustcrack.config.loader import apply_overrides, dump_config, load_config, parse_override
from rustcrack.meshing.msh_io import write_mesh_vtk
from rustcrack.models.mesh import BoundaryTag, Region
from rustcrack.models.params import ConcreteParams, ModelVariant, PhaseFieldParams
from rustcrack.utils.error_handler import ConfigError, register_error_handlers
from rustcrack.utils.logger import close_file_handlers, setup_logging
from rustcrack.utils.output_paths import get_output_root

BAR_VARIANTS = ('pfczm', 'at2', 'stress', 'all')


def _load(args):
    config = load_config(args.config)
    overrides = dict(parse_override(text) for text in (args.set or []))
    if overrides:
        config = apply_overrides(config, overrides)
    return config


def _split_values(text):
    values = []
    for item in text.split(','):
        item = item.strip()
        if not item:
            continue
        try:
            values.append(yaml.safe_load(item))
        except yaml.YAMLError:
            values.append(item)
    if not values:
        raise ConfigError('--values is empty', field='values')
    return values


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_run(args):
    config = _load(args)
    if args.dump_config:
        sys.stdout.write(dump_config(config))
        return 0
    if args.no_vtk:
        config = apply_overrides(config, {'output.write_vtk': False})

    from rustcrack.simulation.driver import run
    from rustcrack.utils.output_paths import new_run_id, run_directory

    run_id = config.output.run_id or new_run_id(config.name)
    config = apply_overrides(config, {'output.run_id': run_id})
    if args.output:
        directory = Path(args.output)
    elif config.output.directory:
        directory = Path(config.output.directory) / run_id
    else:
        directory = run_directory(run_id)
    setup_logging(args.log_level, directory / 'logs')
    try:
        output = run(config, directory=directory)
    finally:
        close_file_handlers()
    print(f'Results : {directory}')
    if output.abort_reason:
        print(f'Run aborted: {output.abort_reason}')
        return 3
    return 0


def cmd_sweep(args):
    from rustcrack.commands.sweep import check_parameter, run_sweep

    check_parameter(args.param)
    config = _load(args)
    rows = run_sweep(config, args.param, _split_values(args.values),
                     directory=args.output, workers=args.workers, xlsx=args.xlsx)
    days = list(config.output.report_days)
    print(f"{'value':>16} " + ' '.join(f'{f"w@{day:g}d [mm]":>12}' for day in days))
    for row in rows:
        widths = ' '.join(f"{row[f'w_{day:g}d'] * 1e3:>12.4f}" for day in days)
        print(f"{str(row['value']):>16} {widths}")
    return 3 if any(row['status'] != 'completed' for row in rows) else 0


def _bar_sections(path):
    """``concrete`` and ``phase_field`` sections of a bar config file."""
    if path is None:
        return None, None
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f'configuration file not found: {config_path}')
    try:
        data = yaml.safe_load(config_path.read_text(encoding='utf-8')) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f'cannot parse {config_path.name}: {exc}') from exc
    try:
        concrete = ConcreteParams.model_validate(data.get('concrete') or {})
        phase_field = PhaseFieldParams.model_validate(data.get('phase_field') or {})
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(first['msg'], field='.'.join(str(p) for p in first['loc'])) from exc
    return concrete, phase_field


def cmd_bench_bar(args):
    from rustcrack.simulation.benchmark import run_bar_benchmark

    concrete, phase_field = _bar_sections(args.config)
    # without --variant the config's phase_field.model_variant decides
    chosen = args.variant or (phase_field.model_variant.value if phase_field else ModelVariant.PFCZM.value)
    variants = ('pfczm', 'at2', 'stress') if chosen == 'all' else (chosen,)
    directory = Path(args.output) if args.output else Path(get_output_root()) / 'bar'
    for variant in variants:
        result = run_bar_benchmark(
            variant, concrete, phase_field, directory=directory,
            increments=args.increments, max_normalized_strain=args.max_strain,
            length=args.length, height=args.height, element_size=args.element_size,
            at2_length=args.at2_length,
        )
        print(f'{ModelVariant.parse(variant).value:<13} peak sigma/f_t,min = {result.peak_normalized_stress:.4f}'
              f'  (f_t,min {result.strength / 1e6:.3f} MPa, l {result.length_scale * 1e3:.2f} mm)')
    print(f'Curves  : {directory}')
    return 0


def cmd_mesh_info(args):
    from rustcrack.simulation.driver import build_mesh

    config = _load(args)
    mesh = build_mesh(config)
    sizes = mesh.element_sizes()
    print(f'nodes    : {mesh.n_nodes}')
    print(f'elements : {mesh.n_elements}')
    for region in Region:
        mask = mesh.regions == region
        if not mask.any():
            continue
        print(f'{region.name.lower():<8} : {int(mask.sum()):>7} elements  area {mesh.region_area(region):.6e} m2'
              f'  size {sizes[mask].min() * 1e3:.3f}-{sizes[mask].max() * 1e3:.3f} mm')
    for tag in BoundaryTag:
        print(f'{tag.name.lower():<14} : {len(mesh.edges(tag))} edges')
    print(f'total area : {float(np.sum(mesh.areas)):.6e} m2')
    if args.vtk:
        write_mesh_vtk(mesh, args.vtk, cell_data={'porosity': mesh.porosity})
        print(f'VTK      : {args.vtk}')
    return 0


# ============================================================================
# PARSER
# ============================================================================

def _add_config_arguments(parser):
    parser.add_argument('config', help='YAML configuration file')
    parser.add_argument('--set', action='append', metavar='KEY=VALUE',
                        help='Override a dotted config key (repeatable)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='rustcrack', description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--log-level', default=None, help='Console log level (default: RUSTCRACK_LOG_LEVEL or INFO)')
    sub = parser.add_subparsers(dest='command', required=True)

    run_parser = sub.add_parser('run', help='Run one simulation')
    _add_config_arguments(run_parser)
    run_parser.add_argument('--dump-config', action='store_true', help='Print the resolved configuration and exit')
    run_parser.add_argument('--output', default=None, help='Run directory (default: out/<run-id>)')
    run_parser.add_argument('--no-vtk', action='store_true', help='Skip VTK snapshots')
    run_parser.set_defaults(handler=cmd_run)

    sweep_parser = sub.add_parser('sweep', help='Run one simulation per parameter value')
    _add_config_arguments(sweep_parser)
    sweep_parser.add_argument('--param', required=True, help='Sweep parameter name')
    sweep_parser.add_argument('--values', required=True, help='Comma-separated values, units allowed')
    sweep_parser.add_argument('--workers', type=int, default=None, help='Process count (default: RUSTCRACK_WORKERS)')
    sweep_parser.add_argument('--output', default=None, help='Sweep directory')
    sweep_parser.add_argument('--xlsx', action='store_true', help='Also write the table as .xlsx')
    sweep_parser.set_defaults(handler=cmd_sweep)

    bar_parser = sub.add_parser('bench-bar', help='Tension-bar comparison of phase-field variants')
    bar_parser.add_argument('--variant', choices=BAR_VARIANTS, default=None,
                            help='Variant to run (default: phase_field.model_variant of --config, else pfczm)')
    bar_parser.add_argument('--config', default=None, help='YAML with concrete and phase_field sections')
    bar_parser.add_argument('--length', type=float, default=None, help='Bar length (m)')
    bar_parser.add_argument('--height', type=float, default=None, help='Bar height (m)')
    bar_parser.add_argument('--element-size', type=float, default=None, help='Element size (m)')
    bar_parser.add_argument('--increments', type=int, default=None, help='Load increments')
    bar_parser.add_argument('--max-strain', type=float, default=None, help='Final strain in units of f_t,min/E')
    bar_parser.add_argument('--at2-length', type=float, default=None, help='AT2 length scale (m)')
    bar_parser.add_argument('--output', default=None, help='Output directory (default: out/bar)')
    bar_parser.set_defaults(handler=cmd_bench_bar)

    mesh_parser = sub.add_parser('mesh-info', help='Print mesh statistics')
    _add_config_arguments(mesh_parser)
    mesh_parser.add_argument('--vtk', default=None, help='Write the mesh as legacy VTK')
    mesh_parser.set_defaults(handler=cmd_mesh_info)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    return register_error_handlers(args.handler)(args)


if __name__ == '__main__':
    sys.exit(main())
