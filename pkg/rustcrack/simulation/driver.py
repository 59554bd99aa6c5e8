"""
Coupled corrosion-cracking simulation.

Each time step runs transport with the current damage, rebuilds the
precipitation eigenstrain, then alternates equilibrium, driving-force update
and phase-field solve until the phase field stops changing (or the
configured number of passes is spent).
"""
import logging
import math
import platform
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from rustcrack import __version__
from rustcrack.config.constants import OUTPUT, SECONDS_PER_DAY
from rustcrack.config.loader import config_hash, write_config
from rustcrack.fem.kernels import kernel_for
from rustcrack.meshing.generate import generate_rebar_cross_section
from rustcrack.meshing.msh_io import import_msh
from rustcrack.models.mesh import BoundaryTag, Mesh
from rustcrack.models.params import ModelVariant, SimulationConfig
from rustcrack.models.state import FirstDamage, MechanicalState, RunOutput, SimulationState, StepDiagnostics
from rustcrack.physics.mechanics import MechanicsSolver
from rustcrack.physics.phasefield import PhaseFieldSolver, build_damage_model, element_strengths
from rustcrack.physics.transport import TransportSolver
from rustcrack.post.crack_paths import crack_paths, rebar_interface_nodes, side_nodes
from rustcrack.post.crack_width import crack_width, relative_width, surface_parents
from rustcrack.post.probes import PointLocator, probe_circumferential, probe_radial
from rustcrack.post.writers import write_csv, write_meta, write_probe_csv, write_vtk
from rustcrack.utils.error_handler import RECOVERABLE_ERRORS, ConfigError, ErrorHandler, GeometryError, SolverError
from rustcrack.utils.file_operations import atomic_output
from rustcrack.utils.logger import get_progress_logger, get_solver_logger
from rustcrack.utils.output_paths import new_run_id, run_directory

logger = logging.getLogger(__name__)


def build_mesh(config: SimulationConfig) -> Mesh:
    """Generate (or import) the cross-section mesh with porosity filled in."""
    transport = config.transport
    if config.mesh.msh_path:
        rebars = [(bar.x, bar.y, bar.radius) for bar in config.geometry.rebars]
        return import_msh(config.mesh.msh_path, rebars, transport.bulk_porosity, transport.sci_porosity)
    if not config.geometry.rebars:
        raise GeometryError('a generated cross-section needs at least one rebar')
    return generate_rebar_cross_section(
        config.geometry,
        h_sci=config.mesh.h_sci,
        h_bulk=config.mesh.h_bulk,
        sci_thickness=transport.sci_thickness,
        h_far=config.mesh.h_far,
        refinement_radius=config.mesh.refinement_radius,
        grading=config.mesh.grading,
        bulk_porosity=transport.bulk_porosity,
        sci_porosity=transport.sci_porosity,
    )


@dataclass
class StepRecord:
    state: SimulationState
    dt: float
    halvings: int


class Simulation:
    """
    Owns the per-mesh solvers of one run. Not shared between runs.
    """

    def __init__(self, config: SimulationConfig, mesh: Mesh = None):
        variant = config.phase_field.model_variant
        if variant != ModelVariant.PFCZM:
            raise ConfigError(f'coupled runs use pfczm, not {variant.value!r}', field='phase_field.model_variant')
        self.config = config
        self.mesh = mesh if mesh is not None else build_mesh(config)
        self.kernel = kernel_for(self.mesh)
        self.transport = TransportSolver(self.mesh, config.transport, config.rust, self.kernel)
        self.mechanics = MechanicsSolver(
            self.mesh, config.concrete, config.steel, config.rust, config.iron,
            config.transport.bulk_porosity, config.geometry.constraints,
            residual_stiffness=config.phase_field.residual_stiffness, kernel=self.kernel,
        )
        tensile_strength, fracture_energy = element_strengths(self.mesh, config.concrete, config.seed)
        domain = float(np.ptp(self.mesh.nodes, axis=0).max())
        self.model = build_damage_model(variant, tensile_strength, fracture_energy,
                                        config.phase_field, self.mechanics.elongation_modulus,
                                        config.concrete.young_modulus, domain)
        self.phase_field = PhaseFieldSolver(self.mesh, self.model, self.kernel)
        self.concrete = self.mesh.concrete_elements
        self.surface = surface_parents(self.mesh) if len(self.mesh.edges(BoundaryTag.TOP_SURFACE)) else None
        self.interfaces = rebar_interface_nodes(self.mesh)
        self.sides = side_nodes(self.mesh)

    # ------------------------------------------------------------------
    def initial_state(self) -> SimulationState:
        history = np.where(self.concrete, self.model.initial_history(), 0.0)
        return SimulationState(
            time=0.0,
            species=self.transport.initial_state(),
            mechanics=MechanicalState.initial(self.mesh.n_nodes, self.mesh.n_elements, history),
            phi=np.zeros(self.mesh.n_nodes),
        )

    def degradation(self, phi):
        g = self.model.degradation(self.kernel.at_quadrature(phi))
        return np.where(self.concrete[:, None], g, 1.0)

    def staggered_step(self, state: SimulationState, dt) -> SimulationState:
        """Advance by ``dt``; solver errors propagate to the caller."""
        timing = self.config.time
        species = self.transport.step(state.species, state.phi, dt)
        eigenstrain = self.mechanics.eigenstrain(species.theta_p)
        previous_history = state.mechanics.history

        phi = state.phi
        newton_iterations, newton_residual, change = 0, 0.0, 0.0
        passes = 0
        for passes in range(1, timing.staggered_iterations + 1):
            mechanics = self.mechanics.solve(self.degradation(phi), eigenstrain, previous_history)
            history = np.where(self.concrete, self.model.driving_force(mechanics, previous_history), 0.0)
            updated, iterations, residual = self.phase_field.solve(history, state.phi, phi_guess=phi)
            newton_iterations += iterations
            newton_residual = residual
            change = float(np.max(np.abs(updated - phi), initial=0.0))
            phi = updated
            if change <= timing.staggered_tolerance:
                break
        mechanics = mechanics.evolve(history=history)

        return SimulationState(
            time=state.time + dt,
            species=species,
            mechanics=mechanics,
            phi=phi,
            injected_iron=state.injected_iron + dt * self.transport.injected_per_second(),
            step=state.step + 1,
            diagnostics=StepDiagnostics(newton_iterations=newton_iterations, newton_residual=newton_residual,
                                        staggered_iterations=passes, staggered_change=change),
        )

    def advance(self, state: SimulationState, dt) -> StepRecord:
        """Step with up to ``max_dt_halvings`` retries on recoverable solver errors."""
        attempt_dt = dt
        for halvings in range(self.config.time.max_dt_halvings + 1):
            try:
                new_state = self.staggered_step(state, attempt_dt)
            except RECOVERABLE_ERRORS as error:
                ErrorHandler.log_error(error, error_type='warning',
                                       context={'step': state.step + 1, 'time_s': state.time, 'dt_s': attempt_dt})
                last_error = error
                attempt_dt *= 0.5
                continue
            diagnostics = new_state.diagnostics
            new_state = new_state.evolve(diagnostics=StepDiagnostics(
                newton_iterations=diagnostics.newton_iterations,
                newton_residual=diagnostics.newton_residual,
                staggered_iterations=diagnostics.staggered_iterations,
                staggered_change=diagnostics.staggered_change,
                dt_halvings=halvings,
            ))
            return StepRecord(new_state, attempt_dt, halvings)
        raise SolverError(f'step failed after {self.config.time.max_dt_halvings} time-step halvings: {last_error}',
                          diagnostics=getattr(last_error, 'diagnostics', None))

    # ------------------------------------------------------------------
    def crack_width(self, state: SimulationState):
        if self.surface is None:
            return 0.0
        return crack_width(self.mesh, state.mechanics.strain, state.mechanics.eigenstrain, state.phi,
                           self.model.degradation, self.surface)

    def series_row(self, state: SimulationState, previous: SimulationState = None):
        width = self.crack_width(state)
        inventory = self.transport.inventory(state.species)
        injected = state.injected_iron
        drift = (inventory - injected) / injected if injected > 0 else 0.0
        precipitate = float(np.sum(self.transport.mass * state.species.theta_p))
        concrete_phi = state.phi[self.mesh.concrete_nodes]
        change = 0.0
        if previous is not None:
            change = float(np.min(concrete_phi - previous.phi[self.mesh.concrete_nodes], initial=0.0))
        return {
            'time': state.time,
            'time_days': state.time / SECONDS_PER_DAY,
            'crack_width': width,
            'relative_width': relative_width(width, self.config.output.relative_width_reference),
            'precipitate_volume': precipitate,
            'max_phi': float(concrete_phi.max(initial=0.0)),
            'iron_inventory': inventory,
            'injected_iron': injected,
            'mass_drift': drift,
            'min_phi_change': change,
        }

    def first_damage(self, state: SimulationState):
        """Location of max phi measured from the nearest rebar centre, or None below the onset threshold."""
        masked = np.where(self.mesh.concrete_nodes, state.phi, -np.inf)
        node = int(np.argmax(masked))
        if masked[node] < self.config.output.damage_onset_threshold or not self.mesh.rebars:
            return None
        point = self.mesh.nodes[node]
        distances = [math.hypot(point[0] - x, point[1] - y) - r for x, y, r in self.mesh.rebars]
        nearest = int(np.argmin(distances))
        x, y, r = self.mesh.rebars[nearest]
        return FirstDamage(time=state.time, max_phi=float(masked[node]),
                           radius=math.hypot(point[0] - x, point[1] - y), rebar_radius=r)

    def crack_paths(self, state: SimulationState, threshold=None):
        threshold = OUTPUT['CRACK_PATH_THRESHOLD'] if threshold is None else threshold
        return crack_paths(self.mesh, state.phi, threshold, self.interfaces, self.sides)


class RunWriter:
    """Result files of one run under ``out/<run-id>/``."""

    def __init__(self, simulation: Simulation, directory: Path):
        self.simulation = simulation
        self.directory = Path(directory)
        self.snapshots = self.directory / 'snapshots'
        self.probes = self.directory / 'probes'
        self.locator = None

    def prepare(self):
        for path in (self.directory, self.snapshots, self.probes):
            path.mkdir(parents=True, exist_ok=True)
        write_config(self.simulation.config, self.directory / 'resolved_config.yaml')

    def snapshot(self, index, state: SimulationState):
        config = self.simulation.config
        if config.output.write_vtk:
            write_vtk(self.simulation.mesh, state, self.snapshots / f'snapshot_{index:04d}.vtk')
        self.write_probes(index, state)

    def write_probes(self, index, state: SimulationState):
        mesh = self.simulation.mesh
        output = self.simulation.config.output
        if not mesh.rebars:
            return
        self.locator = self.locator or PointLocator(mesh)
        species = state.species
        comment = f'time_days {state.time / SECONDS_PER_DAY!r}'
        for bar_index, (x, y, r) in enumerate(mesh.rebars):
            radial = {}
            for angle in output.probe_angles:
                for name, field in (('S_p', species.saturation), ('c_II', species.c_ii), ('c_III', species.c_iii)):
                    radial[f'{name}_{angle:g}deg'] = probe_radial(mesh, field, (x, y), angle, r, output.probe_length,
                                                                  output.probe_samples, self.locator)
            write_probe_csv(radial, self.probes / f'radial_bar{bar_index}_{index:04d}.csv', 'r', [comment])
            ring = r + output.circumferential_offset
            circle = {
                'phi': probe_circumferential(mesh, state.phi, (x, y), ring, output.probe_samples, self.locator),
                'S_p': probe_circumferential(mesh, species.saturation, (x, y), ring, output.probe_samples,
                                             self.locator),
            }
            write_probe_csv(circle, self.probes / f'circumferential_bar{bar_index}_{index:04d}.csv', 'deg',
                            [comment, f'radius {ring!r}'])

    def finish(self, output: RunOutput):
        write_csv(output.time_series, self.directory / 'timeseries.csv',
                  comments=[f'run {output.run_id}'])
        write_meta(self.directory / 'meta.txt', output.metadata)
        if output.final_state is not None:
            self.write_final_state(output.final_state)

    def write_final_state(self, state: SimulationState):
        mesh = self.simulation.mesh
        with atomic_output(self.directory / 'final_state.npz') as temp_path:
            with open(temp_path, 'wb') as handle:
                np.savez_compressed(
                    handle,
                    time=state.time, nodes=mesh.nodes, triangles=mesh.triangles, regions=mesh.regions,
                    c_ii=state.species.c_ii, c_iii=state.species.c_iii, theta_p=state.species.theta_p,
                    phi=state.phi, displacement=state.mechanics.displacement,
                    strain=state.mechanics.strain, effective_stress=state.mechanics.effective_stress,
                    eigenstrain=state.mechanics.eigenstrain, history=state.mechanics.history,
                    injected_iron=state.injected_iron,
                )


def _metadata(config, run_id, simulation, output):
    meta = {
        'run_id': run_id,
        'name': config.name,
        'config_hash': config_hash(config),
        'seed': config.seed,
        'rustcrack_version': __version__,
        'python_version': platform.python_version(),
        'numpy_version': np.__version__,
        'scipy_version': scipy.__version__,
        'nodes': simulation.mesh.n_nodes,
        'elements': simulation.mesh.n_elements,
        'steps': output.final_state.step if output.final_state is not None else 0,
        'status': 'completed' if output.abort_reason is None else 'aborted',
    }
    if output.abort_reason:
        meta['abort_reason'] = output.abort_reason
    if output.first_damage is not None:
        damage = output.first_damage
        meta['first_damage_time_days'] = repr(damage.time / SECONDS_PER_DAY)
        meta['first_damage_radius_m'] = repr(damage.radius)
        meta['first_damage_offset_m'] = repr(damage.offset)
    if output.surface_crack_time is not None:
        meta['surface_crack_time_days'] = repr(output.surface_crack_time / SECONDS_PER_DAY)
    return meta


def run(config: SimulationConfig, directory=None, write_outputs=True, mesh=None) -> RunOutput:
    """
    Run a full simulation from the pristine initial state.

    Solver failures that survive the time-step halvings end the run early;
    the reason is kept in ``RunOutput.abort_reason`` and ``meta.txt``.
    """
    simulation = Simulation(config, mesh)
    run_id = config.output.run_id or new_run_id(config.name)
    if directory is None and write_outputs:
        directory = Path(config.output.directory) / run_id if config.output.directory else run_directory(run_id)
    writer = RunWriter(simulation, directory) if write_outputs else None
    if writer is not None:
        writer.prepare()

    timing = config.time
    progress = get_progress_logger()
    state = simulation.initial_state()
    rows = [simulation.series_row(state)]
    snapshot_times = [0.0]
    if writer is not None:
        writer.snapshot(0, state)

    total = timing.total_duration
    next_output = timing.output_interval
    eps = 1e-9 * timing.step_size
    first_damage = None
    surface_crack_time = None
    abort_reason = None

    while state.time < total - eps:
        dt = min(timing.step_size, total - state.time, next_output - state.time)
        try:
            record = simulation.advance(state, dt)
        except SolverError as error:
            ErrorHandler.log_error(error, error_type='error', context={'time_s': state.time})
            abort_reason = str(error)
            break
        previous, state = state, record.state
        row = simulation.series_row(state, previous)
        rows.append(row)
        get_solver_logger().log_step(state.step, state.time, record.dt, {
            'newton_iterations': state.diagnostics.newton_iterations,
            'dt_halvings': record.halvings,
        })
        progress.log_progress(step=state.step, time_days=row['time_days'], dt_days=record.dt / SECONDS_PER_DAY,
                              max_phi=row['max_phi'], crack_width_mm=row['crack_width'] * 1e3,
                              mass_drift=row['mass_drift'])
        if first_damage is None:
            first_damage = simulation.first_damage(state)
        if surface_crack_time is None and simulation.crack_paths(state).surface_cracked:
            surface_crack_time = state.time
            logger.info('Crack reached the top surface', extra={'time_days': state.time / SECONDS_PER_DAY})
        if state.time >= next_output - eps:
            snapshot_times.append(state.time)
            if writer is not None:
                writer.snapshot(len(snapshot_times) - 1, state)
            next_output += timing.output_interval

    output = RunOutput(run_id=run_id, directory=str(directory) if directory is not None else None,
                       time_series=rows, snapshot_times=snapshot_times, final_state=state,
                       first_damage=first_damage, abort_reason=abort_reason,
                       surface_crack_time=surface_crack_time)
    output.metadata = _metadata(config, run_id, simulation, output)
    if writer is not None:
        writer.finish(output)
    logger.info('Run finished', extra={'run_id': run_id, 'status': output.metadata['status'],
                                       'steps': state.step})
    return output
