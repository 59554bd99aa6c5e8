"""
Displacement-controlled tension bar for comparing the phase-field variants.

The bar is clamped in x on the left edge, pulled in x on the right edge and
pinned in y at the bottom-left corner. A mid-length band is weakened so the
crack localizes there: f_t is reduced for PF-CZM and the stress-based model,
G_f for AT2 (whose strength only enters through the length scale).

AT2 takes its length scale from the uniaxial plane-strain modulus
E / (1 - nu^2), the stiffness the bar shows under free lateral contraction,
and runs on a longer bar unless a length is given.

Stress is the right-edge reaction divided by the bar height; the curve is
normalized by the weakest strength f_t,min and by the strain f_t,min / E.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from rustcrack.config.constants import BAR_BENCHMARK, TRANSPORT
from rustcrack.fem.kernels import kernel_for
from rustcrack.meshing.generate import generate_bar_mesh
from rustcrack.models.params import (
    ConcreteParams, ConstraintSpec, IronParams, ModelVariant, PhaseFieldParams, RustParams, SteelParams,
)
from rustcrack.physics.mechanics import MechanicsSolver
from rustcrack.physics.phasefield import PhaseFieldSolver, at2_strength_from_length, build_damage_model, element_strengths
from rustcrack.post.writers import write_csv

logger = logging.getLogger(__name__)

BAR_COLUMNS = (
    ('increment', '-'),
    ('displacement', 'm'),
    ('strain', '-'),
    ('stress', 'Pa'),
    ('normalized_strain', '-'),
    ('normalized_stress', '-'),
    ('max_phi', '-'),
    ('staggered_passes', '-'),
)

BAR_CONSTRAINTS = (
    ConstraintSpec(where='left', components='x'),
    ConstraintSpec(where='right', components='x', value=1.0),
    ConstraintSpec(where='bottom_left', components='y'),
)


@dataclass
class BarResult:
    variant: ModelVariant
    strength: float
    length_scale: float
    rows: List[dict] = field(default_factory=list)

    @property
    def normalized_stress(self):
        return np.array([row['normalized_stress'] for row in self.rows])

    @property
    def peak_index(self):
        return int(np.argmax(self.normalized_stress))

    @property
    def peak_normalized_stress(self):
        return float(self.normalized_stress.max(initial=0.0))


class BarBenchmark:
    """One variant of the tension bar on its own mesh and solvers."""

    def __init__(self, variant, concrete: ConcreteParams = None, phase_field: PhaseFieldParams = None,
                 length=None, height=None, element_size=None, at2_length=None,
                 reduction=None, seed=0):
        self.variant = ModelVariant.parse(variant)
        self.concrete = concrete or ConcreteParams.model_validate({})
        phase_field = phase_field or PhaseFieldParams()
        if at2_length is not None:
            phase_field = phase_field.model_copy(update={'at2_length': at2_length})
        self.phase_field = phase_field
        if length is None:
            length = BAR_BENCHMARK['at2_bar_length' if self.variant == ModelVariant.AT2 else 'length']
        self.length = length
        self.height = BAR_BENCHMARK['height'] if height is None else height
        reduction = BAR_BENCHMARK['strength_reduction'] if reduction is None else reduction

        self.mesh = generate_bar_mesh(self.length, self.height,
                                      BAR_BENCHMARK['element_size'] if element_size is None else element_size)
        self.kernel = kernel_for(self.mesh)
        self.mechanics = MechanicsSolver(
            self.mesh, self.concrete, SteelParams(), RustParams(), IronParams(),
            TRANSPORT['bulk_porosity'], BAR_CONSTRAINTS,
            residual_stiffness=phase_field.residual_stiffness, kernel=self.kernel,
        )
        weaken = 'fracture_energy' if self.variant == ModelVariant.AT2 else 'tensile_strength'
        tensile_strength, fracture_energy = element_strengths(self.mesh, self.concrete, seed,
                                                              weak_factor=reduction, weaken=weaken)
        self.uniaxial_modulus = self.concrete.young_modulus / (1.0 - self.concrete.poisson_ratio ** 2)
        self.model = build_damage_model(self.variant, tensile_strength, fracture_energy, phase_field,
                                        self.mechanics.elongation_modulus, self.uniaxial_modulus,
                                        domain_size=self.length)
        self.phase_field_solver = PhaseFieldSolver(self.mesh, self.model, self.kernel)

        if self.variant == ModelVariant.AT2:
            self.strength = at2_strength_from_length(self.model.length_scale, self.uniaxial_modulus,
                                                     float(np.min(fracture_energy)))
        else:
            self.strength = float(np.min(tensile_strength))
        self.right_dofs = 2 * np.flatnonzero(
            np.abs(self.mesh.nodes[:, 0] - self.mesh.nodes[:, 0].max()) <= 1e-9 * self.length)
        self.eigenstrain = np.zeros((self.mesh.n_elements, 3))

    def degradation(self, phi):
        return self.model.degradation(self.kernel.at_quadrature(phi))

    def _increment(self, displacement, phi, history, tolerance, max_passes):
        """Staggered passes at fixed load until phi settles; returns (mechanics, phi, history, passes)."""
        guess = phi
        passes = 0
        for passes in range(1, max_passes + 1):
            mechanics = self.mechanics.solve(self.degradation(guess), self.eigenstrain, history, scale=displacement)
            driving = self.model.driving_force(mechanics, history)
            updated, _, _ = self.phase_field_solver.solve(driving, phi, phi_guess=guess)
            change = float(np.max(np.abs(updated - guess), initial=0.0))
            guess = updated
            if change <= tolerance:
                break
        else:
            logger.warning('Bar increment stopped before phi settled',
                           extra={'displacement_m': displacement, 'change': change, 'passes': passes})
        mechanics = self.mechanics.solve(self.degradation(guess), self.eigenstrain, history, scale=displacement)
        return mechanics.evolve(history=driving), guess, driving, passes

    def run(self, increments=None, max_normalized_strain=None, tolerance=None, max_passes=None) -> BarResult:
        increments = BAR_BENCHMARK['increments'] if increments is None else int(increments)
        max_normalized_strain = (BAR_BENCHMARK['max_normalized_strain']
                                 if max_normalized_strain is None else max_normalized_strain)
        tolerance = 1e-4 if tolerance is None else tolerance
        max_passes = BAR_BENCHMARK['staggered_passes'] if max_passes is None else max_passes
        if increments < 1:
            raise ValueError('the bar needs at least one load increment')

        reference_strain = self.strength / self.concrete.young_modulus
        final = max_normalized_strain * reference_strain * self.length
        phi = np.zeros(self.mesh.n_nodes)
        history = self.model.initial_history() * np.ones(self.mesh.n_elements)
        result = BarResult(self.variant, self.strength, self.model.length_scale)
        logger.info('Bar benchmark started', extra={
            'variant': self.variant.value, 'strength_pa': self.strength,
            'length_scale_m': self.model.length_scale, 'increments': increments,
        })

        for k in range(1, increments + 1):
            displacement = final * k / increments
            mechanics, phi, history, passes = self._increment(displacement, phi, history, tolerance, max_passes)
            reaction = self.mechanics.reaction_force(self.degradation(phi), mechanics, self.right_dofs)
            stress = reaction / self.height
            strain = displacement / self.length
            result.rows.append({
                'increment': k,
                'displacement': displacement,
                'strain': strain,
                'stress': stress,
                'normalized_strain': strain / reference_strain,
                'normalized_stress': stress / self.strength,
                'max_phi': float(phi.max()),
                'staggered_passes': passes,
            })

        logger.info('Bar benchmark finished', extra={
            'variant': self.variant.value, 'peak_normalized_stress': result.peak_normalized_stress,
        })
        return result


def write_bar_curve(result: BarResult, directory) -> Path:
    columns = [name for name, _ in BAR_COLUMNS]
    path = Path(directory) / f'bar_{result.variant.value}.csv'
    comments = [
        f'variant: {result.variant.value}',
        f'f_t_min [Pa]: {result.strength!r}',
        f'length_scale [m]: {result.length_scale!r}',
    ]
    return write_csv(result.rows, path, columns=columns, units=dict(BAR_COLUMNS), comments=comments)


def run_bar_benchmark(variant, concrete=None, phase_field=None, directory: Optional[Path] = None,
                      increments=None, max_normalized_strain=None, **geometry) -> BarResult:
    """Run the bar for one variant and optionally write ``bar_<variant>.csv``."""
    benchmark = BarBenchmark(variant, concrete, phase_field, **geometry)
    result = benchmark.run(increments, max_normalized_strain)
    if directory is not None:
        Path(directory).mkdir(parents=True, exist_ok=True)
        write_bar_curve(result, directory)
    return result
