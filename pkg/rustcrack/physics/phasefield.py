"""
Phase-field fracture: PF-CZM calibration and degradation, the AT2 and
stress-based comparison variants, and the projected Newton solver.

Every variant solves, on the concrete nodes only,

    g'(phi) H + k_a alpha'(phi) - k_g lap(phi) = 0,   phi_prev <= phi <= 1

with natural boundary conditions. Per variant:

    PF-CZM        g = (1-phi)^p / ((1-phi)^p + a1 phi (1 + a2 phi + a3 phi^2))
                  alpha = 2 phi - phi^2, k_a = G_f/(pi l), k_g = 2 l G_f / pi
                  H = max(H_prev, f_t^2/(2E~), <sigma_1>^2/(2E~))
    AT2           g = (1-phi)^2, alpha = phi^2, k_a = G_f/(2 l), k_g = G_f l
                  H = max(H_prev, psi)
    stress-based  g = (1-phi)^2, alpha = phi^2, k_a = 1, k_g = 2 l^2
                  H = max(H_prev, xi <(sigma_1/f_t)^2 - 1>)
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from rustcrack.config.constants import CORNELISSEN, LINEAR_SOFTENING, SOLVER
from rustcrack.fem.assembly import assemble_phasefield, lumped_mass
from rustcrack.fem.kernels import kernel_for
from rustcrack.fem.solver import solve_sparse
from rustcrack.models.mesh import Mesh
from rustcrack.models.params import ModelVariant, SofteningLaw
from rustcrack.physics.mechanics import damage_threshold, elastic_energy_density, principal_stress, update_driving_force
from rustcrack.utils.error_handler import ConvergenceError, UnsupportedVariantError
from rustcrack.utils.logger import get_solver_logger

logger = logging.getLogger(__name__)

SOFTENING_SHAPES = {
    SofteningLaw.CORNELISSEN: CORNELISSEN,
    SofteningLaw.LINEAR: LINEAR_SOFTENING,
}


@dataclass(frozen=True, eq=False)
class SofteningCalibration:
    """
    Parameters of the rational degradation function.

    ``a1``, ``irwin_length``, ``critical_opening`` and ``initial_slope`` are
    arrays when strength or toughness vary per element.
    """
    p: float
    a1: np.ndarray
    a2: float
    a3: float
    beta_w: float
    beta_k: float
    irwin_length: np.ndarray
    critical_opening: np.ndarray
    initial_slope: np.ndarray
    length_scale: float


def calibrate_cornelissen(tensile_strength, fracture_energy, elongation_modulus, length_scale,
                          law=SofteningLaw.CORNELISSEN, domain_size=None):
    """
    Calibrate g(phi) so the regularised crack reproduces the softening law.

    Raises ValueError on non-positive inputs. Logs a warning when the length
    scale is too large for length-insensitive behaviour.
    """
    f_t = np.asarray(tensile_strength, dtype=float)
    g_f = np.asarray(fracture_energy, dtype=float)
    for name, value in (('tensile_strength', f_t), ('fracture_energy', g_f),
                        ('elongation_modulus', elongation_modulus), ('length_scale', length_scale)):
        if not np.all(np.asarray(value) > 0):
            raise ValueError(f'{name} must be positive')

    shape = SOFTENING_SHAPES[SofteningLaw(law)]
    p = shape['P']
    beta_k = 2.0 * shape['INITIAL_SLOPE_FACTOR']
    beta_w = shape['CRITICAL_OPENING_FACTOR'] / 2.0
    a2 = 2.0 * beta_k ** (2.0 / 3.0) - (p + 0.5)
    # p = 2 branch
    a3 = beta_w ** 2 / 2.0 - a2 - 1.0
    irwin = elongation_modulus * g_f / f_t ** 2
    a1 = 4.0 / math.pi * irwin / length_scale

    limit = 8.0 * float(np.min(irwin)) / (3.0 * math.pi)
    if domain_size is not None:
        limit = min(limit, domain_size / 50.0)
    if length_scale > limit:
        logger.warning('Length scale exceeds the admissible bound',
                       extra={'length_scale': length_scale, 'bound': limit})

    return SofteningCalibration(
        p=p, a1=a1, a2=a2, a3=a3, beta_w=beta_w, beta_k=beta_k,
        irwin_length=irwin,
        critical_opening=shape['CRITICAL_OPENING_FACTOR'] * g_f / f_t,
        initial_slope=-shape['INITIAL_SLOPE_FACTOR'] * f_t ** 2 / g_f,
        length_scale=length_scale,
    )


def _rational_parts(phi, a1, a2, a3, p):
    phi = np.asarray(phi, dtype=float)
    one_minus = 1.0 - phi
    P = one_minus ** p
    dP = -p * one_minus ** (p - 1)
    d2P = p * (p - 1) * one_minus ** (p - 2)
    Q = a1 * (phi + a2 * phi ** 2 + a3 * phi ** 3)
    dQ = a1 * (1.0 + 2.0 * a2 * phi + 3.0 * a3 * phi ** 2)
    d2Q = a1 * (2.0 * a2 + 6.0 * a3 * phi)
    return P, dP, d2P, Q, dQ, d2Q


def degradation(phi, cal: SofteningCalibration):
    """Return (g, dg/dphi) of the rational degradation function."""
    P, dP, _, Q, dQ, _ = _rational_parts(phi, cal.a1, cal.a2, cal.a3, cal.p)
    S = P + Q
    return P / S, (dP * Q - P * dQ) / S ** 2


def degradation_second(phi, cal: SofteningCalibration):
    P, dP, d2P, Q, dQ, d2Q = _rational_parts(phi, cal.a1, cal.a2, cal.a3, cal.p)
    S = P + Q
    first = dP * Q - P * dQ
    return ((d2P * Q - P * d2Q) * S - 2.0 * first * (dP + dQ)) / S ** 3


def dissipation(phi):
    """Geometric crack function alpha = 2 phi - phi^2 and its derivative."""
    phi = np.asarray(phi, dtype=float)
    return 2.0 * phi - phi ** 2, 2.0 - 2.0 * phi


def at2_length_from_strength(tensile_strength, young_modulus, fracture_energy):
    """Length scale giving peak stress f_t = 9/16 sqrt(E G_f / (3 l))."""
    return (81.0 / 256.0) * young_modulus * fracture_energy / (3.0 * tensile_strength ** 2)


def at2_strength_from_length(length_scale, young_modulus, fracture_energy):
    return (9.0 / 16.0) * math.sqrt(young_modulus * fracture_energy / (3.0 * length_scale))


# ============================================================================
# DAMAGE MODELS
# ============================================================================

class DamageModel:
    """
    Shared interface of the phase-field variants.

    Arrays are per element; ``elements`` selects the rows used by a caller.
    """
    variant = None

    def __init__(self, tensile_strength, fracture_energy, length_scale):
        self.tensile_strength = np.asarray(tensile_strength, dtype=float)
        self.fracture_energy = np.asarray(fracture_energy, dtype=float)
        self.length_scale = float(length_scale)
        self.dissipation_weight = np.zeros_like(self.fracture_energy)
        self.gradient_weight = np.zeros_like(self.fracture_energy)

    def _rows(self, values, elements):
        return values if elements is None else values[elements]

    def degradation(self, phi_q, elements=None):
        phi_q = np.clip(phi_q, 0.0, 1.0)
        return (1.0 - phi_q) ** 2

    def degradation_derivatives(self, phi_q, elements=None):
        return -2.0 * (1.0 - phi_q), np.full_like(phi_q, 2.0)

    def dissipation_derivatives(self, phi_q, elements=None):
        return 2.0 * phi_q, np.full_like(phi_q, 2.0)

    def initial_history(self):
        return np.zeros_like(self.tensile_strength)

    def driving_force(self, mechanics, previous):
        raise NotImplementedError

    def local_residual(self, phi, driving_force, elements=None):
        """Pointwise g'(phi) H + k_a alpha'(phi) (no gradient term)."""
        phi = np.atleast_2d(np.asarray(phi, dtype=float))
        dg, _ = self.degradation_derivatives(phi, elements)
        da, _ = self.dissipation_derivatives(phi, elements)
        H = np.asarray(driving_force, dtype=float).reshape(-1, 1)
        k_a = self._rows(self.dissipation_weight, elements)[:, None]
        return dg * H + k_a * da


class CohesiveModel(DamageModel):
    """PF-CZM with a per-element Cornelissen (or linear) calibration."""
    variant = ModelVariant.PFCZM

    def __init__(self, tensile_strength, fracture_energy, length_scale, elongation_modulus,
                 law=SofteningLaw.CORNELISSEN, domain_size=None):
        super().__init__(tensile_strength, fracture_energy, length_scale)
        self.elongation_modulus = float(elongation_modulus)
        self.calibration = calibrate_cornelissen(self.tensile_strength, self.fracture_energy,
                                                 elongation_modulus, length_scale, law, domain_size)
        self.dissipation_weight = self.fracture_energy / (math.pi * length_scale)
        self.gradient_weight = 2.0 * length_scale * self.fracture_energy / math.pi

    def _a1(self, elements, ndim):
        a1 = self._rows(np.broadcast_to(self.calibration.a1, self.tensile_strength.shape), elements)
        return a1.reshape(a1.shape + (1,) * (ndim - 1))

    def degradation(self, phi_q, elements=None):
        phi_q = np.clip(phi_q, 0.0, 1.0)
        cal = self.calibration
        P, _, _, Q, _, _ = _rational_parts(phi_q, self._a1(elements, phi_q.ndim), cal.a2, cal.a3, cal.p)
        return P / (P + Q)

    def degradation_derivatives(self, phi_q, elements=None):
        cal = self.calibration
        P, dP, d2P, Q, dQ, d2Q = _rational_parts(phi_q, self._a1(elements, phi_q.ndim), cal.a2, cal.a3, cal.p)
        S = P + Q
        first = dP * Q - P * dQ
        second = ((d2P * Q - P * d2Q) * S - 2.0 * first * (dP + dQ)) / S ** 3
        return first / S ** 2, second

    def dissipation_derivatives(self, phi_q, elements=None):
        return 2.0 - 2.0 * phi_q, np.full_like(phi_q, -2.0)

    def initial_history(self):
        return damage_threshold(self.tensile_strength, self.elongation_modulus)

    def driving_force(self, mechanics, previous):
        return update_driving_force(mechanics.effective_stress, self.elongation_modulus,
                                    self.tensile_strength, previous)


class AT2Model(DamageModel):
    variant = ModelVariant.AT2

    def __init__(self, tensile_strength, fracture_energy, length_scale):
        super().__init__(tensile_strength, fracture_energy, length_scale)
        self.dissipation_weight = self.fracture_energy / (2.0 * length_scale)
        self.gradient_weight = self.fracture_energy * length_scale

    def driving_force(self, mechanics, previous):
        energy = elastic_energy_density(mechanics.strain, mechanics.effective_stress, mechanics.eigenstrain)
        return np.maximum(np.asarray(previous, dtype=float), np.maximum(energy, 0.0))


class StressBasedModel(DamageModel):
    variant = ModelVariant.STRESS_BASED

    def __init__(self, tensile_strength, fracture_energy, length_scale, xi=1.0):
        super().__init__(tensile_strength, fracture_energy, length_scale)
        if not xi > 0:
            raise ValueError('xi must be positive')
        self.xi = float(xi)
        self.dissipation_weight = np.ones_like(self.fracture_energy)
        self.gradient_weight = np.full_like(self.fracture_energy, 2.0 * length_scale ** 2)

    def driving_force(self, mechanics, previous):
        ratio = principal_stress(mechanics.effective_stress) / self.tensile_strength
        crest = self.xi * np.maximum(np.where(ratio > 0, ratio, 0.0) ** 2 - 1.0, 0.0)
        return np.maximum(np.asarray(previous, dtype=float), crest)


def build_damage_model(variant, tensile_strength, fracture_energy, phase_field, elongation_modulus,
                       young_modulus=None, domain_size=None):
    """
    Instantiate the model for ``variant``.

    For AT2 the length scale is ``phase_field.at2_length`` when set, otherwise
    it follows from the minimum strength through the peak-stress relation.
    """
    try:
        variant = ModelVariant.parse(variant)
    except ValueError as exc:
        raise UnsupportedVariantError(f'unsupported phase-field variant {variant!r}') from exc
    if variant == ModelVariant.PFCZM:
        return CohesiveModel(tensile_strength, fracture_energy, phase_field.length_scale,
                             elongation_modulus, phase_field.softening_law, domain_size)
    if variant == ModelVariant.AT2:
        length = phase_field.at2_length
        if length is None:
            length = at2_length_from_strength(float(np.min(tensile_strength)),
                                              young_modulus or elongation_modulus,
                                              float(np.min(fracture_energy)))
        return AT2Model(tensile_strength, fracture_energy, length)
    return StressBasedModel(tensile_strength, fracture_energy, phase_field.length_scale,
                            phase_field.stress_based_xi)


def variant_residual(variant, phi, driving_force, tensile_strength, fracture_energy, phase_field,
                     elongation_modulus, young_modulus=None):
    """Pointwise residual g'(phi) H + k_a alpha'(phi) of a variant."""
    model = build_damage_model(variant, np.atleast_1d(tensile_strength), np.atleast_1d(fracture_energy),
                               phase_field, elongation_modulus, young_modulus)
    return model.local_residual(phi, driving_force)


def element_strengths(mesh: Mesh, concrete, seed=0, weak_factor=None, weaken='tensile_strength'):
    """
    Per-element (f_t, G_f).

    A non-zero ``concrete.heterogeneity`` perturbs both uniformly by that
    relative amplitude with a seeded generator; ``weak_factor`` scales the
    chosen property inside the mesh weak zone.
    """
    n = mesh.n_elements
    f_t = np.full(n, concrete.tensile_strength)
    g_f = np.full(n, concrete.fracture_energy)
    if concrete.heterogeneity > 0:
        rng = np.random.default_rng(seed)
        f_t = f_t * (1.0 + concrete.heterogeneity * rng.uniform(-1.0, 1.0, n))
        g_f = g_f * (1.0 + concrete.heterogeneity * rng.uniform(-1.0, 1.0, n))
    if weak_factor is not None and mesh.weak_zone.any():
        if weaken == 'tensile_strength':
            f_t = np.where(mesh.weak_zone, f_t * weak_factor, f_t)
        else:
            g_f = np.where(mesh.weak_zone, g_f * weak_factor, g_f)
    return f_t, g_f


# ============================================================================
# SOLVER
# ============================================================================

class PhaseFieldSolver:
    """Projected Newton with backtracking for phi on the concrete elements."""

    def __init__(self, mesh: Mesh, model: DamageModel, kernel=None, tolerance=None, max_iterations=None):
        self.mesh = mesh
        self.model = model
        self.kernel = kernel if kernel is not None else kernel_for(mesh)
        self.elements = mesh.concrete_elements
        self.active = mesh.concrete_nodes
        self.tolerance = SOLVER['NEWTON_RELATIVE_RESIDUAL'] if tolerance is None else tolerance
        self.max_iterations = SOLVER['NEWTON_MAX_ITERATIONS'] if max_iterations is None else max_iterations
        self.reference = float(np.linalg.norm(lumped_mass(self.kernel, self.elements, model.dissipation_weight)))

    def _blocked(self, phi, lower, residual):
        at_lower = phi <= lower + 1e-14
        at_upper = phi >= 1.0 - 1e-14
        return (at_lower & (residual > 0)) | (at_upper & (residual < 0)) | ~self.active

    def _merit(self, phi, lower, driving_force):
        system = assemble_phasefield(self.kernel, driving_force, self.model, phi, self.elements)
        residual = -system.rhs
        blocked = self._blocked(phi, lower, residual)
        return float(np.linalg.norm(np.where(blocked, 0.0, residual))), system, residual, blocked

    def solve(self, driving_force, phi_previous, phi_guess=None):
        """
        Return (phi, iterations, relative residual).

        Raises ConvergenceError after ``max_iterations`` without meeting the
        tolerance; callers usually react by shrinking the time step.
        """
        lower = np.where(self.active, np.clip(phi_previous, 0.0, 1.0), 0.0)
        start = lower if phi_guess is None else phi_guess
        phi = np.where(self.active, np.clip(start, lower, 1.0), 0.0)
        merit, system, residual, blocked = self._merit(phi, lower, driving_force)
        reference = max(self.reference, merit) if merit > 0 else self.reference

        iterations = 0
        while merit > self.tolerance * reference:
            if iterations >= self.max_iterations:
                raise ConvergenceError('phase-field Newton did not converge; reduce the time step',
                                       iterations=iterations, residual=merit / reference)
            iterations += 1
            system.constrain(np.flatnonzero(blocked), 0.0)
            delta = solve_sparse(system)
            step = 1.0
            for _ in range(SOLVER['NEWTON_MAX_BACKTRACKS']):
                trial = np.where(self.active, np.clip(phi + step * delta, lower, 1.0), 0.0)
                trial_merit, trial_system, trial_residual, trial_blocked = self._merit(trial, lower, driving_force)
                if trial_merit <= (1.0 - 1e-4 * step) * merit:
                    break
                step *= 0.5
            phi, merit, system, residual, blocked = trial, trial_merit, trial_system, trial_residual, trial_blocked

        relative = merit / reference
        get_solver_logger().log_newton_solve(iterations, relative, int(self.active.sum()))
        return phi, iterations, relative


def solve_phase_field(mesh: Mesh, driving_force, phi_previous, model: DamageModel, phi_guess=None):
    """Functional form of :meth:`PhaseFieldSolver.solve`; returns phi only."""
    phi, _, _ = PhaseFieldSolver(mesh, model).solve(driving_force, phi_previous, phi_guess)
    return phi
