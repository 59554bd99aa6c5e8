"""
Precipitation eigenstrain, degraded elastic equilibrium and the crack
driving force.

Rust that grows under pore confinement pushes on the matrix as an isotropic
eigenstrain

    eps* = C(theta_p) S_p 1
    C = (1 - nu) K_p / ((1 + nu) K_p + (2 - 4 nu) K) * eps_v
    eps_v = rho_III M_p / ((1 - r_0) rho_p M_III) - 1

with E, nu of the rust-filled concrete from a linear rule of mixtures in
theta_p. The cross-section is in plane strain; the eigenstrain is the full
3D isotropic tensor, so its in-plane stress is 3 K eps* (1, 1, 0).
"""
import logging

import numpy as np

from rustcrack.config.moduli import derive_lame_and_moduli
from rustcrack.fem.assembly import assemble_elasticity, element_strains, plane_strain_matrix, VOLUMETRIC
from rustcrack.fem.kernels import kernel_for
from rustcrack.fem.solver import solve_sparse
from rustcrack.models.mesh import Mesh
from rustcrack.models.state import MechanicalState
from rustcrack.utils.error_handler import GeometryError, SingularityError

logger = logging.getLogger(__name__)


def free_volumetric_strain(rust, iron):
    """Volumetric expansion of unconstrained precipitation (dimensionless)."""
    if rust.porosity >= 1.0:
        raise SingularityError(f'rust porosity {rust.porosity} must be below 1')
    return (iron.density * rust.molar_mass) / ((1.0 - rust.porosity) * rust.density * iron.molar_mass) - 1.0


def rule_of_mixtures(theta_p, concrete, rust):
    """E and nu of rust-filled concrete; theta_p = 0 gives concrete, 1 gives rust."""
    theta_p = np.asarray(theta_p, dtype=float)
    young = (1.0 - theta_p) * concrete.young_modulus + theta_p * rust.young_modulus
    poisson = (1.0 - theta_p) * concrete.poisson_ratio + theta_p * rust.poisson_ratio
    return young, poisson


def eigenstrain_coefficient(theta_p, concrete, rust, iron):
    """C(theta_p) such that eps* = C S_p 1."""
    young, poisson = rule_of_mixtures(theta_p, concrete, rust)
    bulk = young / (3.0 * (1.0 - 2.0 * poisson))
    rust_bulk = derive_lame_and_moduli(rust.young_modulus, rust.poisson_ratio).bulk_modulus
    inclusion = (1.0 - poisson) * rust_bulk / ((1.0 + poisson) * rust_bulk + (2.0 - 4.0 * poisson) * bulk)
    return inclusion * free_volumetric_strain(rust, iron)


def principal_stress(stress):
    """Largest in-plane principal value of Voigt stresses (xx, yy, xy)."""
    stress = np.atleast_2d(np.asarray(stress, dtype=float))
    mid = 0.5 * (stress[:, 0] + stress[:, 1])
    radius = np.hypot(0.5 * (stress[:, 0] - stress[:, 1]), stress[:, 2])
    return mid + radius


def rankine_energy(stress, elongation_modulus):
    """<sigma_1>^2 / (2 E~)."""
    sigma1 = np.maximum(principal_stress(stress), 0.0)
    return sigma1 ** 2 / (2.0 * elongation_modulus)


def damage_threshold(tensile_strength, elongation_modulus):
    """H~ = f_t^2 / (2 E~)."""
    return np.asarray(tensile_strength, dtype=float) ** 2 / (2.0 * elongation_modulus)


def update_driving_force(stress, elongation_modulus, tensile_strength, previous):
    """History update H = max(H_prev, H~, <sigma_1>^2 / (2 E~))."""
    if not elongation_modulus > 0:
        raise ValueError('elongation modulus must be positive')
    candidate = np.maximum(rankine_energy(stress, elongation_modulus),
                           damage_threshold(tensile_strength, elongation_modulus))
    return np.maximum(np.asarray(previous, dtype=float), candidate)


def elastic_energy_density(strain, stress, eigenstrain=None):
    """In-plane elastic energy 1/2 sigma : (eps - eps*)."""
    elastic = np.asarray(strain, dtype=float)
    if eigenstrain is not None:
        elastic = elastic - np.asarray(eigenstrain, dtype=float)[:, None] * VOLUMETRIC
    return 0.5 * np.einsum('ei,ei->e', np.asarray(stress, dtype=float), elastic)


def _edge_nodes(nodes, where, tolerance):
    x, y = nodes[:, 0], nodes[:, 1]
    selectors = {
        'bottom': np.abs(y - y.min()) <= tolerance,
        'top': np.abs(y - y.max()) <= tolerance,
        'left': np.abs(x - x.min()) <= tolerance,
        'right': np.abs(x - x.max()) <= tolerance,
    }
    return np.flatnonzero(selectors[where])


def _corner_node(nodes, where):
    vertical, horizontal = where.split('_')
    target_y = nodes[:, 1].min() if vertical == 'bottom' else nodes[:, 1].max()
    target_x = nodes[:, 0].min() if horizontal == 'left' else nodes[:, 0].max()
    return int(np.argmin(np.hypot(nodes[:, 0] - target_x, nodes[:, 1] - target_y)))


def resolve_constraints(mesh: Mesh, constraints, scale=1.0):
    """
    Map constraint specs to (dofs, values).

    ``scale`` multiplies every prescribed value (used by displacement control).
    """
    nodes = mesh.nodes
    extent = float(np.ptp(nodes, axis=0).max())
    tolerance = 1e-9 * max(extent, 1e-12)
    dofs, values = [], []
    for spec in constraints:
        picked = _edge_nodes(nodes, spec.where, tolerance) if spec.is_edge else np.array([_corner_node(nodes, spec.where)])
        if picked.size == 0:
            raise GeometryError(f'constraint location {spec.where!r} selects no nodes')
        for component in spec.components:
            offset = 0 if component == 'x' else 1
            dofs.append(2 * picked + offset)
            values.append(np.full(picked.size, spec.value * scale))
    return np.concatenate(dofs), np.concatenate(values)


class MechanicsSolver:
    """
    Degraded plane-strain equilibrium on a fixed mesh.

    Concrete and SCI share the concrete moduli; steel is linear elastic,
    undamaged and free of eigenstrain.
    """

    def __init__(self, mesh: Mesh, concrete, steel, rust, iron, bulk_porosity,
                 constraints, residual_stiffness=0.0, kernel=None):
        self.mesh = mesh
        self.concrete = concrete
        self.rust = rust
        self.iron = iron
        self.bulk_porosity = bulk_porosity
        self.constraints = list(constraints)
        self.residual_stiffness = residual_stiffness
        self.kernel = kernel if kernel is not None else kernel_for(mesh)
        self.steel = mesh.steel_elements

        concrete_moduli = derive_lame_and_moduli(concrete.young_modulus, concrete.poisson_ratio)
        steel_moduli = derive_lame_and_moduli(steel.young_modulus, steel.poisson_ratio)
        self.elongation_modulus = concrete_moduli.elongation_modulus
        self.constitutive = np.where(
            self.steel[:, None, None],
            plane_strain_matrix(steel.young_modulus, steel.poisson_ratio),
            plane_strain_matrix(concrete.young_modulus, concrete.poisson_ratio),
        )
        self.bulk_modulus = np.where(self.steel, steel_moduli.bulk_modulus, concrete_moduli.bulk_modulus)
        self.dofs, self.values = resolve_constraints(mesh, self.constraints)

    def eigenstrain(self, theta_p):
        """Isotropic eigenstrain at quadrature points, (n_elements, 3); zero in steel."""
        theta_q = np.clip(self.kernel.at_quadrature(theta_p), 0.0, 1.0)
        saturation = theta_q / self.bulk_porosity
        values = eigenstrain_coefficient(theta_q, self.concrete, self.rust, self.iron) * saturation
        return np.where(self.steel[:, None], 0.0, values)

    def solve(self, degradation, eigenstrain, history, scale=1.0):
        """
        Equilibrium for quadrature degradation g and eigenstrain fields.

        ``scale`` multiplies the prescribed displacements.
        """
        system = assemble_elasticity(self.kernel, self.constitutive, self.bulk_modulus,
                                     degradation=degradation, eigenstrain=eigenstrain,
                                     steel_mask=self.steel, residual_stiffness=self.residual_stiffness)
        values = self.values if scale == 1.0 else resolve_constraints(self.mesh, self.constraints, scale)[1]
        system.constrain(self.dofs, values)
        u = solve_sparse(system).reshape(-1, 2)
        return self.state_from_displacement(u, eigenstrain, history)

    def state_from_displacement(self, u, eigenstrain, history):
        strain = element_strains(self.kernel, u)
        mean_eigen = np.asarray(eigenstrain, dtype=float).mean(axis=1)
        stress = (np.einsum('eij,ej->ei', self.constitutive, strain)
                  - (3.0 * self.bulk_modulus * mean_eigen)[:, None] * VOLUMETRIC)
        return MechanicalState(displacement=u, strain=strain, effective_stress=stress,
                               eigenstrain=mean_eigen, history=np.array(history, dtype=float))

    def reaction_force(self, degradation, state: MechanicalState, dofs):
        """Sum of internal forces on ``dofs`` (N per unit thickness)."""
        system = assemble_elasticity(self.kernel, self.constitutive, self.bulk_modulus,
                                     degradation=degradation, steel_mask=self.steel,
                                     residual_stiffness=self.residual_stiffness)
        internal = system.matrix @ state.displacement.reshape(-1)
        return float(internal[np.asarray(dofs)].sum())


def solve_equilibrium(mesh: Mesh, degradation, eigenstrain, config, constraints=None, history=None):
    """Functional form over a full SimulationConfig; ``eigenstrain`` is at quadrature points."""
    solver = MechanicsSolver(mesh, config.concrete, config.steel, config.rust, config.iron,
                             config.transport.bulk_porosity,
                             constraints if constraints is not None else config.geometry.constraints,
                             residual_stiffness=config.phase_field.residual_stiffness)
    history = np.zeros(mesh.n_elements) if history is None else history
    return solver.solve(degradation, eigenstrain, history)
