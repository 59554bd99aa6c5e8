"""
Reactive transport of dissolved iron.

Fe2+ enters the pore solution at the rebar surface (Faraday's law), oxidises
to Fe3+ with the dissolved oxygen, and Fe3+ precipitates as immobile rust
that fills the pores. Rate laws:

    R_II  = -k_II->III c_II c_ox
    R_p   =  k_III->p c_III
    R_III = -R_II - R_p

Each time step is split: a local precipitation update at every node, then
backward-Euler diffusion solves for c_II and for c_III, the latter with the
implicit precipitation sink.
"""
import logging

import numpy as np

from rustcrack.config.constants import CLOGGING_FLOOR, SOLVER
from rustcrack.fem.assembly import assemble_scalar_diffusion_reaction, boundary_flux_load, lumped_mass
from rustcrack.fem.kernels import edge_lengths, kernel_for
from rustcrack.fem.solver import solve_sparse
from rustcrack.models.mesh import BoundaryTag, Mesh
from rustcrack.models.state import SpeciesState
from rustcrack.utils.error_handler import NegativeConcentrationError

logger = logging.getLogger(__name__)


def reaction_rates(c_ii, c_iii, oxygen, rate_ii_to_iii, rate_iii_to_p):
    """Return (R_II, R_III, R_p) in mol m^-3 s^-1; they sum to zero."""
    r_ii = -rate_ii_to_iii * np.asarray(c_ii, dtype=float) * oxygen
    r_p = rate_iii_to_p * np.asarray(c_iii, dtype=float)
    r_iii = -r_ii - r_p
    return r_ii, r_iii, r_p


def faraday_influx(current_density, faraday_constant, electrons_exchanged=2):
    """
    Fe2+ influx J_II = 2 i_a / (z F) in mol m^-2 s^-1.

    The factor two accounts for the experimentally observed doubling of the
    dissolved iron with respect to the charge passed.
    """
    if current_density < 0:
        raise ValueError(f'current density must be non-negative, got {current_density}')
    return 2.0 * current_density / (electrons_exchanged * faraday_constant)


def effective_diffusivity(theta_l, phi, matrix_diffusivity, cracked_diffusivity):
    """Scaled coefficient theta_l (1 - phi) D_m + phi D_c (m^2/s)."""
    theta_l = np.asarray(theta_l, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return theta_l * (1.0 - phi) * matrix_diffusivity + phi * cracked_diffusivity


def precipitation_volume_factor(molar_mass, density):
    """M_p / rho_p: pore volume filled per mole of precipitate."""
    return molar_mass / density


def update_precipitate(theta_p, theta_l, c_iii, dt, molar_mass, density, rate_iii_to_p,
                       porosity, floor=CLOGGING_FLOOR):
    """
    Backward-Euler precipitate growth at fixed c_III.

    Solves theta_p' = theta_p + dt (M_p/rho_p)(p_0 - theta_p') k c_III in
    closed form, clamps to [theta_p, p_0] and freezes nodes whose liquid
    fraction is already at the clogging floor.
    """
    theta_p = np.asarray(theta_p, dtype=float)
    porosity = np.broadcast_to(np.asarray(porosity, dtype=float), theta_p.shape)
    growth = dt * precipitation_volume_factor(molar_mass, density) * rate_iii_to_p * np.asarray(c_iii, dtype=float)
    updated = (theta_p + growth * porosity) / (1.0 + growth)
    updated = np.clip(updated, theta_p, np.maximum(porosity, theta_p))
    clogged = np.asarray(theta_l, dtype=float) <= floor
    return np.where(clogged, theta_p, updated)


def iron_inventory(state: SpeciesState, nodal_mass, molar_mass, density):
    """Total Fe (mol per unit thickness): sum M [theta_l (c_II + c_III) + theta_p rho_p / M_p]."""
    dissolved = state.theta_l * (state.c_ii + state.c_iii)
    solid = state.theta_p / precipitation_volume_factor(molar_mass, density)
    return float(np.sum(nodal_mass * (dissolved + solid)))


def _check_positive(species, values, tolerance):
    scale = max(float(np.max(np.abs(values), initial=0.0)), 1.0)
    lowest = float(np.min(values, initial=0.0))
    if lowest < -tolerance * scale:
        raise NegativeConcentrationError(species, lowest, scale)
    return np.maximum(values, 0.0)


class TransportSolver:
    """
    Advances SpeciesState on a fixed mesh.

    Geometry-dependent pieces (kernel, lumped mass, Faraday load, the matrix
    diffusivity per element) are built once per mesh.
    """

    def __init__(self, mesh: Mesh, transport, rust, kernel=None):
        self.mesh = mesh
        self.params = transport
        self.rust = rust
        self.kernel = kernel if kernel is not None else kernel_for(mesh)
        self.elements = mesh.concrete_elements
        self.mass = lumped_mass(self.kernel, self.elements)
        self.porosity = mesh.nodal_porosity()
        self.active = self.mass > 0.0
        self.influx = faraday_influx(transport.current_density, transport.faraday_constant,
                                     transport.electrons_exchanged)
        self.rebar_length = float(edge_lengths(mesh.nodes, mesh.edges(BoundaryTag.REBAR_SURFACE)).sum())
        self.flux_load = boundary_flux_load(mesh.nodes, mesh.edges(BoundaryTag.REBAR_SURFACE),
                                            self.influx, mesh.n_nodes)
        reference = mesh.porosity if transport.diffusivity_reference == 'local' else transport.bulk_porosity
        reference = np.broadcast_to(np.asarray(reference, dtype=float), (mesh.n_elements,))
        safe = np.where(reference > 0, reference, 1.0)
        # D_m per element from the configured products theta_l D_m
        self.matrix_diffusivity_ii = np.where(self.elements, transport.diffusivity_ii / safe, 0.0)
        self.matrix_diffusivity_iii = np.where(self.elements, transport.diffusivity_iii / safe, 0.0)

    def initial_state(self):
        return SpeciesState.initial(self.porosity, self.params.bulk_porosity)

    def inventory(self, state: SpeciesState):
        return iron_inventory(state, self.mass, self.rust.molar_mass, self.rust.density)

    def injected_per_second(self):
        """Fe2+ injection rate per unit thickness, mol/s."""
        return self.influx * self.rebar_length

    def _coefficient(self, theta_l, phi, matrix_diffusivity, cracked_diffusivity):
        theta_q = self.kernel.at_quadrature(theta_l)
        theta_q = np.where(theta_q <= CLOGGING_FLOOR, 0.0, theta_q)
        phi_q = np.clip(self.kernel.at_quadrature(phi), 0.0, 1.0)
        return effective_diffusivity(theta_q, phi_q, matrix_diffusivity[:, None], cracked_diffusivity)

    def _solve_species(self, state: SpeciesState, theta_l, phi, dt):
        """c_II then c_III at the end-of-step liquid fraction ``theta_l``."""
        p = self.params
        tolerance = SOLVER['NEGATIVE_CONCENTRATION_TOLERANCE']
        capacity = np.where(self.active, np.maximum(theta_l, CLOGGING_FLOOR), 0.0)
        oxidation = p.rate_ii_to_iii * p.oxygen_concentration

        system = assemble_scalar_diffusion_reaction(
            self.kernel,
            self._coefficient(theta_l, phi, self.matrix_diffusivity_ii, p.cracked_diffusivity_ii),
            capacity, dt,
            previous=state.theta_l * state.c_ii,
            reaction=capacity * oxidation,
            load=self.flux_load,
            element_mask=self.elements,
        )
        c_ii = _check_positive('c_II', solve_sparse(system), tolerance)

        # Fe3+ -> rust sink; clogged nodes stop precipitating
        sink = np.where(self.active & (state.theta_l > CLOGGING_FLOOR), p.rate_iii_to_p * theta_l, 0.0)
        system = assemble_scalar_diffusion_reaction(
            self.kernel,
            self._coefficient(theta_l, phi, self.matrix_diffusivity_iii, p.cracked_diffusivity_iii),
            capacity, dt,
            previous=state.theta_l * state.c_iii,
            reaction=sink,
            source=capacity * oxidation * c_ii,
            element_mask=self.elements,
        )
        c_iii = _check_positive('c_III', solve_sparse(system), tolerance)
        return c_ii, c_iii

    def _precipitate(self, state: SpeciesState, c_iii, dt):
        return update_precipitate(state.theta_p, state.theta_l, c_iii, dt, self.rust.molar_mass,
                                  self.rust.density, self.params.rate_iii_to_p, state.porosity)

    def step(self, state: SpeciesState, phi, dt):
        """
        One split transport step; raises NegativeConcentrationError if dt is too large.

        theta_p is first predicted from the old c_III. The c_II and c_III solves
        and the precipitate update are then repeated until theta_p settles, so
        the moles removed by the implicit c_III sink are exactly the moles
        added to the rust.
        """
        if not dt > 0:
            raise ValueError(f'time step must be positive, got {dt}')
        theta_p = self._precipitate(state, state.c_iii, dt)
        change = 0.0
        for iteration in range(1, SOLVER['PRECIPITATION_MAX_ITERATIONS'] + 1):
            theta_l = np.maximum(state.porosity - theta_p, 0.0)
            c_ii, c_iii = self._solve_species(state, theta_l, phi, dt)
            updated = self._precipitate(state, c_iii, dt)
            change = float(np.max(np.abs(updated - theta_p), initial=0.0))
            theta_p = updated
            if change <= SOLVER['PRECIPITATION_TOLERANCE']:
                break
        else:
            logger.debug('Precipitate update did not settle', extra={'iterations': iteration, 'change': change})
        return state.evolve(c_ii=c_ii, c_iii=c_iii, theta_p=theta_p)


def step_transport(state: SpeciesState, mesh: Mesh, phi, dt, transport, rust):
    """Functional form of :meth:`TransportSolver.step` for one-off use."""
    return TransportSolver(mesh, transport, rust).step(state, phi, dt)
