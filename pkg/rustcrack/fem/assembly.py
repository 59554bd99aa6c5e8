"""
Vectorized sparse assembly of the P1 operators.

Every routine builds element blocks as numpy arrays of shape
(n_elements, k, k) and scatters them once through a COO triplet list.
"""
import logging

import numpy as np
import scipy.sparse as sp

from rustcrack.fem.kernels import QUADRATURE_POINTS, ElementKernel, edge_lengths
from rustcrack.fem.solver import SparseSystem

logger = logging.getLogger(__name__)


def _scatter(blocks, dofs, size):
    """Sum element blocks into a CSR matrix; duplicates are added."""
    k = dofs.shape[1]
    rows = np.repeat(dofs, k, axis=1).ravel()
    cols = np.tile(dofs, (1, k)).ravel()
    return sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(size, size)).tocsr()


def _scatter_vector(values, dofs, size):
    out = np.zeros(size)
    np.add.at(out, dofs.ravel(), values.ravel())
    return out


def _subset(kernel: ElementKernel, element_mask):
    if element_mask is None:
        return np.arange(kernel.n_elements)
    return np.flatnonzero(np.asarray(element_mask, dtype=bool))


def lumped_mass(kernel: ElementKernel, element_mask=None, weight=None):
    """Row-sum lumped mass: each node receives a third of the adjacent element areas.

    ``weight`` optionally scales each element contribution.
    """
    elements = _subset(kernel, element_mask)
    areas = kernel.areas if weight is None else kernel.areas * np.asarray(weight, dtype=float)
    share = np.repeat(areas[elements, None] / 3.0, 3, axis=1)
    return _scatter_vector(share, kernel.triangles[elements], kernel.n_nodes)


def stiffness_matrix(kernel: ElementKernel, coefficient=None, element_mask=None):
    elements = _subset(kernel, element_mask)
    blocks = kernel.stiffness_blocks(None)[elements]
    if coefficient is not None:
        coefficient = np.asarray(coefficient, dtype=float)
        if coefficient.ndim == 2:
            coefficient = coefficient.mean(axis=1)
        blocks = blocks * coefficient[elements, None, None]
    return _scatter(blocks, kernel.triangles[elements], kernel.n_nodes)


def boundary_flux_load(nodes, edges, flux, n_nodes):
    """Consistent load of a uniform normal influx ``flux`` on boundary edges."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) == 0:
        return np.zeros(n_nodes)
    half = 0.5 * flux * edge_lengths(nodes, edges)
    return _scatter_vector(np.column_stack([half, half]), edges, n_nodes)


def assemble_scalar_diffusion_reaction(kernel: ElementKernel, coefficient, capacity, dt,
                                       previous=None, reaction=None, source=None,
                                       load=None, element_mask=None):
    """
    Backward-Euler system for ``d(theta c)/dt - div(kappa grad c) + r c = s``.

    Parameters
    ----------
    coefficient : (n_elements,) or (n_elements, 3) diffusion coefficient kappa
    capacity : (n_nodes,) capacity theta at the new time level
    dt : time step (s), must be positive
    previous : (n_nodes,) stored amount theta_old * c_old
    reaction : (n_nodes,) implicit first-order sink coefficient r
    source : (n_nodes,) volumetric source rate s (lumped)
    load : (n_nodes,) already integrated boundary load
    element_mask : elements that carry the equation; nodes outside it are
        constrained to zero

    Returns
    -------
    SparseSystem
        ``(M(theta)/dt + K(kappa) + M r) c = M previous/dt + M s + load``
    """
    if not dt > 0:
        raise ValueError(f'time step must be positive, got {dt}')
    n = kernel.n_nodes
    mass = lumped_mass(kernel, element_mask)
    capacity = np.broadcast_to(np.asarray(capacity, dtype=float), (n,))
    if np.any(capacity < 0):
        raise ValueError('capacity must be non-negative')
    diagonal = mass * capacity / dt
    if reaction is not None:
        diagonal = diagonal + mass * np.broadcast_to(np.asarray(reaction, dtype=float), (n,))
    matrix = stiffness_matrix(kernel, coefficient, element_mask) + sp.diags(diagonal, format='csr')

    rhs = np.zeros(n)
    if previous is not None:
        rhs += mass * np.asarray(previous, dtype=float) / dt
    if source is not None:
        rhs += mass * np.asarray(source, dtype=float)
    if load is not None:
        rhs += np.asarray(load, dtype=float)

    system = SparseSystem(matrix=matrix.tocsr(), rhs=rhs)
    inactive = np.flatnonzero(mass <= 0.0)
    if inactive.size:
        system.constrain(inactive, 0.0)
    return system


# ============================================================================
# ELASTICITY
# ============================================================================

def plane_strain_matrix(young_modulus, poisson_ratio):
    """Voigt constitutive matrix (xx, yy, 2xy) for plane strain."""
    lam = young_modulus * poisson_ratio / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio))
    mu = young_modulus / (2.0 * (1.0 + poisson_ratio))
    return np.array([
        [lam + 2.0 * mu, lam, 0.0],
        [lam, lam + 2.0 * mu, 0.0],
        [0.0, 0.0, mu],
    ])


VOLUMETRIC = np.array([1.0, 1.0, 0.0])


def assemble_elasticity(kernel: ElementKernel, constitutive, bulk_modulus, degradation=None,
                        eigenstrain=None, steel_mask=None, residual_stiffness=0.0):
    """
    Degraded plane-strain stiffness and the isotropic eigenstrain load.

    Parameters
    ----------
    constitutive : (n_elements, 3, 3) undegraded plane-strain matrices
    bulk_modulus : (n_elements,) 3D bulk modulus K; the in-plane eigenstress
        of an isotropic eigenstrain e is ``3 K e (1, 1, 0)``
    degradation : (n_elements, 3) g(phi) at quadrature points
    eigenstrain : (n_elements, 3) isotropic eigenstrain magnitude at quadrature points
    steel_mask : elements assembled with g = 1 and no eigenstrain
    residual_stiffness : added to g outside the steel

    Returns
    -------
    SparseSystem
        Unconstrained; callers add the displacement constraints.
    """
    n_el = kernel.n_elements
    if constitutive.shape != (n_el, 3, 3):
        raise ValueError('constitutive array must be (n_elements, 3, 3)')
    g_q = np.ones((n_el, 3)) if degradation is None else np.asarray(degradation, dtype=float)
    e_q = np.zeros((n_el, 3)) if eigenstrain is None else np.asarray(eigenstrain, dtype=float)
    if g_q.shape != (n_el, 3) or e_q.shape != (n_el, 3):
        raise ValueError('degradation and eigenstrain must be (n_elements, 3)')

    g_mean = g_q.mean(axis=1) + residual_stiffness
    weighted_eigen = (g_q * e_q).mean(axis=1)
    if steel_mask is not None:
        steel = np.asarray(steel_mask, dtype=bool)
        g_mean = np.where(steel, 1.0, g_mean)
        weighted_eigen = np.where(steel, 0.0, weighted_eigen)

    B = kernel.strain_operator()
    blocks = np.einsum('eki,ekl,elj->eij', B, constitutive, B)
    blocks *= (kernel.areas * g_mean)[:, None, None]

    eigen_stress = (3.0 * np.asarray(bulk_modulus, dtype=float) * weighted_eigen)[:, None] * VOLUMETRIC
    element_loads = np.einsum('eki,ek->ei', B, eigen_stress) * kernel.areas[:, None]

    dofs = kernel.vector_dofs()
    size = 2 * kernel.n_nodes
    return SparseSystem(matrix=_scatter(blocks, dofs, size),
                        rhs=_scatter_vector(element_loads, dofs, size))


def element_strains(kernel: ElementKernel, displacement):
    """Constant strain (xx, yy, 2xy) per element from nodal displacements (n_nodes, 2)."""
    u = np.asarray(displacement, dtype=float).reshape(-1)
    local = u[kernel.vector_dofs()]
    return np.einsum('eij,ej->ei', kernel.strain_operator(), local)


# ============================================================================
# PHASE FIELD
# ============================================================================

def assemble_phasefield(kernel: ElementKernel, driving_force, model, phi, element_mask=None):
    """
    Residual and consistent tangent of the phase-field equation.

    ``R_i = sum_e [ sum_q w_q (g'(phi_q) H_e + k_a alpha'(phi_q)) N_i(q)
    + k_g A_e grad N_i . grad phi ]``

    ``model`` supplies, for the selected elements, ``degradation_derivatives``,
    ``dissipation_derivatives`` and the per-element ``dissipation_weight`` /
    ``gradient_weight`` arrays. Nodes outside the selected elements are
    constrained, so the returned system gives the Newton correction.
    """
    elements = _subset(kernel, element_mask)
    tri = kernel.triangles[elements]
    phi = np.asarray(phi, dtype=float)
    phi_q = kernel.at_quadrature(phi)[elements]
    H = np.asarray(driving_force, dtype=float)[elements][:, None]

    dg, d2g = model.degradation_derivatives(phi_q, elements)
    da, d2a = model.dissipation_derivatives(phi_q, elements)
    k_a = model.dissipation_weight[elements][:, None]
    k_g = model.gradient_weight[elements]

    stiffness = kernel.stiffness_blocks(None)[elements] * k_g[:, None, None]
    weights = kernel.weights[elements]

    source_q = dg * H + k_a * da
    local_phi = phi[tri]
    element_residual = (weights * source_q) @ QUADRATURE_POINTS + np.einsum('eij,ej->ei', stiffness, local_phi)

    tangent_q = d2g * H + k_a * d2a
    mass_like = np.einsum('eq,qi,qj->eij', weights * tangent_q, QUADRATURE_POINTS, QUADRATURE_POINTS)
    n = kernel.n_nodes
    residual = _scatter_vector(element_residual, tri, n)
    tangent = _scatter(stiffness + mass_like, tri, n)

    system = SparseSystem(matrix=tangent, rhs=-residual)
    covered = np.zeros(n, dtype=bool)
    covered[tri.ravel()] = True
    if not covered.all():
        system.constrain(np.flatnonzero(~covered), 0.0)
    return system

