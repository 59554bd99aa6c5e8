import unittest

import numpy as np
import scipy.sparse as sp

from rustcrack.fem.assembly import (
    assemble_elasticity,
    assemble_phasefield,
    assemble_scalar_diffusion_reaction,
    boundary_flux_load,
    element_strains,
    lumped_mass,
    plane_strain_matrix,
    stiffness_matrix,
)
from rustcrack.fem.kernels import build_kernel, kernel_for
from rustcrack.fem.solver import SparseSystem, solve_sparse
from rustcrack.meshing.generate import generate_rectangle_mesh
from rustcrack.physics.mechanics import damage_threshold
from rustcrack.physics.phasefield import CohesiveModel
from rustcrack.utils.error_handler import SolverError

UNIT_TRIANGLE = (np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))


class KernelTests(unittest.TestCase):
    def test_unit_triangle_laplacian(self):
        kernel = build_kernel(*UNIT_TRIANGLE)
        expected = 0.5 * np.array([[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
        np.testing.assert_allclose(kernel.stiffness_blocks()[0], expected, atol=1e-14)
        self.assertAlmostEqual(kernel.areas[0], 0.5)
        np.testing.assert_allclose(kernel.weights.sum(axis=1), kernel.areas)

    def test_quadrature_reproduces_linear_fields(self):
        mesh = generate_rectangle_mesh(1.0, 1.0, 3, 3)
        kernel = kernel_for(mesh)
        field = 2.0 + 3.0 * mesh.nodes[:, 0] - mesh.nodes[:, 1]
        integral = float(np.sum(kernel.weights * kernel.at_quadrature(field)))
        self.assertAlmostEqual(integral, 2.0 + 1.5 - 0.5, places=12)

    def test_lumped_mass_splits_areas(self):
        mesh = generate_rectangle_mesh(2.0, 1.0, 4, 2)
        mass = lumped_mass(kernel_for(mesh))
        self.assertAlmostEqual(float(mass.sum()), 2.0, places=12)
        self.assertTrue(np.all(mass > 0))


class ScalarAssemblyTests(unittest.TestCase):
    def setUp(self):
        self.mesh = generate_rectangle_mesh(1.0, 1.0, 4, 4)
        self.kernel = kernel_for(self.mesh)

    def test_laplacian_rows_sum_to_zero_and_matrix_is_symmetric(self):
        matrix = stiffness_matrix(self.kernel, coefficient=np.full(self.kernel.n_elements, 3.0))
        np.testing.assert_allclose(np.asarray(matrix.sum(axis=1)).ravel(), 0.0, atol=1e-12)
        self.assertAlmostEqual(abs(matrix - matrix.T).max(), 0.0, places=14)

    def test_uniform_field_is_stationary(self):
        previous = np.full(self.mesh.n_nodes, 0.3 * 2.0)
        system = assemble_scalar_diffusion_reaction(self.kernel, np.ones(self.kernel.n_elements),
                                                    capacity=0.3, dt=10.0, previous=previous)
        np.testing.assert_allclose(solve_sparse(system), 2.0, rtol=1e-12)

    def test_boundary_influx_is_integrated_exactly(self):
        edges = self.mesh.boundary_edges
        load = boundary_flux_load(self.mesh.nodes, edges, 2.5, self.mesh.n_nodes)
        self.assertAlmostEqual(float(load.sum()), 2.5 * 4.0, places=12)

    def test_time_step_must_be_positive(self):
        with self.assertRaises(ValueError):
            assemble_scalar_diffusion_reaction(self.kernel, np.ones(self.kernel.n_elements), 1.0, 0.0)


class ElasticityTests(unittest.TestCase):
    def setUp(self):
        self.mesh = generate_rectangle_mesh(1.0, 0.5, 4, 2)
        self.kernel = kernel_for(self.mesh)
        self.E, self.nu = 36.0e9, 0.2
        self.C = np.broadcast_to(plane_strain_matrix(self.E, self.nu), (self.kernel.n_elements, 3, 3)).copy()
        self.K = np.full(self.kernel.n_elements, self.E / (3.0 * (1.0 - 2.0 * self.nu)))

    def test_rigid_body_modes_carry_no_energy(self):
        system = assemble_elasticity(self.kernel, self.C, self.K)
        x, y = self.mesh.nodes[:, 0], self.mesh.nodes[:, 1]
        modes = [
            np.column_stack([np.ones_like(x), np.zeros_like(x)]),
            np.column_stack([np.zeros_like(x), np.ones_like(x)]),
            np.column_stack([-y, x]),
        ]
        for mode in modes:
            self.assertLess(np.abs(system.matrix @ mode.ravel()).max(), 1e-3)

    def test_patch_test_reproduces_linear_displacement(self):
        x, y = self.mesh.nodes[:, 0], self.mesh.nodes[:, 1]
        exact = np.column_stack([1e-4 * x + 2e-5 * y, -3e-5 * x + 5e-5 * y]).ravel()
        boundary = np.unique(self.mesh.boundary_edges)
        dofs = np.concatenate([2 * boundary, 2 * boundary + 1])
        system = assemble_elasticity(self.kernel, self.C, self.K).constrain(dofs, exact[dofs])
        u = solve_sparse(system)
        np.testing.assert_allclose(u, exact, atol=1e-14)
        strains = element_strains(self.kernel, u)
        np.testing.assert_allclose(strains, np.tile([1e-4, 5e-5, -1e-5], (self.kernel.n_elements, 1)), atol=1e-12)

    def test_free_isotropic_expansion_is_stress_free(self):
        eigen = 1e-4
        system = assemble_elasticity(self.kernel, self.C, self.K,
                                     eigenstrain=np.full((self.kernel.n_elements, 3), eigen))
        right_bottom = int(np.flatnonzero((self.mesh.nodes[:, 0] == 1.0) & (self.mesh.nodes[:, 1] == 0.0))[0])
        system.constrain([0, 1, 2 * right_bottom + 1], 0.0)
        strains = element_strains(self.kernel, solve_sparse(system))
        lam = self.E * self.nu / ((1 + self.nu) * (1 - 2 * self.nu))
        mu = self.E / (2 * (1 + self.nu))
        expected = (3 * lam + 2 * mu) * eigen / (2 * (lam + mu))
        np.testing.assert_allclose(strains[:, :2], expected, rtol=1e-9)
        np.testing.assert_allclose(strains[:, 2], 0.0, atol=1e-14)


class PhaseFieldAssemblyTests(unittest.TestCase):
    def test_tangent_matches_finite_differences(self):
        mesh = generate_rectangle_mesh(0.01, 0.01, 4, 4)
        kernel = kernel_for(mesh)
        n = mesh.n_elements
        model = CohesiveModel(np.full(n, 3.9e6), np.full(n, 114.0), 3.0e-3, 40.0e9)
        rng = np.random.default_rng(3)
        threshold = float(damage_threshold(3.9e6, 40.0e9))
        H = threshold * rng.uniform(1.0, 4.0, n)
        phi = rng.uniform(0.1, 0.8, mesh.n_nodes)

        def residual(values):
            return -assemble_phasefield(kernel, H, model, values).rhs

        tangent = assemble_phasefield(kernel, H, model, phi).matrix.toarray()
        h = 1e-6
        columns = []
        for node in range(mesh.n_nodes):
            step = np.zeros(mesh.n_nodes)
            step[node] = h
            columns.append((residual(phi + step) - residual(phi - step)) / (2.0 * h))
        numeric = np.column_stack(columns)
        scale = float(np.abs(tangent).max())
        np.testing.assert_allclose(numeric, tangent, rtol=1e-5, atol=1e-6 * scale)
        np.testing.assert_allclose(tangent, tangent.T, atol=1e-12 * scale)


class SolverTests(unittest.TestCase):
    def test_constrained_one_dimensional_laplacian(self):
        n = 11
        matrix = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format='csr')
        system = SparseSystem(matrix=matrix, rhs=np.zeros(n)).constrain([0, n - 1], [1.0, 3.0])
        np.testing.assert_allclose(solve_sparse(system), np.linspace(1.0, 3.0, n), atol=1e-12)

    def test_random_spd_system_matches_dense_solve(self):
        rng = np.random.default_rng(5)
        n = 40
        factor = sp.random(n, n, density=0.1, random_state=rng).toarray()
        dense = factor @ factor.T + n * np.eye(n)
        rhs = rng.standard_normal(n)
        solution = solve_sparse(SparseSystem(matrix=sp.csr_matrix(dense), rhs=rhs))
        np.testing.assert_allclose(solution, np.linalg.solve(dense, rhs), rtol=1e-10, atol=1e-14)

        fixed = np.array([0, 7, 19])
        values = rng.standard_normal(3)
        free = np.setdiff1d(np.arange(n), fixed)
        expected = np.zeros(n)
        expected[fixed] = values
        expected[free] = np.linalg.solve(dense[np.ix_(free, free)], rhs[free] - dense[np.ix_(free, fixed)] @ values)
        system = SparseSystem(matrix=sp.csr_matrix(dense), rhs=rhs).constrain(fixed, values)
        np.testing.assert_allclose(solve_sparse(system), expected, rtol=1e-10, atol=1e-14)

    def test_later_constraints_win(self):
        system = SparseSystem(matrix=sp.identity(3, format='csr'), rhs=np.zeros(3))
        system.constrain([0, 1], 1.0).constrain([1], 5.0)
        np.testing.assert_allclose(solve_sparse(system), [1.0, 5.0, 0.0])

    def test_singular_matrix_raises(self):
        matrix = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
        with self.assertRaises(SolverError):
            solve_sparse(SparseSystem(matrix=matrix, rhs=np.array([1.0, 0.0])))

    def test_non_finite_rhs_raises(self):
        with self.assertRaises(SolverError):
            solve_sparse(SparseSystem(matrix=sp.identity(2, format='csr'), rhs=np.array([np.nan, 0.0])))


if __name__ == '__main__':
    unittest.main()
