"""
Sparse linear systems with Dirichlet constraints and a direct solver.
"""
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from rustcrack.config.constants import SOLVER
from rustcrack.utils.error_handler import SolverError
from rustcrack.utils.logger import get_solver_logger

logger = logging.getLogger(__name__)


@dataclass
class SparseSystem:
    """
    ``matrix @ x = rhs`` with ``x[constrained] = values``.

    ``matrix`` is CSR; constraints are eliminated symmetrically at solve time.
    """
    matrix: sp.csr_matrix
    rhs: np.ndarray
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def size(self):
        return self.matrix.shape[0]

    def constrain(self, dofs, values=0.0):
        """Add Dirichlet constraints; later entries win on duplicates."""
        dofs = np.asarray(dofs, dtype=np.int64).ravel()
        values = np.broadcast_to(np.asarray(values, dtype=float), dofs.shape)
        merged = dict(zip(self.constrained.tolist(), self.values.tolist()))
        merged.update(zip(dofs.tolist(), values.tolist()))
        keys = np.array(sorted(merged), dtype=np.int64)
        self.constrained = keys
        self.values = np.array([merged[k] for k in keys.tolist()], dtype=float)
        return self


def _relative_residual(matrix, x, rhs):
    scale = np.linalg.norm(rhs)
    residual = np.linalg.norm(matrix @ x - rhs)
    if scale == 0.0:
        return residual
    return residual / scale


def solve_sparse(system: SparseSystem, tolerance=None):
    """
    Solve a constrained sparse system.

    Raises
    ------
    SolverError
        On a singular reduced matrix, non-finite results or a residual above
        ``tolerance`` after one refinement step.
    """
    tolerance = SOLVER['LINEAR_RELATIVE_RESIDUAL'] if tolerance is None else tolerance
    n = system.size
    matrix = sp.csr_matrix(system.matrix)
    rhs = np.asarray(system.rhs, dtype=float)
    if matrix.shape != (n, n) or rhs.shape != (n,):
        raise SolverError('system shape mismatch', diagnostics={'matrix': matrix.shape, 'rhs': rhs.shape})
    if not np.all(np.isfinite(rhs)) or not np.all(np.isfinite(matrix.data)):
        raise SolverError('non-finite entries in linear system')

    x = np.zeros(n)
    free = np.ones(n, dtype=bool)
    if system.constrained.size:
        x[system.constrained] = system.values
        free[system.constrained] = False
    free_dofs = np.flatnonzero(free)
    if free_dofs.size == 0:
        return x

    reduced = matrix[free_dofs][:, free_dofs].tocsc()
    reduced_rhs = rhs[free_dofs] - matrix[free_dofs] @ x

    started = time.perf_counter()
    try:
        factor = spla.splu(reduced, permc_spec='MMD_AT_PLUS_A')
    except RuntimeError as exc:
        raise SolverError(f'factorization failed: {exc}', diagnostics={'size': int(free_dofs.size)}) from exc

    solution = factor.solve(reduced_rhs)
    if not np.all(np.isfinite(solution)):
        raise SolverError('non-finite solution', diagnostics={'size': int(free_dofs.size)})
    residual = _relative_residual(reduced, solution, reduced_rhs)
    if residual > tolerance:
        solution = solution + factor.solve(reduced_rhs - reduced @ solution)
        residual = _relative_residual(reduced, solution, reduced_rhs)
    if not np.all(np.isfinite(solution)) or residual > tolerance:
        raise SolverError('linear residual above tolerance',
                          diagnostics={'residual': float(residual), 'tolerance': tolerance,
                                       'size': int(free_dofs.size)})

    get_solver_logger().log_linear_solve(int(free_dofs.size), float(residual),
                                         (time.perf_counter() - started) * 1000.0)
    x[free_dofs] = solution
    return x
