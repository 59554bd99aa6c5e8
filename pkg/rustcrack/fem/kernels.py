"""
P1 triangle kernels: shape-function gradients, areas and the three-point
interior quadrature rule used for fields that vary inside an element.
"""
from dataclasses import dataclass

import numpy as np

# Barycentric coordinates of the three-point rule (degree 2 exact)
QUADRATURE_POINTS = np.array([
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
])
QUADRATURE_FRACTIONS = np.full(3, 1.0 / 3.0)

# Two-point Gauss rule on [0, 1] for edge integrals
EDGE_POINTS = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
EDGE_WEIGHTS = np.array([0.5, 0.5])


@dataclass(frozen=True, eq=False)
class ElementKernel:
    """
    Per-triangle geometric data.

    Attributes
    ----------
    triangles : (n_elements, 3) connectivity
    gradients : (n_elements, 3, 2) shape-function gradients (1/m)
    areas : (n_elements,) element areas (m^2)
    weights : (n_elements, 3) quadrature weights; rows sum to the area
    """
    triangles: np.ndarray
    gradients: np.ndarray
    areas: np.ndarray
    weights: np.ndarray
    n_nodes: int

    @property
    def n_elements(self):
        return len(self.triangles)

    def at_quadrature(self, nodal):
        """P1 interpolation of a nodal field to the quadrature points, shape (n_elements, 3)."""
        values = np.asarray(nodal, dtype=float)[self.triangles]
        return values @ QUADRATURE_POINTS.T

    def stiffness_blocks(self, coefficient=None):
        """
        Element Laplacian blocks ``A * c * grad N_i . grad N_j``.

        ``coefficient`` may be per element or per quadrature point; it is
        averaged over the element since the gradients are constant.
        """
        blocks = np.einsum('eid,ejd->eij', self.gradients, self.gradients) * self.areas[:, None, None]
        if coefficient is None:
            return blocks
        coefficient = np.asarray(coefficient, dtype=float)
        if coefficient.ndim == 2:
            coefficient = coefficient.mean(axis=1)
        return blocks * coefficient[:, None, None]

    def strain_operator(self):
        """Plane B matrices, shape (n_elements, 3, 6), Voigt order (xx, yy, 2xy)."""
        n = self.n_elements
        B = np.zeros((n, 3, 6))
        dx = self.gradients[:, :, 0]
        dy = self.gradients[:, :, 1]
        B[:, 0, 0::2] = dx
        B[:, 1, 1::2] = dy
        B[:, 2, 0::2] = dy
        B[:, 2, 1::2] = dx
        return B

    def vector_dofs(self):
        dofs = np.empty((self.n_elements, 6), dtype=np.int64)
        dofs[:, 0::2] = 2 * self.triangles
        dofs[:, 1::2] = 2 * self.triangles + 1
        return dofs


def build_kernel(nodes, triangles):
    """Compute gradients, areas and quadrature weights for every triangle."""
    nodes = np.asarray(nodes, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    p = nodes[triangles]
    x, y = p[:, :, 0], p[:, :, 1]
    signed = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    two_area = 2.0 * signed
    gradients = np.empty((len(triangles), 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        gradients[:, i, 0] = (y[:, j] - y[:, k]) / two_area
        gradients[:, i, 1] = (x[:, k] - x[:, j]) / two_area
    areas = np.abs(signed)
    weights = areas[:, None] * QUADRATURE_FRACTIONS[None, :]
    return ElementKernel(triangles=triangles, gradients=gradients, areas=areas,
                         weights=weights, n_nodes=len(nodes))


def kernel_for(mesh):
    return build_kernel(mesh.nodes, mesh.triangles)


def edge_lengths(nodes, edges):
    p = np.asarray(nodes)[np.asarray(edges)]
    return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
