"""
Line probes through nodal fields: radial rays from a rebar and circles
around it.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from rustcrack.models.mesh import Mesh
from rustcrack.utils.error_handler import ProbeError

NEIGHBOUR_CANDIDATES = (8, 32)


@dataclass
class ProbeLine:
    """Sampled polyline; ``coordinate`` is r (m) for rays and angle (deg) for circles."""
    coordinate: np.ndarray
    values: np.ndarray
    truncated: bool = False


class PointLocator:
    """Finds the triangle containing each query point via nearest centroids."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.tree = cKDTree(mesh.centroids)
        p = mesh.nodes[mesh.triangles]
        self._origin = p[:, 0]
        self._inverse = np.linalg.inv(np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2))

    def _barycentric(self, elements, point):
        local = np.einsum('eij,ej->ei', self._inverse[elements], point - self._origin[elements])
        return np.column_stack([1.0 - local.sum(axis=1), local])

    def locate(self, points, tolerance=1e-9):
        """Return (elements, barycentric); element -1 marks points outside the mesh."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        found = np.full(len(points), -1, dtype=np.int64)
        weights = np.zeros((len(points), 3))
        for k in NEIGHBOUR_CANDIDATES:
            pending = np.flatnonzero(found < 0)
            if pending.size == 0:
                break
            k = min(k, self.mesh.n_elements)
            _, candidates = self.tree.query(points[pending], k=k)
            candidates = np.asarray(candidates).reshape(len(pending), -1)
            for row, index in enumerate(pending):
                bary = self._barycentric(candidates[row], points[index])
                inside = np.flatnonzero(np.all(bary >= -tolerance, axis=1))
                if inside.size:
                    found[index] = candidates[row][inside[0]]
                    weights[index] = bary[inside[0]]
        return found, weights

    def interpolate(self, field, points):
        elements, weights = self.locate(points)
        values = np.full(len(elements), np.nan)
        ok = elements >= 0
        if ok.any():
            nodal = np.asarray(field, dtype=float)[self.mesh.triangles[elements[ok]]]
            values[ok] = np.sum(nodal * weights[ok], axis=1)
        return values, ok


def probe_radial(mesh: Mesh, field, center, angle, start_radius, length, samples, locator=None):
    """
    Sample ``field`` along the ray at ``angle`` degrees from ``center``,
    starting at ``start_radius`` (normally the rebar surface).

    Samples past the first point outside the mesh are dropped and the line is
    flagged as truncated.
    """
    if samples < 2:
        raise ProbeError('a probe needs at least two samples')
    locator = locator or PointLocator(mesh)
    radius = start_radius + np.linspace(0.0, length, samples)
    theta = math.radians(angle)
    points = np.column_stack([center[0] + radius * math.cos(theta), center[1] + radius * math.sin(theta)])
    values, ok = locator.interpolate(field, points)
    if not ok[0]:
        raise ProbeError(f'radial probe at {angle} deg starts outside the mesh')
    keep = len(ok) if ok.all() else int(np.argmin(ok))
    return ProbeLine(radius[:keep], values[:keep], truncated=keep < len(ok))


def probe_circumferential(mesh: Mesh, field, center, radius, samples, locator=None):
    """Sample ``field`` on the circle of ``radius``; angles in degrees from +x."""
    if samples < 2:
        raise ProbeError('a probe needs at least two samples')
    locator = locator or PointLocator(mesh)
    angles = np.linspace(0.0, 360.0, samples, endpoint=False)
    theta = np.radians(angles)
    points = np.column_stack([center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)])
    values, ok = locator.interpolate(field, points)
    if not ok.any():
        raise ProbeError('circumferential probe lies outside the mesh')
    return ProbeLine(angles[ok], values[ok], truncated=not ok.all())
