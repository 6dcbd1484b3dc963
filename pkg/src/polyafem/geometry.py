"""Per-element polygon geometry.

All routines accept corner arrays of shape ``(..., n, 2)`` so the same code
serves a single element and a batch of elements sharing one vertex count.
"""

from dataclasses import dataclass

import numpy as np


def cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass(frozen=True)
class ElementGeometry:
    """Cached geometric data of one convex CCW polygon (or a batch)."""

    vertices: np.ndarray  # (..., n, 2)
    normals: np.ndarray  # outward unit normal of edge i = [a_i, a_{i+1}]
    M: np.ndarray  # n_{i-1} x n_i, attached to vertex i
    edge_lengths: np.ndarray
    area: np.ndarray
    centroid: np.ndarray  # area centroid
    center: np.ndarray  # vertex average
    diameter: np.ndarray

    @property
    def n(self) -> int:
        return self.vertices.shape[-2]

    def vertex_edge_distances(self):
        """``d[..., k, j] = h_j(a_k) = (a_j - a_k) . n_j``."""
        a = self.vertices
        diff = a[..., None, :, :] - a[..., :, None, :]
        return np.einsum("...kjd,...jd->...kj", diff, self.normals)

    def edge_distances(self, points):
        """``h_j(x)`` for points of shape ``(..., P, 2)`` -> ``(..., P, n)``."""
        a = self.vertices
        diff = a[..., None, :, :] - points[..., :, None, :]
        return np.einsum("...pjd,...jd->...pj", diff, self.normals)

    def scaled(self, s):
        return element_geometry(self.vertices * s)


def element_geometry(corners) -> ElementGeometry:
    a = np.asarray(corners, dtype=float)
    b = np.roll(a, -1, axis=-2)
    e = b - a
    lengths = np.hypot(e[..., 0], e[..., 1])
    normals = np.stack([e[..., 1], -e[..., 0]], axis=-1) / lengths[..., None]
    M = cross2(np.roll(normals, 1, axis=-2), normals)

    cr = cross2(a, b)
    area = 0.5 * cr.sum(axis=-1)
    centroid = ((a + b) * cr[..., None]).sum(axis=-2) / (6.0 * area[..., None])
    center = a.mean(axis=-2)
    d = a[..., :, None, :] - a[..., None, :, :]
    diameter = np.sqrt((d**2).sum(axis=-1)).max(axis=(-2, -1))
    return ElementGeometry(a, normals, M, lengths, area, centroid, center, diameter)


def turning_crosses(corners):
    """Cross products of consecutive edge vectors at every vertex."""
    a = np.asarray(corners, dtype=float)
    e_in = a - np.roll(a, 1, axis=-2)
    e_out = np.roll(a, -1, axis=-2) - a
    return cross2(e_in, e_out)


def interior_angles(corners):
    a = np.asarray(corners, dtype=float)
    e_in = a - np.roll(a, 1, axis=-2)
    e_out = np.roll(a, -1, axis=-2) - a
    turn = np.arctan2(cross2(e_in, e_out), np.einsum("...d,...d->...", e_in, e_out))
    return np.pi - turn


def is_strictly_convex(corners, rel_tol=1e-12) -> bool:
    a = np.asarray(corners, dtype=float)
    h = element_geometry(a).diameter
    return bool(np.all(turning_crosses(a) > rel_tol * h**2))


def chebyshev_radius(corners):
    """Radius and center of the largest disk inscribed in a convex polygon.

    Solves ``max r  s.t.  n_j . x + r <= n_j . a_j`` by enumerating every
    triple of active constraints; the optimum of this bounded LP sits at a
    vertex of the feasible set in (x, y, r)-space.
    """
    g = element_geometry(corners)
    nrm = g.normals
    rhs = np.einsum("jd,jd->j", nrm, g.vertices)
    n = len(rhs)
    best_r, best_x = 0.0, g.centroid.copy()
    tol = 1e-12 * g.diameter
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                idx = [i, j, k]
                A = np.column_stack([nrm[idx], np.ones(3)])
                if abs(np.linalg.det(A)) < 1e-14:
                    continue
                sol = np.linalg.solve(A, rhs[idx])
                x, r = sol[:2], sol[2]
                if r <= best_r:
                    continue
                if np.all(nrm @ x + r <= rhs + tol):
                    best_r, best_x = r, x
    return best_r, best_x
