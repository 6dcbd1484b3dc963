"""Quadrature on convex polygons and on straight facets.

Polygons are fan-triangulated from the vertex average; each sub-triangle
carries a collapsed-coordinate (Stroud conical product) Gauss rule, which has
positive weights, strictly interior nodes and exact polynomial degree for any
requested order.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import UnsupportedCount, UnsupportedDegree
from .geometry import cross2

DEFAULT_POLYGON_DEGREE = 8
DEFAULT_FACET_POINTS = 8


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Barycentric nodes ``(q, 3)`` and weights (summing to 1) on a triangle."""
    if not 0 <= degree <= 30:
        raise UnsupportedDegree(f"triangle degree {degree} not supported")
    m = degree // 2 + 1
    # collapsed direction carries the (1 - s) Jacobian -> Gauss-Jacobi(1, 0)
    s, ws = roots_jacobi(m, 1.0, 0.0)
    r, wr = roots_legendre(m)
    s = 0.5 * (s + 1.0)
    ws = ws / 4.0
    r = 0.5 * (r + 1.0)
    wr = wr / 2.0
    S, R = np.meshgrid(s, r, indexing="ij")
    W = np.outer(ws, wr)
    l1 = S
    l2 = (1.0 - S) * R
    l0 = 1.0 - l1 - l2
    bary = np.column_stack([l0.ravel(), l1.ravel(), l2.ravel()])
    w = 2.0 * W.ravel()  # reference triangle area is 1/2
    w = w / w.sum()
    bary.setflags(write=False)
    w.setflags(write=False)
    return bary, w


def polygon_rule_batch(corners, degree=DEFAULT_POLYGON_DEGREE):
    """Composite rule for a batch of polygons ``(E, n, 2)``.

    Returns points ``(E, n*q, 2)`` and weights ``(E, n*q)``.
    """
    if not 2 <= degree <= 12:
        raise UnsupportedDegree(f"polygon rule degree must be in 2..12, got {degree}")
    a = np.asarray(corners, dtype=float)
    E, n = a.shape[:2]
    bary, w = triangle_rule(degree)
    c = a.mean(axis=1)
    b = np.roll(a, -1, axis=1)
    # sub-triangle k = (c, a_k, a_{k+1})
    area = 0.5 * cross2(a - c[:, None], b - c[:, None])  # (E, n)
    pts = (
        bary[None, None, :, 0, None] * c[:, None, None, :]
        + bary[None, None, :, 1, None] * a[:, :, None, :]
        + bary[None, None, :, 2, None] * b[:, :, None, :]
    )
    wts = area[:, :, None] * w[None, None, :]
    return pts.reshape(E, -1, 2), wts.reshape(E, -1)


def polygon_rule(element, degree=DEFAULT_POLYGON_DEGREE) -> QuadratureRule:
    a = np.asarray(getattr(element, "vertices", element), dtype=float)
    pts, wts = polygon_rule_batch(a[None], degree)
    return QuadratureRule(pts[0], wts[0])


@lru_cache(maxsize=None)
def gauss_legendre_01(npoints):
    if not 1 <= npoints <= 16:
        raise UnsupportedCount(f"facet rule needs 1..16 points, got {npoints}")
    x, w = roots_legendre(npoints)
    t = 0.5 * (x + 1.0)
    w = 0.5 * w
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def facet_rule(facet, npoints=DEFAULT_FACET_POINTS) -> QuadratureRule:
    """Gauss-Legendre rule on a segment given by its two endpoints.

    ``points`` are the unit-interval parameters; ``weights`` sum to the
    segment length.
    """
    p, q = (np.asarray(x, dtype=float) for x in facet)
    t, w = gauss_legendre_01(npoints)
    return QuadratureRule(t.copy(), w * np.linalg.norm(q - p))
