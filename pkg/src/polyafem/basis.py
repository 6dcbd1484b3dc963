"""Wachspress coordinates, their first derivatives and Laplacians.

The weight attached to vertex ``i`` is ``w_i = M_i prod_{j != i-1, i} h_j``
with ``h_j(x) = (a_j - x) . n_j``.  Every ``h_j`` is affine with gradient
``-n_j``, so gradients and Laplacians of ``w_i`` follow from the product
rule in closed form.  Factors are normalised by ``h_T`` so that the weights
stay O(1) for any element size.

Points on the boundary make some factors vanish.  The kernel takes the set of
vanishing factors explicitly and differentiates the remaining product, which
removes the 0/0 that the plain quotient would produce on an edge.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .errors import BadEdgeIndex, PointOutsideElement, VertexCountMismatch
from .geometry import ElementGeometry, element_geometry

INTERIOR_TOL = 1e-13
OUTSIDE_TOL = 1e-12


@dataclass
class WeightEval:
    w: np.ndarray
    grad_w: np.ndarray
    lap_w: np.ndarray
    W: float
    grad_W: np.ndarray
    lap_W: float


@dataclass
class BasisEval:
    values: np.ndarray
    gradients: np.ndarray
    laplacians: np.ndarray
    point: np.ndarray


@dataclass
class MapEval:
    image: np.ndarray
    jacobian: np.ndarray
    det: float


@lru_cache(maxsize=None)
def _factor_sets(n, zeros):
    """Per vertex: (remaining factor indices, vanishing factor indices)."""
    out = []
    for i in range(n):
        S = [j for j in range(n) if j not in ((i - 1) % n, i)]
        out.append(
            (
                np.array([j for j in S if j not in zeros], dtype=int),
                tuple(j for j in S if j in zeros),
            )
        )
    return tuple(out)


def _weights_kernel(g, normals, M, hT, zeros=(), laplacian=True):
    """Normalised weights ``w_i / h_T^(n-2)`` and their derivatives.

    g       : (E, P, n) normalised distances h_j / h_T
    normals : (E, n, 2); M : (E, n); hT : (E,)
    zeros   : edge indices whose factor is exactly zero at every point
    """
    E, P, n = g.shape
    hT = hT[:, None, None]
    safe = g.copy()
    if zeros:
        safe[..., list(zeros)] = 1.0
    # a_j = grad(g_j) / g_j
    a = -normals[:, None, :, :] / (hT[..., None] * safe[..., None])
    if zeros:
        a[..., list(zeros), :] = 0.0
    a2 = (a**2).sum(axis=-1)
    b = -normals / hT  # grad(g_j), (E, n, 2) broadcast over points

    w = np.zeros((E, P, n))
    gw = np.zeros((E, P, n, 2))
    lw = np.zeros((E, P, n)) if laplacian else None
    for i, (rest, vanish) in enumerate(_factor_sets(n, tuple(zeros))):
        u = M[:, None, i] * safe[..., rest].prod(axis=-1)
        A = a[..., rest, :].sum(axis=-2)
        if not vanish:
            w[..., i] = u
            gw[..., i, :] = u[..., None] * A
            if laplacian:
                lw[..., i] = u * ((A**2).sum(axis=-1) - a2[..., rest].sum(axis=-1))
        elif len(vanish) == 1:
            bk = b[:, None, vanish[0], :]
            gw[..., i, :] = u[..., None] * bk
            if laplacian:
                lw[..., i] = 2.0 * u * (A * bk).sum(axis=-1)
        else:
            if laplacian:
                bk, bl = b[:, vanish[0], :], b[:, vanish[1], :]
                lw[..., i] = 2.0 * u * (bk * bl).sum(axis=-1)[:, None]
    return w, gw, lw


def _quotient(w, gw, lw):
    W = w.sum(axis=-1)
    gW = gw.sum(axis=-2)
    lam = w / W[..., None]
    glam = (gw - lam[..., None] * gW[..., None, :]) / W[..., None, None]
    llam = None
    if lw is not None:
        lW = lw.sum(axis=-1)
        llam = (
            lw
            - 2.0 * np.einsum("...id,...d->...i", glam, gW)
            - lam * lW[..., None]
        ) / W[..., None]
    return lam, glam, llam


def _batch_args(geom: ElementGeometry):
    v = geom.vertices
    if v.ndim == 2:
        return (
            v[None],
            geom.normals[None],
            geom.M[None],
            np.atleast_1d(geom.diameter),
        )
    return v, geom.normals, geom.M, np.asarray(geom.diameter)


def basis_batch(geom: ElementGeometry, points, laplacian=True):
    """Interior evaluation for a batch of elements.

    ``points`` has shape ``(E, P, 2)``; returns values ``(E, P, n)``,
    gradients ``(E, P, n, 2)`` and Laplacians ``(E, P, n)`` (or None).
    """
    v, nrm, M, hT = _batch_args(geom)
    g = np.einsum("epjd,ejd->epj", v[:, None, :, :] - points[:, :, None, :], nrm)
    g /= hT[:, None, None]
    if np.any(g <= INTERIOR_TOL):
        raise PointOutsideElement(
            "interior branch needs min_j h_j(x) > 1e-13 h_T at every point"
        )
    return _quotient(*_weights_kernel(g, nrm, M, hT, (), laplacian))


def edge_basis_batch(geom: ElementGeometry, t, laplacian=False, edge=0):
    """Evaluate on edge ``edge`` of every element at parameters ``t``.

    ``t`` has shape ``(E, P)`` or ``(P,)``, values in [0, 1]; the point is
    ``(1 - t) a_edge + t a_{edge+1}``.
    """
    v, nrm, M, hT = _batch_args(geom)
    E, n = v.shape[:2]
    t = np.broadcast_to(np.asarray(t, dtype=float), (E,) + np.shape(t)[-1:])
    ka, kb = edge, (edge + 1) % n
    x = (1.0 - t)[..., None] * v[:, None, ka, :] + t[..., None] * v[:, None, kb, :]
    g = np.einsum("epjd,ejd->epj", v[:, None, :, :] - x[:, :, None, :], nrm)
    g /= hT[:, None, None]

    P = t.shape[1]
    lam = np.zeros((E, P, n))
    glam = np.zeros((E, P, n, 2))
    llam = np.zeros((E, P, n)) if laplacian else None
    groups = [
        ((0.0 < t) & (t < 1.0), (edge,)),
        (t <= 0.0, tuple(sorted({(edge - 1) % n, edge}))),
        (t >= 1.0, tuple(sorted({edge, kb}))),
    ]
    for mask, zeros in groups:
        if not mask.any():
            continue
        # all elements share the mask pattern column-wise only if t is shared;
        # handle the general case point by point group
        rows, cols = np.nonzero(mask)
        gg = g[rows, cols][:, None, :].copy()
        gg[..., list(zeros)] = 0.0
        out = _quotient(
            *_weights_kernel(gg, nrm[rows], M[rows], hT[rows], zeros, laplacian)
        )
        lam[rows, cols] = out[0][:, 0]
        glam[rows, cols] = out[1][:, 0]
        if laplacian:
            llam[rows, cols] = out[2][:, 0]
    return lam, glam, llam


def _as_geometry(element) -> ElementGeometry:
    if isinstance(element, ElementGeometry):
        return element
    return element_geometry(element)


def eval_weights(element, point) -> WeightEval:
    """Unnormalised Wachspress weights at one interior point."""
    geom = _as_geometry(element)
    x = np.asarray(point, dtype=float)
    hT = float(geom.diameter)
    g = geom.edge_distances(x[None])[0] / hT
    if np.any(g < -OUTSIDE_TOL):
        raise PointOutsideElement(f"point {x} lies outside the element")
    zeros = tuple(int(j) for j in np.nonzero(g <= INTERIOR_TOL)[0])
    g = np.where(g <= INTERIOR_TOL, 0.0, g)
    v, nrm, M, hTa = _batch_args(geom)
    w, gw, lw = _weights_kernel(g[None, None], nrm, M, hTa, zeros, True)
    n = geom.n
    w, gw, lw = w[0, 0], gw[0, 0], lw[0, 0]
    w, gw, lw = w * hT ** (n - 2), gw * hT ** (n - 2), lw * hT ** (n - 2)
    return WeightEval(w, gw, lw, w.sum(), gw.sum(axis=0), lw.sum())


def eval_basis(element, point) -> BasisEval:
    """Values, gradients and Laplacians of all coordinates at ``point``.

    Points on the boundary (within 1e-13 h_T) are routed to the edge branch.
    """
    geom = _as_geometry(element)
    x = np.asarray(point, dtype=float)
    g = geom.edge_distances(x[None])[0] / geom.diameter
    if np.any(g < -OUTSIDE_TOL):
        raise PointOutsideElement(f"point {x} lies outside the element")
    on = np.nonzero(g <= INTERIOR_TOL)[0]
    if len(on) == 0:
        lam, glam, llam = basis_batch(geom, x[None, None])
        return BasisEval(lam[0, 0], glam[0, 0], llam[0, 0], x)
    n = geom.n
    k = int(on[0])
    if len(on) == 2 and on[0] == 0 and on[1] == n - 1:
        k = n - 1
    a, b = geom.vertices[k], geom.vertices[(k + 1) % n]
    t = float(np.dot(x - a, b - a) / np.dot(b - a, b - a))
    if len(on) >= 2:
        t = 0.0 if np.linalg.norm(x - a) < np.linalg.norm(x - b) else 1.0
    return eval_basis_on_edge(geom, k, min(max(t, 0.0), 1.0))


def eval_basis_on_edge(element, edge_index, t) -> BasisEval:
    geom = _as_geometry(element)
    n = geom.n
    if not (0 <= edge_index < n):
        raise BadEdgeIndex(f"edge index {edge_index} out of range for n={n}")
    if not (0.0 <= t <= 1.0):
        raise ValueError("edge parameter must lie in [0, 1]")
    lam, glam, llam = edge_basis_batch(geom, np.array([t]), True, edge_index)
    a, b = geom.vertices[edge_index], geom.vertices[(edge_index + 1) % n]
    return BasisEval(lam[0, 0], glam[0, 0], llam[0, 0], (1 - t) * a + t * b)


@lru_cache(maxsize=None)
def _reference_vertices(n):
    k = np.arange(n)
    ang = 2.0 * np.pi * k / n + np.pi / 2.0 - np.pi / n
    v = np.column_stack([np.cos(ang), np.sin(ang)])
    d = np.sqrt(((v[:, None] - v[None]) ** 2).sum(-1)).max()
    v = v / d
    v.setflags(write=False)
    return v


def reference_polygon(n) -> ElementGeometry:
    """Regular n-gon of unit diameter."""
    return element_geometry(_reference_vertices(n))


def map_batch(target_vertices, ref_points):
    """Image, Jacobian and determinant of F_T at reference points.

    ``target_vertices`` : (E, n, 2); ``ref_points`` : (P, 2) interior points of
    the reference n-gon.  Returns arrays of shape (E, P, 2), (E, P, 2, 2),
    (E, P).
    """
    a = np.asarray(target_vertices, dtype=float)
    n = a.shape[1]
    ref = reference_polygon(n)
    lam, glam, _ = basis_batch(ref, np.asarray(ref_points)[None], laplacian=False)
    lam, glam = lam[0], glam[0]
    image = np.einsum("pi,eid->epd", lam, a)
    jac = np.einsum("eil,pir->eplr", a, glam)
    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    return image, jac, det


def eval_map(target_element, ref_point, n_ref=None) -> MapEval:
    """Evaluate ``F_T(x) = sum_i l_i(x) a_i`` from the unit-diameter regular
    reference polygon onto ``target_element``."""
    target = np.asarray(
        target_element.vertices
        if isinstance(target_element, ElementGeometry)
        else target_element,
        dtype=float,
    )
    n = len(target)
    if n_ref is not None and n_ref != n:
        raise VertexCountMismatch(
            f"reference has {n_ref} vertices, target has {n}"
        )
    b = eval_basis(reference_polygon(n), ref_point)
    image = b.values @ target
    jac = np.einsum("il,ir->lr", target, b.gradients)
    return MapEval(image, jac, float(np.linalg.det(jac)))


def signed_triangle_area(u, v, w):
    return 0.5 * ((v[..., 0] - u[..., 0]) * (w[..., 1] - u[..., 1])
                  - (w[..., 0] - u[..., 0]) * (v[..., 1] - u[..., 1]))


def jacobian_det_expansion(target_vertices, ref_points):
    """det J_F via ``2 sum_{i<j<k} D(l_i, l_j, l_k) A(a_i, a_j, a_k)``.

    ``D`` is the 3x3 determinant of values and first partials of three
    reference coordinates; ``A`` the signed area of the triangle of target
    vertices.  Independent of the direct Jacobian assembly in
    :func:`map_batch`.
    """
    a = np.asarray(target_vertices, dtype=float)
    n = a.shape[-2]
    lam, glam, _ = basis_batch(
        reference_polygon(n), np.asarray(ref_points)[None], laplacian=False
    )
    lam, glam = lam[0], glam[0]
    total = 0.0
    for i, j, k in combinations(range(n), 3):
        rows = np.stack(
            [
                np.stack([lam[:, i], lam[:, j], lam[:, k]], axis=-1),
                np.stack([glam[:, i, 0], glam[:, j, 0], glam[:, k, 0]], axis=-1),
                np.stack([glam[:, i, 1], glam[:, j, 1], glam[:, k, 1]], axis=-1),
            ],
            axis=-2,
        )
        D = np.linalg.det(rows)
        A = signed_triangle_area(a[..., i, :], a[..., j, :], a[..., k, :])
        total = total + 2.0 * D * np.asarray(A)[..., None]
    return total
