"""Residual error indicators.

For each element ``T``::

    eta_T^2 = h_T^2 ||f + lap u_h||_T^2 + 1/2 sum_e h_e ||[du_h/dn]||_e^2

where the sum runs over the interior facets on the boundary of ``T``.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .assembly import _coefficients
from .basis import basis_batch, edge_basis_batch
from .errors import BoundaryFacet
from .geometry import element_geometry
from .mesh.topology import BOUNDARY
from .parallel import chunks, element_chunks, ordered_map
from .quadrature import DEFAULT_FACET_POINTS, DEFAULT_POLYGON_DEGREE, gauss_legendre_01, polygon_rule_batch


@dataclass(frozen=True)
class ElementIndicator:
    element: int
    h: float
    volume_part: float
    jump_part: float

    @property
    def eta_sq(self):
        return self.volume_part + self.jump_part


@dataclass
class Estimate:
    """Indicator table for one mesh, stored column-wise."""

    h: np.ndarray
    volume: np.ndarray
    jump: np.ndarray
    oscillation: np.ndarray  # h_T ||f - f_T||_T, diagnostics only
    facet_jumps: np.ndarray  # h_e ||[du_h/dn]||_e^2 per facet (0 on the boundary)

    @property
    def eta_sq(self):
        return self.volume + self.jump

    @property
    def eta(self):
        return float(np.sqrt(self.eta_sq.sum()))

    @property
    def osc(self):
        return float(np.sqrt(np.sum(self.oscillation**2)))

    def __len__(self):
        return len(self.h)

    def __getitem__(self, i):
        return ElementIndicator(int(i), float(self.h[i]), float(self.volume[i]), float(self.jump[i]))

    def indicators(self):
        return [self[i] for i in range(len(self))]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["element_id", "h_T", "volume_part", "jump_part", "eta_sq"])
            for i in range(len(self)):
                w.writerow(
                    [i, repr(float(self.h[i])), repr(float(self.volume[i])),
                     repr(float(self.jump[i])), repr(float(self.eta_sq[i]))]
                )


def _source_values(f, pts):
    if f is None:
        return np.zeros(pts.shape[:-1])
    return np.broadcast_to(np.asarray(f(pts[..., 0], pts[..., 1]), dtype=float), pts.shape[:-1])


def _volume_terms(mesh, c, f, quad_degree):
    def work(item):
        n, ids = item
        conn, corners = mesh.group_corners(ids)
        geom = element_geometry(corners)
        pts, wts = polygon_rule_batch(corners, quad_degree)
        _, _, llam = basis_batch(geom, pts, laplacian=True)
        fv = _source_values(f, pts)
        r = fv + np.einsum("ei,epi->ep", c[conn], llam)
        h2 = geom.diameter**2
        area = wts.sum(axis=1)
        mean = (wts * fv).sum(axis=1) / area
        osc = np.sqrt(h2 * (wts * (fv - mean[:, None]) ** 2).sum(axis=1))
        return ids, geom.diameter, h2 * (wts * r * r).sum(axis=1), osc

    return ordered_map(work, element_chunks(mesh))


def volume_residual(mesh, solution, element, f, quad_degree=DEFAULT_POLYGON_DEGREE):
    """``h_T^2 ||f + lap u_h||^2_T`` for a single element."""
    c = _coefficients(solution)
    conn, corners = mesh.group_corners([element])
    geom = element_geometry(corners)
    pts, wts = polygon_rule_batch(corners, quad_degree)
    _, _, llam = basis_batch(geom, pts, laplacian=True)
    r = _source_values(f, pts) + np.einsum("ei,epi->ep", c[conn], llam)
    return float(geom.diameter[0] ** 2 * (wts * r * r).sum())


def _side_gradients(mesh, c, facets, side, s):
    """``grad u_h`` from one side of each facet at facet parameters ``s``.

    The side element's corners are rolled so the facet's host edge becomes
    local edge 0; ``facet_t`` maps ``s`` onto the covered sub-interval.
    """
    out = np.empty((len(facets), len(s), 2))
    elems = mesh.facet_elements[facets, side]
    by_n = {}
    for k, e in enumerate(elems):
        by_n.setdefault(len(mesh.elements[e]), []).append(k)
    for n, ks in sorted(by_n.items()):
        ks = np.array(ks)
        conn = np.array([mesh.elements[e] for e in elems[ks]], dtype=int)
        loc = mesh.facet_local_edge[facets[ks], side]
        roll = (np.arange(n)[None, :] + loc[:, None]) % n
        conn = np.take_along_axis(conn, roll, axis=1)
        geom = element_geometry(mesh.vertices[conn])
        t0 = mesh.facet_t[facets[ks], side, 0]
        t1 = mesh.facet_t[facets[ks], side, 1]
        t = t0[:, None] + np.asarray(s)[None, :] * (t1 - t0)[:, None]
        _, glam, _ = edge_basis_batch(geom, t, laplacian=False, edge=0)
        out[ks] = np.einsum("ei,epid->epd", c[conn], glam)
    return out


def _jump_terms(mesh, c, facets, npoints):
    s, w = gauss_legendre_01(npoints)
    gp = _side_gradients(mesh, c, facets, 0, s)
    gm = _side_gradients(mesh, c, facets, 1, s)
    nrm = mesh.facet_normals[facets]
    j = np.einsum("fpd,fd->fp", gp - gm, nrm)
    L = mesh.facet_lengths[facets]
    # h_e * integral over e of jump^2, with integral = L sum w j^2
    return L * L * ((j * j) @ w)


def jump_residual(mesh, solution, facet, n_gauss=DEFAULT_FACET_POINTS):
    """``h_e ||[du_h/dn_e]||^2_e`` on one interior facet."""
    if mesh.facet_elements[facet, 1] == BOUNDARY:
        raise BoundaryFacet(f"facet {facet} lies on the boundary")
    c = _coefficients(solution)
    return float(_jump_terms(mesh, c, np.array([facet]), n_gauss)[0])


def estimate_all(mesh, solution, f, quad_degree=DEFAULT_POLYGON_DEGREE,
                 n_gauss=DEFAULT_FACET_POINTS) -> Estimate:
    """All element indicators; each facet jump goes half to each side."""
    c = _coefficients(solution)
    E = mesh.n_elements
    h, vol, osc = np.empty(E), np.empty(E), np.empty(E)
    for ids, hh, vv, oo in _volume_terms(mesh, c, f, quad_degree):
        h[ids], vol[ids], osc[ids] = hh, vv, oo

    interior = mesh.interior_facets
    fj = np.zeros(mesh.n_facets)
    parts = ordered_map(lambda fs: (fs, _jump_terms(mesh, c, fs, n_gauss)), chunks(interior))
    for fs, vals in parts:
        fj[fs] = vals
    jump = np.zeros(E)
    np.add.at(jump, mesh.facet_elements[interior, 0], 0.5 * fj[interior])
    np.add.at(jump, mesh.facet_elements[interior, 1], 0.5 * fj[interior])
    return Estimate(h, vol, jump, osc, fj)
