"""Numerical checks of the scale-free constants behind the error analysis.

Each ``check_*`` function samples a family of shape-regular polygons and
returns a :class:`LemmaReport` with one dimensionless ratio per sample.
Because the ratios are dimensionless, rerunning on uniformly scaled copies
must reproduce them; :func:`scale_invariance` measures exactly that.
Observed maxima are compared with brackets recorded in
``data/lemma_brackets.json`` (regenerated by ``polyafem verify --record``).
"""

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .basis import (
    basis_batch,
    edge_basis_batch,
    jacobian_det_expansion,
    map_batch,
    reference_polygon,
)
from .errors import NonPositiveDeterminant
from .geometry import element_geometry, is_strictly_convex
from .mesh.regularity import polygon_metrics
from .quadrature import gauss_legendre_01, polygon_rule_batch

# sampler hypotheses
MAX_ASPECT = 6.0  # h_T / rho_T
MIN_EDGE_DISTANCE = 0.1  # h_*T / h_T
MIN_ANGLE = np.radians(20.0)
MAX_ANGLE = np.radians(160.0)
N_RANGE = (3, 8)

BRACKET_MARGIN = 1.25  # recorded maxima are inflated by this factor
SCALES = (1e-3, 1e3)


@dataclass
class LemmaReport:
    lemma: str
    description: str
    n_samples: int
    n_range: tuple
    points_per_sample: int
    ratios: dict  # name -> per-sample values
    sample_n: np.ndarray  # vertex count of each sample
    bracket: dict = field(default_factory=dict)  # name -> {n: [lo, hi]}
    scale_deviation: float = float("nan")

    def observed(self, name):
        r = self.ratios[name]
        return float(np.min(r)), float(np.max(r))

    def observed_by_n(self, name):
        r = self.ratios[name]
        return {
            int(n): (float(r[self.sample_n == n].min()), float(r[self.sample_n == n].max()))
            for n in np.unique(self.sample_n)
        }

    def within_bracket(self):
        for name, per_n in self.bracket.items():
            if name not in self.ratios:
                continue
            for n, (lo, hi) in self.observed_by_n(name).items():
                b = per_n.get(str(n))
                if b is None:
                    continue
                if lo < b[0] or hi > b[1]:
                    return False
        return True

    @property
    def finite(self):
        return all(np.all(np.isfinite(v)) for v in self.ratios.values())

    @property
    def passed(self):
        ok = self.finite and self.within_bracket()
        if np.isfinite(self.scale_deviation):
            ok = ok and self.scale_deviation <= 1e-9
        return bool(ok)

    def summary_lines(self):
        out = [f"{self.lemma}: {self.description}",
               f"  samples {self.n_samples}, n in {self.n_range}, "
               f"{self.points_per_sample} points per sample"]
        for name in self.ratios:
            lo, hi = self.observed(name)
            out.append(f"  {name}: min {lo:.6g} max {hi:.6g}")
        if np.isfinite(self.scale_deviation):
            out.append(f"  scale deviation {self.scale_deviation:.3g}")
        out.append(f"  {'PASS' if self.passed else 'FAIL'}")
        return out

    def rows(self):
        names = list(self.ratios)
        yield ["sample", "n"] + names
        for k in range(self.n_samples):
            yield [k, int(self.sample_n[k])] + [repr(float(self.ratios[m][k])) for m in names]


# -- polygon sampler -------------------------------------------------------------

def satisfies_hypotheses(corners):
    if not is_strictly_convex(corners):
        return False
    h, rho, h_star, ang = polygon_metrics(corners)
    return (
        h / rho <= MAX_ASPECT
        and h_star / h >= MIN_EDGE_DISTANCE
        and ang.min() >= MIN_ANGLE
        and ang.max() <= MAX_ANGLE
    )


def random_polygon(rng, n, max_tries=10000):
    """CCW convex n-gon from sorted random angles and jittered radii."""
    for _ in range(max_tries):
        gaps = rng.uniform(0.5, 1.5, n)
        ang = np.cumsum(gaps) / gaps.sum() * 2.0 * np.pi + rng.uniform(0, 2 * np.pi)
        r = rng.uniform(0.7, 1.0, n)
        c = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
        if satisfies_hypotheses(c):
            return c
    raise RuntimeError(f"no admissible {n}-gon after {max_tries} draws")


def sample_polygons(count, seed=0, n_range=N_RANGE):
    """``count`` admissible polygons, vertex counts cycling over ``n_range``."""
    rng = np.random.default_rng(seed)
    ns = np.arange(n_range[0], n_range[1] + 1)
    return [random_polygon(rng, int(ns[k % len(ns)])) for k in range(count)]


def _by_n(polygons):
    groups = {}
    for k, p in enumerate(polygons):
        groups.setdefault(len(p), []).append(k)
    return {n: np.array(ks) for n, ks in sorted(groups.items())}


def _report(lemma, description, polygons, ppp, ratios):
    ns = np.array([len(p) for p in polygons])
    return LemmaReport(
        lemma, description, len(polygons),
        (int(ns.min()), int(ns.max())), int(ppp), ratios, ns,
    )


# -- derivative bounds -------------------------------------------------------------

EDGE_SAMPLES = np.linspace(0.0, 1.0, 9)
FD_STEP = 1e-5  # times h_T


def _edge_gradients(geom, t):
    n = geom.vertices.shape[-2]
    out = []
    for e in range(n):
        _, g, _ = edge_basis_batch(geom, t, laplacian=False, edge=e)
        out.append(g)
    return np.concatenate(out, axis=1)


def check_gradient_bound(polygons, degree=8):
    """Sup of ``|grad l_i| h_T`` and of ``|hess l_i|_2 h_T^2``.

    Gradients are sampled at interior rule points and along every edge
    (vertices included).  Hessians are central differences of the exact
    gradient at the interior points, with step ``1e-5 h_T``.
    """
    g1 = np.empty(len(polygons))
    g2 = np.empty(len(polygons))
    ppp = 0
    for n, ks in _by_n(polygons).items():
        corners = np.array([polygons[k] for k in ks])
        geom = element_geometry(corners)
        h = geom.diameter
        pts, _ = polygon_rule_batch(corners, degree)
        _, gi, _ = basis_batch(geom, pts, laplacian=False)
        ge = _edge_gradients(geom, EDGE_SAMPLES)
        mag = np.concatenate(
            [np.linalg.norm(gi, axis=-1), np.linalg.norm(ge, axis=-1)], axis=1
        )
        g1[ks] = mag.max(axis=(1, 2)) * h
        step = (FD_STEP * h)[:, None, None]
        cols = []
        for d in range(2):
            e = np.zeros(2)
            e[d] = 1.0
            _, gp, _ = basis_batch(geom, pts + step * e, laplacian=False)
            _, gm, _ = basis_batch(geom, pts - step * e, laplacian=False)
            cols.append((gp - gm) / (2.0 * step[..., None]))
        H = np.stack(cols, axis=-1)  # (E, P, n, 2, 2)
        H = 0.5 * (H + np.swapaxes(H, -1, -2))
        hn = np.abs(np.linalg.eigvalsh(H)).max(axis=-1)
        # triangle coordinates are affine; differences would only return noise
        g2[ks] = 0.0 if n == 3 else hn.max(axis=(1, 2)) * h**2
        ppp = max(ppp, pts.shape[1] + ge.shape[1])
    return _report(
        "derivative_bounds", "derivative bounds of Wachspress coordinates",
        polygons, ppp, {"grad_h": g1, "hess_h2": g2},
    )


# -- Jacobian of the reference map -------------------------------------------------

def check_jacobian_bounds(polygons, degree=12, oracle_every=1):
    """Ranges of ``det J / h_T^2``, ``|J|_2 / h_T`` and ``|J^-1|_2 h_T``.

    Raises :class:`NonPositiveDeterminant` if any sampled determinant is not
    positive.  ``oracle_deviation`` in the report is the largest relative gap
    between the assembled determinant and the triple-product expansion.
    """
    dmin = np.empty(len(polygons))
    dmax = np.empty(len(polygons))
    jmax = np.empty(len(polygons))
    imax = np.empty(len(polygons))
    pairs = 0
    oracle = 0.0
    ppp = 0
    for n, ks in _by_n(polygons).items():
        ref_pts, _ = polygon_rule_batch(reference_polygon(n).vertices[None], degree)
        ref_pts = ref_pts[0]
        corners = np.array([polygons[k] for k in ks])
        h = element_geometry(corners).diameter
        _, J, det = map_batch(corners, ref_pts)
        bad = np.argwhere(~(det > 0.0))
        if len(bad):
            e, p = bad[0]
            raise NonPositiveDeterminant(int(ks[e]), float(det[e, p]))
        pairs += det.size
        ppp = max(ppp, det.shape[1])
        if oracle_every:
            sub = slice(None, None, oracle_every)
            expd = jacobian_det_expansion(corners[sub], ref_pts)
            oracle = max(oracle, float(np.max(np.abs(expd - det[sub]) / np.abs(det[sub]))))
        s = np.linalg.svd(J, compute_uv=False)  # (E, P, 2)
        r = det / (h**2)[:, None]
        dmin[ks] = r.min(axis=1)
        dmax[ks] = r.max(axis=1)
        jmax[ks] = s[..., 0].max(axis=1) / h
        imax[ks] = (1.0 / s[..., 1]).max(axis=1) * h
    rep = _report(
        "map_jacobian", "Jacobian of the reference-to-element map",
        polygons, ppp,
        {"det_min_h2": dmin, "det_max_h2": dmax, "jac_h": jmax, "jac_inv_h": imax},
    )
    rep.pairs = pairs
    rep.oracle_deviation = oracle
    return rep


# -- inverse estimate on span{l_i, lap l_i} ----------------------------------------

def _lap_gradient(geom, pts):
    """Central differences of the exact Laplacians, step ``1e-4 h_T``."""
    step = (1e-4 * geom.diameter)[:, None, None]
    cols = []
    for d in range(2):
        e = np.zeros(2)
        e[d] = 1.0
        _, _, lp = basis_batch(geom, pts + step * e, laplacian=True)
        _, _, lm = basis_batch(geom, pts - step * e, laplacian=True)
        cols.append((lp - lm) / (2.0 * step))
    return np.stack(cols, axis=-1)


def _random_coefficients(count, dim, seed):
    return np.random.default_rng(seed).standard_normal((count, dim))


def check_inverse_estimate(polygons, n_functions=20, degree=10, seed=1, coefficients=None):
    """Max of ``|v|_1 h_T / |v|_0`` over random ``v = sum a_i l_i + b_i h_T^2 lap l_i``.

    ``coefficients`` (rows of length ``2n``: the ``a`` block, then ``b``)
    replaces the random draw; all polygons must then share one ``n``.
    """
    out = np.empty(len(polygons))
    ppp = 0
    for n, ks in _by_n(polygons).items():
        corners = np.array([polygons[k] for k in ks])
        geom = element_geometry(corners)
        h = geom.diameter
        pts, w = polygon_rule_batch(corners, degree)
        lam, glam, llam = basis_batch(geom, pts, laplacian=True)
        glap = _lap_gradient(geom, pts)
        h2 = (h**2)[:, None, None]
        vals = np.concatenate([lam, h2 * llam], axis=-1)  # (E, P, 2n)
        grads = np.concatenate([glam, h2[..., None] * glap], axis=-2)
        if coefficients is None:
            coef = _random_coefficients(n_functions, 2 * n, seed + n)
        else:
            coef = np.atleast_2d(np.asarray(coefficients, dtype=float))
        v = np.einsum("epk,fk->efp", vals, coef)
        gv = np.einsum("epkd,fk->efpd", grads, coef)
        l2 = np.sqrt(np.einsum("ep,efp->ef", w, v * v))
        h1 = np.sqrt(np.einsum("ep,efpd->ef", w, gv * gv))
        out[ks] = (h1 * h[:, None] / l2).max(axis=1)
        ppp = max(ppp, pts.shape[1])
    return _report(
        "inverse_estimate", "inverse estimate on span{l_i, lap l_i}",
        polygons, ppp, {"h1_h_over_l2": out},
    )


# -- edge inverse estimate -----------------------------------------------------------

def neighbour_on_edge(first, second, edge=0, edge2=0):
    """Similarity copy of ``second`` whose edge ``edge2`` lies on ``first``'s
    edge ``edge`` (reversed), on the far side."""
    a, b = first[edge], first[(edge + 1) % len(first)]
    c, d = second[edge2], second[(edge2 + 1) % len(second)]
    # map c -> b, d -> a by a complex-affine similarity z -> s z + t
    zc, zd = complex(*c), complex(*d)
    za, zb = complex(*a), complex(*b)
    s = (za - zb) / (zd - zc)
    t = zb - s * zc
    z = s * (second[:, 0] + 1j * second[:, 1]) + t
    out = np.column_stack([z.real, z.imag])
    return np.roll(out, -edge2, axis=0)  # mapped edge becomes edge 0 (from b to a)


def sample_edge_pairs(count, seed=0):
    """Pairs ``(T1, T2)`` sharing edge 0 of ``T1`` (= edge 0 of ``T2``, reversed)."""
    P = sample_polygons(2 * count, seed)
    return [(P[2 * k], neighbour_on_edge(P[2 * k], P[2 * k + 1])) for k in range(count)]


def _edge_normal_derivs(corners, t):
    """``grad l_i . n`` along edge 0 at parameters ``t``; n = outward of edge 0."""
    geom = element_geometry(corners[None])
    _, g, _ = edge_basis_batch(geom, t, laplacian=False, edge=0)
    return np.einsum("pid,d->pi", g[0], geom.normals[0, 0])


def check_edge_inverse(pairs, n_functions=20, seed=2, n_dense=2001, fd=1e-5, coefficients=None):
    """``|d_t v|_e h_e / |v|_e`` and ``|v|_inf h_e^(1/2) / |v|_e`` for ``v`` in
    the span of normal derivatives from both sides of a shared edge.

    Coefficients are random unless ``coefficients`` (one row per function,
    first the ``T1`` basis then the ``T2`` basis) is given; the latter is
    applied to every pair.
    """
    tq, wq = gauss_legendre_01(16)
    tdense = np.linspace(0.0, 1.0, n_dense)
    r_tan = np.empty(len(pairs))
    r_sup = np.empty(len(pairs))
    for k, (T1, T2) in enumerate(pairs):
        he = float(np.linalg.norm(T1[1] - T1[0]))

        def basis(t):
            # T2's edge 0 runs the other way: its parameter is 1 - t
            return np.concatenate(
                [_edge_normal_derivs(T1, t), _edge_normal_derivs(T2, 1.0 - t)], axis=1
            )

        if coefficients is None:
            coef = _random_coefficients(n_functions, len(T1) + len(T2), seed + k)
        else:
            coef = np.atleast_2d(np.asarray(coefficients, dtype=float))
        V = basis(tq) @ coef.T  # (P, F)
        dV = (basis(np.clip(tq + fd, 0, 1)) - basis(np.clip(tq - fd, 0, 1))) @ coef.T / (2 * fd * he)
        Vd = basis(tdense) @ coef.T
        l2 = np.sqrt(he * (wq @ (V * V)))
        dl2 = np.sqrt(he * (wq @ (dV * dV)))
        r_tan[k] = np.max(dl2 * he / l2)
        r_sup[k] = np.max(np.abs(Vd).max(axis=0) * np.sqrt(he) / l2)
    polys = [p[0] for p in pairs]
    return _report(
        "edge_inverse", "inverse estimates for normal-derivative traces on an edge",
        polys, len(tq), {"tangential": r_tan, "sup": r_sup},
    )


def edge_ratios_of_traces(values, tangential, he, w):
    """Ratios for explicitly tabulated ``v`` and ``d_t v`` on a rule ``w``."""
    l2 = np.sqrt(he * (w @ values**2))
    return np.sqrt(he * (w @ tangential**2)) * he / l2, np.abs(values).max() * np.sqrt(he) / l2


# -- trace inequality --------------------------------------------------------------

def _family(lam, glam, rng_coef):
    """The constant, basis functions, pairwise products and random
    combinations of the products."""
    n = lam.shape[-1]
    vals = [lam.sum(axis=-1)] + [lam[..., i] for i in range(n)]
    grads = [glam.sum(axis=-2)] + [glam[..., i, :] for i in range(n)]
    for i in range(n):
        for j in range(i, n):
            vals.append(lam[..., i] * lam[..., j])
            grads.append(lam[..., i, None] * glam[..., j, :] + lam[..., j, None] * glam[..., i, :])
    # random combination of the products
    P = np.stack(vals[n + 1:], axis=-1)
    GP = np.stack(grads[n + 1:], axis=-2)
    for c in rng_coef:
        vals.append(P @ c)
        grads.append(np.einsum("...kd,k->...d", GP, c))
    return np.stack(vals, axis=-1), np.stack(grads, axis=-2)


def check_trace_inequality(polygons, degree=10, n_random=5, seed=3):
    """Max over edges and ``v`` of ``|v|_e / (h^-1/2 |v|_T + h^1/2 |v|_1,T)``."""
    out = np.empty(len(polygons))
    tq, wq = gauss_legendre_01(12)
    ppp = 0
    for n, ks in _by_n(polygons).items():
        corners = np.array([polygons[k] for k in ks])
        geom = element_geometry(corners)
        h = geom.diameter
        rng = np.random.default_rng(seed + n)
        coef = rng.standard_normal((n_random, n * (n + 1) // 2))
        pts, w = polygon_rule_batch(corners, degree)
        lam, glam, _ = basis_batch(geom, pts, laplacian=False)
        V, G = _family(lam, glam, coef)
        l2 = np.sqrt(np.einsum("ep,epf->ef", w, V * V))
        h1 = np.sqrt(np.einsum("ep,epfd->ef", w, G * G))
        denom = l2 / np.sqrt(h)[:, None] + np.sqrt(h)[:, None] * h1
        best = np.zeros(len(ks))
        for e in range(n):
            le, ge, _ = edge_basis_batch(geom, tq, laplacian=False, edge=e)
            Ve, _ = _family(le, ge, coef)
            L = geom.edge_lengths[:, e]
            el2 = np.sqrt(L[:, None] * np.einsum("p,epf->ef", wq, Ve * Ve))
            best = np.maximum(best, (el2 / denom).max(axis=1))
        out[ks] = best
        ppp = max(ppp, pts.shape[1])
    return _report(
        "trace_inequality", "trace inequality",
        polygons, ppp, {"trace": out},
    )


# -- battery -------------------------------------------------------------------------

def _scaled(polygons, s):
    return [s * p for p in polygons]


def _scaled_pairs(pairs, s):
    return [(s * a, s * b) for a, b in pairs]


def scale_invariance(check, samples, scales=SCALES, scaler=_scaled, **kw):
    """Run ``check`` at scale 1 and on scaled copies; return the base report
    with ``scale_deviation`` set to the largest relative ratio change."""
    base = check(samples, **kw)
    dev = 0.0
    for s in scales:
        other = check(scaler(samples, s), **kw)
        for name, r in base.ratios.items():
            r2 = other.ratios[name]
            dev = max(dev, float(np.max(np.abs(r2 - r) / np.maximum(np.abs(r), 1e-300))))
    base.scale_deviation = dev
    return base


@dataclass
class BatteryConfig:
    gradient: int = 200
    jacobian: int = 500
    inverse: int = 100
    edge: int = 100
    trace: int = 200
    seed: int = 0


def run_battery(cfg=BatteryConfig(), with_brackets=True):
    polys = {
        name: sample_polygons(getattr(cfg, name), cfg.seed + k)
        for k, name in enumerate(("gradient", "jacobian", "inverse", "trace"))
    }
    pairs = sample_edge_pairs(cfg.edge, cfg.seed + 10)
    reports = [
        scale_invariance(check_gradient_bound, polys["gradient"]),
        scale_invariance(check_jacobian_bounds, polys["jacobian"]),
        scale_invariance(check_inverse_estimate, polys["inverse"]),
        scale_invariance(check_edge_inverse, pairs, scaler=_scaled_pairs),
        scale_invariance(check_trace_inequality, polys["trace"]),
    ]
    if with_brackets:
        brackets = load_brackets()
        for r in reports:
            r.bracket = brackets.get(r.lemma, {})
    return reports


# -- bracket files -------------------------------------------------------------------

BRACKET_FILE = "lemma_brackets.json"


def load_brackets(path=None):
    if path is not None:
        return json.loads(Path(path).read_text())
    try:
        text = resources.files("polyafem").joinpath("data", BRACKET_FILE).read_text()
    except FileNotFoundError:
        return {}
    return json.loads(text)


def brackets_from_reports(reports, margin=BRACKET_MARGIN):
    """Per-n brackets: observed minima divided and maxima multiplied by ``margin``."""
    out = {}
    for r in reports:
        out[r.lemma] = {}
        for name in r.ratios:
            out[r.lemma][name] = {
                str(n): [lo / margin, hi * margin] for n, (lo, hi) in r.observed_by_n(name).items()
            }
    return out


def write_brackets(reports, path):
    Path(path).write_text(json.dumps(brackets_from_reports(reports), indent=2, sort_keys=True) + "\n")


def write_reports(reports, directory):
    import csv

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    lines = []
    for r in reports:
        with open(d / f"{r.lemma}.csv", "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(r.rows())
        lines.extend(r.summary_lines())
        lines.append("")
    (d / "summary.txt").write_text("\n".join(lines))
