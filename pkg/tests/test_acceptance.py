"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (about ten minutes on
one core) or as a script: ``python3 tests/test_acceptance.py``.
"""

import time

import numpy as np
import pytest

from polyafem.adapt import adaptive_loop, child_polygons
from polyafem.assembly import assemble, assemble_full, build_dofmap, reconstruct, solve_cg
from polyafem.basis import basis_batch, edge_basis_batch, eval_basis
from polyafem.estimate import estimate_all
from polyafem.experiment import preset_config, run_checks, run_experiment
from polyafem.geometry import element_geometry, is_strictly_convex
from polyafem.mesh import build_topology, generate_initial_mesh
from polyafem.quadrature import polygon_rule_batch
from polyafem.verify import BatteryConfig, run_battery, sample_polygons

RESULTS = {}

# Example 3, uniform: solve one level past 15000 Dof for the comparison of
# criterion 9; rates are fitted on the levels up to 15000.
EX3_UNIFORM_MAX_DOF = 25000
EX3_FIT_DOF = 15000
MAX_DOF = {1: 24000, 2: 24000, 3: 15000}


def record(number, ok, detail):
    RESULTS[number] = (bool(ok), detail)
    print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
    assert ok, detail


def hanging_chain_free(mesh):
    return all(p not in mesh.hanging and q not in mesh.hanging for p, q in mesh.hanging.values())


class Run:
    """One experiment, with mesh checks on every level."""

    def __init__(self, example, mode, max_dof):
        self.cfg = preset_config(example, mode, max_dof=max_dof, timings=False)
        self.mesh_ok = True
        self.levels = 0

        def on_level(state):
            m = state.mesh
            self.levels += 1
            area = 3.0 if example == 3 else 1.0
            self.mesh_ok &= hanging_chain_free(m)
            self.mesh_ok &= abs(m.areas.sum() - area) <= 1e-10 * area

        t0 = time.perf_counter()
        self.records = adaptive_loop(self.cfg, on_level=on_level)
        self.seconds = time.perf_counter() - t0


_RUNS = {}


def run(example, mode):
    key = (example, mode)
    if key not in _RUNS:
        cap = EX3_UNIFORM_MAX_DOF if key == (3, "uniform") else MAX_DOF[example]
        _RUNS[key] = Run(example, mode, cap)
    return _RUNS[key]


# -- 1 -------------------------------------------------------------------------

def test_criterion_1_basis_identities():
    t0 = time.perf_counter()
    polys = sample_polygons(1000, seed=2024)
    worst = np.zeros(3)
    groups = {}
    for p in polys:
        groups.setdefault(len(p), []).append(p)
    for n, ps in groups.items():
        corners = np.array(ps)
        geom = element_geometry(corners)
        h = geom.diameter
        pts, _ = polygon_rule_batch(corners, 6)
        lam, _, _ = basis_batch(geom, pts, laplacian=False)
        worst[0] = max(worst[0], np.abs(lam.sum(axis=-1) - 1).max())
        lin = np.einsum("epi,eid->epd", lam, corners) - pts
        worst[1] = max(worst[1], (np.abs(lin).max(axis=(1, 2)) / h).max())
        for i in range(n):
            # vertex i is the start of edge i
            lv, _, _ = edge_basis_batch(geom, np.zeros(1), edge=i)
            worst[2] = max(worst[2], np.abs(lv[:, 0] - np.eye(n)[i]).max())
    dt = time.perf_counter() - t0
    ok = worst[0] <= 1e-12 and worst[1] <= 1e-12 and worst[2] <= 1e-12 and dt < 5.0
    record(1, ok, f"1000 polygons: partition {worst[0]:.2e}, linear precision {worst[1]:.2e} h_T, "
                  f"Lagrange {worst[2]:.2e}, {dt:.2f} s")


# -- 2 -------------------------------------------------------------------------

def _single(corners):
    m = build_topology(np.asarray(corners, dtype=float), [list(range(len(corners)))])
    return assemble_full(m)[0].toarray()


def test_criterion_2_oracle_equivalence():
    rng = np.random.default_rng(5)
    dev_tri = dev_sq = 0.0
    for T in [p for p in sample_polygons(60, seed=8) if len(p) == 3]:
        A = np.vstack([T.T, np.ones(3)])
        for _ in range(5):
            x = rng.dirichlet(np.ones(3)) @ T
            dev_tri = max(dev_tri, np.abs(eval_basis(T, x).values - np.linalg.solve(A, np.append(x, 1))).max())
    S = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    for x, y in rng.uniform(0, 1, (50, 2)):
        bil = [(1 - x) * (1 - y), x * (1 - y), x * y, (1 - x) * y]
        dev_sq = max(dev_sq, np.abs(eval_basis(S, (x, y)).values - bil).max())
    dev_cot = 0.0
    for T in [p for p in sample_polygons(60, seed=9) if len(p) == 3]:
        ref = np.zeros((3, 3))
        for k in range(3):
            i, j = (k + 1) % 3, (k + 2) % 3
            u, v = T[i] - T[k], T[j] - T[k]
            ref[i, j] = ref[j, i] = -0.5 * (u @ v) / abs(u[0] * v[1] - u[1] * v[0])
        ref[np.diag_indices(3)] = -ref.sum(axis=1)
        dev_cot = max(dev_cot, np.abs(_single(T) - ref).max() / np.abs(ref).max())
    q1 = np.array([[4, -1, -2, -1], [-1, 4, -1, -2], [-2, -1, 4, -1], [-1, -2, -1, 4]]) / 6
    dev_q1 = np.abs(_single(S) - q1).max()
    ok = dev_tri <= 1e-12 and dev_sq <= 1e-12 and dev_cot <= 1e-10 and dev_q1 <= 1e-8
    record(2, ok, f"barycentric {dev_tri:.2e}, bilinear {dev_sq:.2e}, cotangent {dev_cot:.2e}, Q1 {dev_q1:.2e}")


# -- 3 -------------------------------------------------------------------------

def test_criterion_3_derivative_oracles():
    rng = np.random.default_rng(17)
    g_err = l_err = 0.0
    for P in sample_polygons(100, seed=31):
        geom = element_geometry(P)
        h = float(geom.diameter)
        pts = []
        while len(pts) < 10:
            x = rng.dirichlet(np.ones(len(P))) @ P
            if geom.edge_distances(x[None]).min() >= 0.1 * h:
                pts.append(x)
        d1, d2 = 1e-6 * h, 1e-3 * h
        for x in pts:
            b = eval_basis(geom, x)
            val = lambda p: eval_basis(geom, p).values  # noqa: E731
            fd = np.column_stack([(val(x + [d1, 0]) - val(x - [d1, 0])) / (2 * d1),
                                  (val(x + [0, d1]) - val(x - [0, d1])) / (2 * d1)])
            g_err = max(g_err, np.abs(fd - b.gradients).max() / np.abs(b.gradients).max())
            lap = (val(x + [d2, 0]) + val(x - [d2, 0]) + val(x + [0, d2]) + val(x - [0, d2]) - 4 * b.values) / d2**2
            scale = max(np.abs(b.laplacians).max(), 1 / h**2)
            l_err = max(l_err, np.abs(lap - b.laplacians).max() / scale)
    record(3, g_err <= 1e-6 and l_err <= 1e-4,
           f"gradient vs central differences {g_err:.2e}, Laplacian vs second differences {l_err:.2e}")


# -- 4 -------------------------------------------------------------------------

def test_criterion_4_jacobian_and_scale_invariance():
    reports = run_battery(BatteryConfig(), with_brackets=False)
    jac = next(r for r in reports if r.lemma == "map_jacobian")
    det_min = float(jac.ratios["det_min_h2"].min())
    dev = max(r.scale_deviation for r in reports)
    ok = jac.pairs >= 10**5 and det_min > 0 and jac.oracle_deviation <= 1e-9 and dev <= 1e-9
    record(4, ok, f"{jac.pairs} (polygon, point) pairs, min det/h^2 {det_min:.3f}, "
                  f"expansion oracle {jac.oracle_deviation:.2e}, max scale deviation {dev:.2e} over "
                  f"{len(reports)} ratio families")


# -- 5 -------------------------------------------------------------------------

def test_criterion_5_patch_test():
    from polyafem.adapt import refine

    u = lambda x, y: 0.3 + 1.7 * x - 0.9 * y  # noqa: E731
    poly = generate_initial_mesh("unit_square", "polygonal", 6, seed=2)
    hang = refine(refine(poly, [0, 7, 12]), [1, 2, 3])
    meshes = {
        "grid": generate_initial_mesh("unit_square", "grid", 5),
        "polygonal": poly,
        "hanging": hang,
    }
    parts, ok = [], bool(hang.hanging)
    for name, m in meshes.items():
        dm = build_dofmap(m, u)
        sol = reconstruct(solve_cg(assemble(m, dm, None), rel_tol=1e-13), dm, m)
        err = np.abs(sol.values - u(*m.vertices.T)).max()
        eta = estimate_all(m, sol, None).eta
        ok &= err <= 1e-9 and eta <= 1e-8
        parts.append(f"{name} vertex error {err:.1e}, eta {eta:.1e}")
    record(5, ok, "; ".join(parts))


# -- 6 to 9: convergence experiments ---------------------------------------------

def _slope(r, window, max_fit_dof=None):
    name, ok, detail = run_checks(r.records, r.cfg.example, r.cfg.mode, max_fit_dof=max_fit_dof)[0]
    return ok, detail


def test_criterion_6_example3_rates():
    uni, ada = run(3, "uniform"), run(3, "adaptive")
    ok_u, du = _slope(uni, None, EX3_FIT_DOF)
    ok_a, da = _slope(ada, None, EX3_FIT_DOF)
    secs = uni.seconds + ada.seconds
    record(6, ok_u and ok_a and secs < 180,
           f"uniform {du}; adaptive {da}; runtime {secs:.0f} s")


def test_criterion_7_examples_1_2_rates():
    parts, ok = [], True
    for ex in (1, 2):
        uni, ada = run(ex, "uniform"), run(ex, "adaptive")
        ok_u, du = _slope(uni, None)
        ok_a, da = _slope(ada, None)
        secs = uni.seconds + ada.seconds
        ok &= ok_u and ok_a and secs < 300
        parts.append(f"example {ex}: uniform {du}, adaptive {da}, up to Dof "
                     f"{uni.records[-1].dof}/{ada.records[-1].dof}, {secs:.0f} s")
    record(7, ok, "; ".join(parts))


def test_criterion_8_effectivity():
    parts, ok = [], True
    for ex in (1, 2, 3):
        for mode in ("uniform", "adaptive"):
            r = run(ex, mode)
            recs = r.records
            if (ex, mode) == (3, "uniform"):
                recs = [x for x in recs if x.dof <= EX3_FIT_DOF]
            checks = run_checks(recs, ex, mode)
            ok &= checks[1][1] and checks[2][1]
            parts.append(f"ex{ex} {mode}: {checks[1][2]}, {checks[2][2]}")
    record(8, ok, "; ".join(parts))


def test_criterion_9_adaptivity_dominance():
    uni, ada = run(3, "uniform"), run(3, "adaptive")
    a = min(ada.records, key=lambda r: abs(r.dof - 12000))
    larger = [r for r in uni.records if r.dof >= a.dof]
    if not larger:
        record(9, False, f"no uniform level with Dof >= {a.dof}")
    u = min(larger, key=lambda r: r.dof)
    ratio = a.h1_error / u.h1_error
    record(9, ratio <= 0.55,
           f"adaptive {a.h1_error:.4g} at Dof {a.dof} vs uniform {u.h1_error:.4g} at Dof {u.dof}: ratio {ratio:.3f}")


# -- 10 ------------------------------------------------------------------------

def test_criterion_10_refinement_mechanics(tmp_path):
    bad_child = 0
    worst_area = 0.0
    for P in sample_polygons(1000, seed=99):
        m, x, kids = child_polygons(P)
        pts = np.vstack([P, m, x])
        bad_child += sum(not is_strictly_convex(pts[k]) for k in kids) + (len(kids) != len(P) + 1)
        parent = float(element_geometry(P).area)
        worst_area = max(worst_area, abs(sum(float(element_geometry(pts[k]).area) for k in kids) - parent) / parent)
    runs = list(_RUNS.values()) or [run(3, "adaptive")]
    meshes_ok = all(r.mesh_ok for r in runs)
    n_levels = sum(r.levels for r in runs)
    cfg = preset_config(3, "adaptive", max_dof=3000, timings=False)
    run_experiment(cfg, out=tmp_path / "a", vtk=False)
    run_experiment(cfg, out=tmp_path / "b", vtk=False)
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
               for f in ("convergence.csv", "final_mesh.json"))
    ok = bad_child == 0 and worst_area <= 1e-12 and meshes_ok and same
    record(10, ok, f"1000 parents: {bad_child} bad children, partition error {worst_area:.1e}; "
                   f"one-hanging-node rule held on {n_levels} meshes from {len(runs)} runs; "
                   f"repeat run byte-identical: {same}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
