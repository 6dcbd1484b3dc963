"""Experiment driver: runs the loop and writes tables, meshes and pictures."""

import csv
import math
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .adapt import AdaptRecord, ExperimentConfig, adaptive_loop, fit_slope
from .export import export_svg, export_vtk
from .mesh import write_mesh

# initial meshes used for the reference runs
PRESETS = {
    1: dict(style="polygonal", resolution=7, seed=0),
    2: dict(style="polygonal", resolution=7, seed=0),
    3: dict(style="polygonal", resolution=4, seed=0),
}
SNAPSHOT_ITERATIONS = (0, 4, 8)
FIT_LEVELS = 4

# slope windows for |u - u_h|_1 against Dof, per (example, mode)
SLOPE_WINDOWS = {
    (1, "uniform"): (-0.60, -0.40),
    (1, "adaptive"): (-0.60, -0.40),
    (2, "uniform"): (-0.60, -0.40),
    (2, "adaptive"): (-0.60, -0.40),
    (3, "uniform"): (-0.40, -0.28),
    (3, "adaptive"): (-0.60, -0.42),
}
EFFECTIVITY_RANGE = (3.0, 10.0)
EFFECTIVITY_SKIP = 2  # levels excluded from the range check
EFFECTIVITY_SPREAD = 0.25  # over the final three levels


def preset_config(example, mode="adaptive", **overrides):
    kw = dict(PRESETS[int(example)])
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(example=int(example), mode=mode, **kw)


def _cell(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


class ConvergenceWriter:
    """CSV writer that flushes one row per level."""

    def __init__(self, path):
        self.fh = open(path, "w", newline="")
        self.w = csv.writer(self.fh, lineterminator="\n")
        self.w.writerow(AdaptRecord.FIELDS)
        self.fh.flush()

    def write(self, rec):
        self.w.writerow([_cell(v) for v in rec.row()])
        self.fh.flush()

    def close(self):
        self.fh.close()


def read_convergence(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append(AdaptRecord(
            int(r["iter"]), int(r["dof"]),
            *(float(r[k]) if r[k] else math.nan for k in AdaptRecord.FIELDS[2:7]),
            int(r["n_elements"]), int(r["n_marked"]), float(r["wall_ms"]),
        ))
    return out


def effectivity_spread(values):
    v = np.asarray(values, dtype=float)
    return float((v.max() - v.min()) / v.min())


def run_checks(records, example, mode, fit_levels=FIT_LEVELS, max_fit_dof=None):
    """Rate and effectivity checks for one run: list of ``(name, ok, detail)``."""
    recs = [r for r in records if max_fit_dof is None or r.dof <= max_fit_dof]
    dofs = [r.dof for r in recs]
    errs = [r.h1_error for r in recs]
    out = []
    lo, hi = SLOPE_WINDOWS[(int(example), mode)]
    s = fit_slope(dofs, errs, fit_levels)
    out.append(("slope", lo <= s <= hi, f"fitted slope {s:.4f} (window [{lo}, {hi}])"))
    eff = [r.effectivity for r in records]
    tail = eff[EFFECTIVITY_SKIP:]
    elo, ehi = EFFECTIVITY_RANGE
    ok = bool(tail) and all(elo <= e <= ehi for e in tail)
    rng = f"[{min(tail):.3f}, {max(tail):.3f}]" if tail else "[]"
    out.append(("effectivity range", ok, f"effectivity past level {EFFECTIVITY_SKIP} in {rng}"))
    sp = effectivity_spread(eff[-3:]) if len(eff) >= 3 else math.inf
    out.append(("effectivity spread", sp < EFFECTIVITY_SPREAD, f"final-3 spread {sp:.3f}"))
    return out


def summary_text(config, records, checks=None):
    dofs = [r.dof for r in records]
    errs = [r.h1_error for r in records]
    etas = [r.eta_h for r in records]
    lines = [f"example {config.example}, mode {config.mode}"]
    lines.append(
        "config: " + ", ".join(f"{k}={v}" for k, v in asdict(config).items() if k != "out")
    )
    lines.append(f"levels: {len(records)}, final Dof {dofs[-1]}")
    lines.append(f"slope of error vs Dof (all levels):      {fit_slope(dofs, errs):.4f}")
    lines.append(f"slope of error vs Dof (last {FIT_LEVELS} levels): {fit_slope(dofs, errs, FIT_LEVELS):.4f}")
    lines.append(f"slope of eta vs Dof (all levels):        {fit_slope(dofs, etas):.4f}")
    lines.append(f"slope of eta vs Dof (last {FIT_LEVELS} levels):   {fit_slope(dofs, etas, FIT_LEVELS):.4f}")
    lines.append("")
    lines.append(f"{'iter':>4} {'Dof':>7} {'|u-u_h|_1':>12} {'eta_h':>12} {'order':>7} {'eff':>7}")
    for r in records:
        o = "--" if math.isnan(r.order_error) else f"{r.order_error:.3f}"
        lines.append(
            f"{r.iter:>4} {r.dof:>7} {r.h1_error:>12.4e} {r.eta_h:>12.4e} {o:>7} {r.effectivity:>7.3f}"
        )
    if checks:
        lines.append("")
        for name, ok, detail in checks:
            lines.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return "\n".join(lines) + "\n"


def run_experiment(config, out=None, vtk=True, svg=True, checks=False):
    """Run and write ``convergence.csv``, ``summary.txt``, ``final_mesh.json``,
    ``indicators.csv``, per-level ``level_XX.vtk`` and ``mesh_iter_K.svg``.

    Returns ``(records, check_results)``; the second is None unless
    ``checks`` is set.
    """
    out = out or config.out
    d = Path(out) if out else None
    if d is not None:
        d.mkdir(parents=True, exist_ok=True)
        writer = ConvergenceWriter(d / "convergence.csv")
    last = {}

    def on_level(state):
        k = state.record.iter
        last["state"] = state
        if d is None:
            return
        writer.write(state.record)
        if vtk:
            export_vtk(state.mesh, d / f"level_{k:02d}.vtk", state.solution, state.estimate)
        if svg and k in SNAPSHOT_ITERATIONS:
            marked = state.marked.elements if state.marked is not None and config.mode == "adaptive" else None
            export_svg(state.mesh, d / f"mesh_iter_{k}.svg", highlight=marked)

    try:
        records = adaptive_loop(config, on_level=on_level)
    finally:
        if d is not None:
            writer.close()
    result = run_checks(records, config.example, config.mode) if checks else None
    if d is not None:
        final = last["state"]
        write_mesh(final.mesh, d / "final_mesh.json")
        final.estimate.write_csv(d / "indicators.csv")
        (d / "summary.txt").write_text(summary_text(config, records, result))
    return records, result


def with_overrides(config, **kw):
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
