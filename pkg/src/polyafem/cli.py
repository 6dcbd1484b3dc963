"""Command line interface: ``polyafem run | verify | mesh``."""

import argparse
import sys
from pathlib import Path

from .errors import PolyAFEMError

EXIT_OK, EXIT_ERROR, EXIT_CHECK = 0, 1, 2


def _add_run(sub):
    p = sub.add_parser("run", help="run one convergence experiment")
    p.add_argument("--example", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--mode", choices=("uniform", "adaptive"), default="adaptive")
    p.add_argument("--theta", type=float, default=0.6)
    p.add_argument("--max-dof", type=int, default=30000)
    p.add_argument("--max-iter", type=int, default=60)
    p.add_argument("--style", choices=("grid", "polygonal"), default=None,
                   help="initial mesh style (default: per-example preset)")
    p.add_argument("--resolution", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--quad-degree", type=int, default=8)
    p.add_argument("--rel-tol", type=float, default=1e-10)
    p.add_argument("--uniform-refinement", choices=("regenerate", "polytree"), default="regenerate")
    p.add_argument("--out", default="results")
    p.add_argument("--no-vtk", action="store_true", help="skip per-level VTK files")
    p.add_argument("--no-timings", action="store_true",
                   help="write wall_ms = 0 so repeated runs give identical files")
    p.add_argument("--check", action="store_true",
                   help="exit with status 2 if rate or effectivity checks fail")


def _add_verify(sub):
    p = sub.add_parser("verify", help="run the scale-invariance battery")
    p.add_argument("--out", default="verify")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=None,
                   help="polygons per check (default: built-in sizes)")
    p.add_argument("--record", action="store_true",
                   help="rewrite the packaged bracket file from this run")
    p.add_argument("--brackets", default=None, help="bracket JSON to compare against")
    p.add_argument("--check", action="store_true", help="exit with status 2 on any failure")


def _add_mesh(sub):
    p = sub.add_parser("mesh", help="generate, inspect or convert meshes")
    msub = p.add_subparsers(dest="mesh_cmd", required=True)
    g = msub.add_parser("generate")
    g.add_argument("--domain", choices=("unit_square", "l_shape"), default="unit_square")
    g.add_argument("--style", choices=("grid", "polygonal"), default="grid")
    g.add_argument("--resolution", type=int, default=4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    i = msub.add_parser("inspect")
    i.add_argument("path")
    c = msub.add_parser("convert")
    c.add_argument("path")
    c.add_argument("target", help="output file, .vtk or .svg")


def build_parser():
    parser = argparse.ArgumentParser(prog="polyafem", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run(sub)
    _add_verify(sub)
    _add_mesh(sub)
    return parser


def cmd_run(args):
    from .experiment import preset_config, run_experiment

    cfg = preset_config(
        args.example, args.mode,
        style=args.style, resolution=args.resolution, seed=args.seed,
    )
    cfg.theta = args.theta
    cfg.max_dof = args.max_dof
    cfg.max_iter = args.max_iter
    cfg.quad_degree = args.quad_degree
    cfg.rel_tol = args.rel_tol
    cfg.uniform_refinement = args.uniform_refinement
    cfg.timings = not args.no_timings
    cfg.out = args.out
    records, checks = run_experiment(cfg, vtk=not args.no_vtk, checks=args.check)
    print((Path(args.out) / "summary.txt").read_text(), end="")
    if checks and not all(ok for _, ok, _ in checks):
        return EXIT_CHECK
    return EXIT_OK


def cmd_verify(args):
    from importlib import resources

    from . import verify

    cfg = verify.BatteryConfig(seed=args.seed)
    if args.samples:
        for name in ("gradient", "jacobian", "inverse", "edge", "trace"):
            setattr(cfg, name, args.samples)
    reports = verify.run_battery(cfg, with_brackets=False)
    if args.record:
        target = resources.files("polyafem").joinpath("data", verify.BRACKET_FILE)
        verify.write_brackets(reports, str(target))
        print(f"recorded brackets to {target}")
    brackets = verify.load_brackets(args.brackets)
    for r in reports:
        r.bracket = brackets.get(r.lemma, {})
    verify.write_reports(reports, args.out)
    for r in reports:
        print("\n".join(r.summary_lines()))
    jac = next(r for r in reports if r.lemma == "map_jacobian")
    print(f"determinant samples: {jac.pairs}, oracle deviation {jac.oracle_deviation:.3g}")
    if args.check and not all(r.passed for r in reports):
        return EXIT_CHECK
    return EXIT_OK


def cmd_mesh(args):
    from .mesh import generate_initial_mesh, read_mesh, regularity_report, write_mesh

    if args.mesh_cmd == "generate":
        m = generate_initial_mesh(args.domain, args.style, args.resolution, args.seed)
        write_mesh(m, args.out)
        print(f"wrote {args.out}: {m.n_elements} elements, {m.n_vertices} vertices")
        return EXIT_OK
    m = read_mesh(args.path)
    if args.mesh_cmd == "inspect":
        r = regularity_report(m)
        print(f"elements {m.n_elements}, vertices {m.n_vertices}, facets {m.n_facets}, "
              f"hanging {len(m.hanging)}")
        print(f"area {m.areas.sum():.12g}")
        print(f"C1 {r.C1:.4f}, C2 {r.C2:.4f}, angles [{r.theta_star_lower:.4f}, "
              f"{r.theta_star_upper:.4f}] rad, N {r.N}, M {r.M}")
        return EXIT_OK
    from .export import export_svg, export_vtk

    target = Path(args.target)
    if target.suffix == ".vtk":
        export_vtk(m, target)
    elif target.suffix == ".svg":
        export_svg(m, target)
    else:
        raise PolyAFEMError("convert target must end in .vtk or .svg")
    print(f"wrote {target}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return {"run": cmd_run, "verify": cmd_verify, "mesh": cmd_mesh}[args.command](args)
    except (PolyAFEMError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
