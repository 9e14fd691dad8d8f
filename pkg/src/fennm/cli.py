"""Command-line entry point: ``fennm run|sweep-quadrature|sweep-convergence|refine|baseline``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import baselines, harness
from .io import write_json
from .mesh import uniform_mesh
from .problems import PROBLEMS, get_problem


def _config(args) -> harness.RunConfig:
    cfg = harness.RunConfig.load(args.config)
    over = {}
    if getattr(args, "output", None):
        over["output_dir"] = args.output
    if getattr(args, "seeds", None):
        over["seeds"] = tuple(args.seeds)
    return harness.RunConfig.from_dict({**cfg.to_dict(), **over}) if over else cfg


def _summary(report) -> str:
    m = report.metrics
    return (f"seed={report.seed} avg_abs_error={m['avg_abs_error']:.3e} "
            f"max_abs_error={m['max_abs_error']:.3e} diverged={report.diverged}")


def cmd_run(args) -> int:
    cfg = _config(args)
    if cfg.output_dir is None:
        cfg = harness.RunConfig.from_dict({**cfg.to_dict(), "output_dir": "runs/" + cfg.problem})
    for rep in harness.run_seeds(cfg):
        print(_summary(rep))
    print(f"wrote {cfg.output_dir}")
    return 0


def _sweep_base(args) -> harness.RunConfig:
    if args.config:
        cfg = harness.RunConfig.load(args.config)
    else:
        cfg = harness.RunConfig.for_problem(args.problem)
    over = {}
    if args.adam_epochs is not None:
        over["adam_epochs"] = args.adam_epochs
    if args.lbfgs_epochs is not None:
        over["lbfgs_epochs"] = args.lbfgs_epochs
    return harness.RunConfig.from_dict({**cfg.to_dict(), **over}) if over else cfg


def cmd_sweep_quadrature(args) -> int:
    base = _sweep_base(args)
    table = harness.quadrature_sweep(args.problem, args.degrees, args.q, base, args.seeds,
                                     out=args.output)
    for r in table["rows"]:
        flag = " (below minimum)" if r["below_min_points"] else ""
        print(f"p={r['degree']} Q={r['q']:2d} median_avg_abs_error={r['median_avg_abs_error']:.3e}{flag}")
    print("saturation Q:", table["saturation_q"])
    return 0


def cmd_sweep_convergence(args) -> int:
    base = _sweep_base(args)
    table = harness.convergence_sweep(args.problem, args.degrees, args.mesh_sizes, args.seeds,
                                      base, probe=args.probe, out=args.output)
    for r in table["rows"]:
        print(f"p={r['degree']} N_el={r['n_elements']:4d} median={r['median_rel_error']:.3e} "
              f"CI=[{r['ci_low']:.2e}, {r['ci_high']:.2e}] dof={r['fennm_dof']} "
              f"fem_dof={r['fem_dof']}")
    print("slopes:", table["slopes"])
    return 0


def cmd_refine(args) -> int:
    cfg = _config(args)
    rep = harness.refine_loop(cfg, args.cycles, args.beta, args.gamma)
    for c in rep.metrics["cycles"]:
        print(f"cycle {c['cycle']}: N_el={c['n_elements']} "
              f"peak_strong_residual={c['peak_strong_residual']:.3e}")
    print("stop:", rep.metrics["stop_reason"])
    return 0


def cmd_baseline(args) -> int:
    out = Path(args.output)
    if args.method == "fem":
        prob = get_problem(args.problem)
        mesh = uniform_mesh(*prob.domain, args.elements)
        sol = baselines.fem_solve(prob, mesh, args.degree)
        x = np.linspace(*prob.domain, args.grid_points)
        u, ref = sol(x), prob.oracle(x)
        extra = {"dof": sol.dof, "nodal": sol.nodal}
    elif args.method == "rk45":
        prob = get_problem(args.problem)
        if not prob.name.startswith("pendulum"):
            raise SystemExit("rk45 baseline applies to the pendulum problems")
        c = prob.constants
        gl = c["g"] / c["L"]
        sol = baselines.rk45_solve(
            lambda t, y: np.array([y[1], -c["c"] * y[1] - gl * np.sin(y[0])]),
            np.array([c["theta0"], 0.0]), prob.domain, args.rtol, args.atol)
        x = np.linspace(*prob.domain, args.grid_points)
        y = sol(x)
        u, ref = y[0], y[0]
        extra = {"energy": (0.5 * c["L"] ** 2 * y[1] ** 2 + c["g"] * c["L"] * (1 - np.cos(y[0])))}
    else:
        prob = get_problem("poisson-discontinuous")
        sol = baselines.fdm_solve(prob.forcing, args.points, prob.domain)
        x, u = sol.x, sol.u
        ref = prob.oracle(x)
        extra = {}
    baselines.export_solution(out / "solution.csv", x, u, ref)
    pwe = np.abs(u - ref)
    write_json(out / "metrics.json", {"method": args.method, "problem": prob.name,
                                      "avg_abs_error": float(pwe.mean()),
                                      "max_abs_error": float(pwe.max()), **extra})
    print(f"{args.method} {prob.name}: max_abs_error={pwe.max():.3e}; wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fennm", description="Finite element neural network method")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train one configuration")
    p.add_argument("config")
    p.add_argument("--output")
    p.add_argument("--seeds", type=int, nargs="+")
    p.set_defaults(func=cmd_run)

    for name, func in (("sweep-quadrature", cmd_sweep_quadrature),
                       ("sweep-convergence", cmd_sweep_convergence)):
        p = sub.add_parser(name)
        p.add_argument("--problem", default="equilibrium", choices=sorted(PROBLEMS))
        p.add_argument("--config", help="base JSON config")
        p.add_argument("--degrees", type=int, nargs="+", default=[1, 2, 3, 4])
        p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
        p.add_argument("--adam-epochs", type=int)
        p.add_argument("--lbfgs-epochs", type=int)
        p.add_argument("--output", default=f"runs/{name}")
        if name == "sweep-quadrature":
            p.add_argument("--q", type=int, nargs="+", default=list(range(1, 16)))
        else:
            p.add_argument("--mesh-sizes", type=int, nargs="+", default=[1, 2, 4, 8, 16, 32])
            p.add_argument("--probe", type=float, default=1.5)
        p.set_defaults(func=func)

    p = sub.add_parser("refine", help="adaptive refinement loop")
    p.add_argument("config")
    p.add_argument("--cycles", type=int, default=3)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--gamma", type=float, default=0.2)
    p.add_argument("--output")
    p.add_argument("--seeds", type=int, nargs="+")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("baseline", help="classical reference solvers")
    p.add_argument("method", choices=["fem", "rk45", "fdm"])
    p.add_argument("--problem", default="equilibrium", choices=sorted(PROBLEMS))
    p.add_argument("--elements", type=int, default=22)
    p.add_argument("--degree", type=int, default=1, choices=[1, 2])
    p.add_argument("--points", type=int, default=2001)
    p.add_argument("--rtol", type=float, default=1e-10)
    p.add_argument("--atol", type=float, default=1e-12)
    p.add_argument("--grid-points", type=int, default=1001)
    p.add_argument("--output", default="runs/baseline")
    p.set_defaults(func=cmd_baseline)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"fennm: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
