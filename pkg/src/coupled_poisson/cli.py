"""Command line entry point.

    coupled-poisson solve CFG [--out-dir D] [--grid-nr N] [--grid-ntheta M] [--tol T] [--max-iter K]
    coupled-poisson certify CFG [--samples Ns] [--out-dir D]
    coupled-poisson oracle run-cases [--seeds S]

Exit codes: 0 success, 1 certificate failed or oracle case failed,
2 converged but outside the localization box, 3 no convergence,
4 configuration, evaluation or I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .certify import check_solution_in_box, verify_conditions
from .config import ConfigError, RunConfig, load_config
from .disk import GridFunction, read_csv, write_csv
from .exprlang import ExprError
from .hammerstein import fixed_point_residual, picard_solve
from .index_oracle import verify_theorem_cases
from .poisson import SolverBreakdown

log = logging.getLogger("coupled_poisson")

EXIT_OK, EXIT_FAIL, EXIT_OUTSIDE_BOX, EXIT_NO_CONVERGENCE, EXIT_ERROR = 0, 1, 2, 3, 4


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _gf_json(gf: GridFunction) -> dict:
    g = gf.grid
    return {"Nr": g.nr, "Ntheta": g.ntheta, "x": g.x1.ravel().tolist(),
            "y": g.x2.ravel().tolist(), "value": gf.values.ravel().tolist()}


def _initial_guess(cfg: RunConfig, grid):
    if cfg.initial_guess == "zero":
        return None, None
    src = Path(cfg.initial_guess)
    return read_csv(src / "u.csv", grid), read_csv(src / "v.csv", grid)


def cmd_solve(cfg: RunConfig) -> int:
    spec = cfg.problem()
    u0, v0 = _initial_guess(cfg, spec.grid)
    sol, trace = picard_solve(spec, u0, v0, tol=cfg.tol, max_iter=cfg.max_iter)
    box = check_solution_in_box(sol, cfg.box)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.format == "csv":
        write_csv(sol.u, out / "u.csv")
        write_csv(sol.v, out / "v.csv")
        trace.to_csv(out / "trace.csv")
    else:
        _dump_json(_gf_json(sol.u), out / "u.json")
        _dump_json(_gf_json(sol.v), out / "v.json")
        _dump_json([vars(r) for r in trace], out / "trace.json")

    summary = {
        "converged": sol.converged,
        "iterations": sol.iterations,
        "residual": sol.residual,
        "fixed_point_residual": fixed_point_residual(spec, sol),
        "norm_u": box.norm_u,
        "norm_v": box.norm_v,
        "box": box.to_dict(),
        "grid": {"Nr": cfg.grid_nr, "Ntheta": cfg.grid_ntheta},
        "tol": cfg.tol,
    }
    _dump_json(summary, out / "summary.json")
    print(f"converged={sol.converged} iterations={sol.iterations} "
          f"|u|={box.norm_u:.6f} |v|={box.norm_v:.6f} box={'pass' if box.passed else 'fail'}")
    if not sol.converged:
        return EXIT_NO_CONVERGENCE
    return EXIT_OK if box.passed else EXIT_OUTSIDE_BOX


def cmd_certify(cfg: RunConfig, ns: int = 33) -> int:
    cert = verify_conditions(cfg.problem(), cfg.box, cfg.bound_set(), ns)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(cert.to_dict(), out / "certificate.json")
    for name, c in cert.conditions.items():
        print(f"condition {name}: {'pass' if c.passed else 'FAIL'}  pointwise margin {c.pointwise_margin:.6g}  "
              f"integral {c.integral_value:.6f} vs radius {c.radius:.6f}")
    return EXIT_OK if cert.passed else EXIT_FAIL


def cmd_oracle(seeds: int = 8) -> int:
    results = verify_theorem_cases(seeds)
    print(json.dumps([r.to_dict() for r in results], indent=2))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coupled-poisson", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="Picard iteration for the coupled system")
    s.add_argument("config")
    s.add_argument("--out-dir")
    s.add_argument("--grid-nr", type=int)
    s.add_argument("--grid-ntheta", type=int)
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iter", type=int)

    c = sub.add_parser("certify", help="check the localization hypotheses")
    c.add_argument("config")
    c.add_argument("--samples", type=int, default=33, help="samples per u/v axis (Ns)")
    c.add_argument("--out-dir")

    o = sub.add_parser("oracle", help="finite-dimensional index checks")
    osub = o.add_subparsers(dest="oracle_command", required=True)
    rc = osub.add_parser("run-cases")
    rc.add_argument("--seeds", type=int, default=8, help="Newton seeds per axis")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "oracle":
            return cmd_oracle(args.seeds)
        cfg = load_config(args.config)
        if args.command == "solve":
            cfg = cfg.with_overrides(out_dir=args.out_dir, grid_nr=args.grid_nr, grid_ntheta=args.grid_ntheta,
                                     tol=args.tol, max_iter=args.max_iter)
            return cmd_solve(cfg)
        cfg = cfg.with_overrides(out_dir=args.out_dir)
        return cmd_certify(cfg, args.samples)
    except (ConfigError, ExprError, SolverBreakdown, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
