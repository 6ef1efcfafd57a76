"""Command-line front end.

    partialvar solve    --config cfg.yaml --out DIR
    partialvar curve    --config cfg.yaml --grid 0.05:4:400
    partialvar strategy --config cfg.yaml --t-grid 0:9.5:20 --y-grid -10:15:51
    partialvar validate --config cfg.yaml --paths 1000000 --seed 0

Exit codes: 0 success, 2 config/domain error, 3 infeasible, 4 numeric
failure, 5 validation failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import RunConfig
from .errors import ConfigError, PartialVarError
from .montecarlo import validation_report
from .solver import optimal_terminal_wealth, solve
from .strategy import StrategyContext, strategy_grid, write_strategy_csv

EXIT_VALIDATION_FAILED = 5

log = logging.getLogger("partialvar")


def _range(spec: str, what: str) -> tuple[float, float, int]:
    try:
        a, b, n = spec.split(":")
        lo, hi, count = float(a), float(b), int(n)
    except ValueError as exc:
        raise ConfigError(f"{what} must look like MIN:MAX:N, got {spec!r}") from exc
    if count < 1 or (count > 1 and not hi > lo):
        raise ConfigError(f"bad {what} {spec!r}")
    return lo, hi, count


def _write_json(obj: dict, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_solve(cfg: RunConfig, out: Path) -> dict:
    sol = solve(cfg.prior, cfg.params, cfg.utility, cfg.constraint, cfg.L)
    d = sol.to_dict()
    _write_json(d, out / "solution.json")
    return d


def cmd_curve(cfg: RunConfig, out: Path, grid: tuple[float, float, int] | None = None) -> Path:
    lo, hi, n = grid or cfg.xi_grid
    xs = np.linspace(lo, hi, n)
    prior, params = cfg.prior, cfg.params
    path = out / "curve.csv"
    summary = {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "gamma", "constraint", "xi_T", "X_T"])
        for sc in cfg.scenarios():
            sol = solve(prior, params, sc.utility, sc.constraint, cfg.L)
            summary[sc.name] = sol.to_dict()
            X = optimal_terminal_wealth(sol, sc.utility, cfg.L, xs)
            for x, v in zip(xs, X):
                w.writerow([sc.name, repr(sc.utility.gamma), sc.constraint.kind, repr(float(x)), repr(float(v))])
    _write_json(summary, out / "curve_solutions.json")
    return path


def cmd_strategy(cfg: RunConfig, out: Path, t_grid: Sequence[float] | None = None,
                 y_grid: Sequence[float] | None = None) -> Path:
    sg = cfg.raw["strategy_grid"]
    if t_grid is None:
        t_grid = [float(t) for t in sg["t"]]
    if y_grid is None:
        y = sg["y"]
        y_grid = np.linspace(float(y["min"]), float(y["max"]), int(y["n"]))
    prior, params, utility = cfg.prior, cfg.params, cfg.utility
    sol = solve(prior, params, utility, cfg.constraint, cfg.L)
    ctx = StrategyContext.build(sol, prior, params, utility)
    path = out / "strategy.csv"
    write_strategy_csv(strategy_grid(ctx, t_grid, y_grid), path)
    return path


def cmd_validate(cfg: RunConfig, out: Path, paths: int | None = None) -> dict:
    prior, params, utility, constraint = cfg.prior, cfg.params, cfg.utility, cfg.constraint
    sol = solve(prior, params, utility, constraint, cfg.L)
    rep = cfg.raw["replication"]
    report = validation_report(
        sol, prior, params, utility, constraint, n_paths=paths or cfg.paths, seed=cfg.seed,
        replication_paths=int(rep["paths"]), replication_steps=[int(s) for s in rep["steps"]],
    )
    _write_json(report, out / "validation.json")
    return report


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--out", type=Path, help="output directory (default: config output_dir)")
    common.add_argument("--seed", type=int)
    common.add_argument("--paths", type=int)
    common.add_argument("--grid", help="xi grid MIN:MAX:N for the curve command")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="partialvar", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="calibrate and write solution.json")
    sub.add_parser("curve", parents=[common], help="terminal wealth against xi_T")
    st = sub.add_parser("strategy", parents=[common], help="wealth and stock amount on a (t, y) grid")
    st.add_argument("--t-grid", help="MIN:MAX:N")
    st.add_argument("--y-grid", help="MIN:MAX:N")
    sub.add_parser("validate", parents=[common], help="Monte Carlo validation report")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config, seed=args.seed, paths=args.paths)
        out = args.out or cfg.output_dir
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "solve":
            print(json.dumps(cmd_solve(cfg, out), indent=2, sort_keys=True))
        elif args.command == "curve":
            grid = _range(args.grid, "--grid") if args.grid else None
            print(cmd_curve(cfg, out, grid))
        elif args.command == "strategy":
            t = np.linspace(*_range(args.t_grid, "--t-grid")) if args.t_grid else None
            y = np.linspace(*_range(args.y_grid, "--y-grid")) if args.y_grid else None
            print(cmd_strategy(cfg, out, t, y))
        elif args.command == "validate":
            report = cmd_validate(cfg, out)
            for c in report["checks"]:
                print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}")
            if not report["passed"]:
                return EXIT_VALIDATION_FAILED
    except PartialVarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
