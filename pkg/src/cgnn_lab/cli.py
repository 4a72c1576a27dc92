"""Command-line front end.

Exit codes are stable:
  0  success (all requested verdicts pass)
  1  config or usage error
  2  blow-up guard tripped during integration
  3  criterion or convergence verdict failed
  4  the two configs do not form an asymptotic pair

stdout carries the human-readable report, stderr the diagnostics.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .config import load_model
from .criteria import (
    InfeasibleWeightsError,
    asymptotic_gap,
    find_weights,
    h7_limsup,
    pair_convergence,
    validate_hypotheses,
)
from .dde_core import BlowUpError, IntegrationError, IntegratorOptions, integrate
from .memory import HistoryError
from .model import AsymptoticPair, ModelError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BLOWUP = 2
EXIT_CRITERION = 3
EXIT_PAIR = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cgnn-lab",
        description="Simulate and check delayed Cohen-Grossberg network models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate a model config and export CSV")
    sim.add_argument("config", type=Path)
    sim.add_argument("--t0", type=float, default=0.0)
    sim.add_argument("--t-end", type=float, default=40.0)
    sim.add_argument("--ic", type=int, default=1, help="1-based initial condition index")
    sim.add_argument("--out", type=Path, default=Path("."))
    sim.add_argument("--rel-tol", type=float, default=1e-8)
    sim.add_argument("--abs-tol", type=float, default=1e-10)

    chk = sub.add_parser("check", help="validate hypotheses and the criterion")
    chk.add_argument("config", type=Path)
    chk.add_argument("--t-max", type=float, default=200.0)
    group = chk.add_mutually_exclusive_group()
    group.add_argument("--d", type=str, default=None, help="weights, e.g. '1,1'")
    group.add_argument("--find-d", action="store_true", help="search for weights")

    cmp_ = sub.add_parser("compare", help="check an asymptotic pair and its convergence")
    cmp_.add_argument("config_a", type=Path)
    cmp_.add_argument("config_b", type=Path)
    cmp_.add_argument("--ic", type=int, default=1)
    cmp_.add_argument("--t-end", type=float, default=40.0)
    cmp_.add_argument("--window", type=float, default=2.0 * math.pi)
    cmp_.add_argument("--tol", type=float, default=1e-2)
    cmp_.add_argument("--out", type=Path, default=None)

    rec = sub.add_parser("recipe", help="run a scripted experiment")
    rec.add_argument("name", type=str)
    rec.add_argument("--out", type=Path, default=None)
    rec.add_argument("--t-end", type=float, default=40.0)
    return parser


def _load(path: Path):
    try:
        return load_model(path)
    except (ModelError, OSError) as exc:
        print(f"config error in {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG) from None


def _pick_ic(initials, k: int, path: Path):
    if not initials:
        print(f"{path}: config declares no initial conditions", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)
    if not 1 <= k <= len(initials):
        print(f"{path}: --ic {k} outside 1..{len(initials)}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)
    return initials[k - 1]


def _cmd_simulate(args) -> int:
    spec, initials = _load(args.config)
    ic = _pick_ic(initials, args.ic, args.config)
    opts = IntegratorOptions(rel_tol=args.rel_tol, abs_tol=args.abs_tol)
    try:
        traj = integrate(spec, ic, args.t0, args.t_end, opts)
    except BlowUpError as exc:
        print(f"blow-up guard: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except (IntegrationError, HistoryError, ValueError) as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "trajectory.csv").write_text(traj.to_csv(), encoding="utf-8")
    (args.out / "run_report.txt").write_text(traj.run_report(), encoding="utf-8")
    print(traj.run_report(), end="")
    print(f"wrote {args.out / 'trajectory.csv'}")
    return EXIT_OK


def _cmd_check(args) -> int:
    spec, _ = _load(args.config)
    report = validate_hypotheses(spec)
    print(report.render(), end="")
    if args.d is not None:
        try:
            d = np.array([float(v) for v in args.d.split(",")], dtype=float)
        except ValueError:
            print(f"cannot parse --d {args.d!r}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        try:
            d, radius = find_weights(spec, t_max=args.t_max)
            print(f"weights found: d = {np.array2string(d, precision=6)} "
                  f"(spectral radius {radius:.6g})")
        except InfeasibleWeightsError as exc:
            print(f"weight search infeasible: spectral radius {exc.radius:.6g}")
            return EXIT_CRITERION
    try:
        curve = h7_limsup(spec, d, t_max=args.t_max)
    except ValueError as exc:
        print(f"criterion evaluation failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(curve.render(), end="")
    if not report.ok():
        return EXIT_CRITERION
    return EXIT_OK if curve.negative else EXIT_CRITERION


def _cmd_compare(args) -> int:
    spec_a, initials = _load(args.config_a)
    spec_b, _ = _load(args.config_b)
    ic = _pick_ic(initials, args.ic, args.config_a)
    try:
        pair = AsymptoticPair(base=spec_a, partner=spec_b)
    except ModelError as exc:
        print(f"not an asymptotic pair: {exc}", file=sys.stderr)
        return EXIT_PAIR
    gap = asymptotic_gap(pair)
    print(gap.render(), end="")
    if not gap.passed:
        print("pair fails the vanishing-difference requirement", file=sys.stderr)
        return EXIT_PAIR
    opts = IntegratorOptions(rel_tol=1e-6, abs_tol=1e-8)
    try:
        traj_a = integrate(spec_a, ic, 0.0, args.t_end, opts)
        traj_b = integrate(spec_b, ic, 0.0, args.t_end, opts)
    except BlowUpError as exc:
        print(f"blow-up guard: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    curve = pair_convergence(traj_a, traj_b, args.window)
    print(f"pair convergence: final window gap {curve.final:.6g} "
          f"(tolerance {args.tol:g})")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "trajectory_1.csv").write_text(traj_a.to_csv(), encoding="utf-8")
        (args.out / "trajectory_2.csv").write_text(traj_b.to_csv(), encoding="utf-8")
        (args.out / "convergence.csv").write_text(curve.to_csv(), encoding="utf-8")
    return EXIT_OK if curve.converged(args.tol) else EXIT_CRITERION


def _cmd_recipe(args) -> int:
    if args.name not in experiments.RECIPE_NAMES:
        print(f"unknown recipe {args.name!r}; known: {', '.join(experiments.RECIPE_NAMES)}",
              file=sys.stderr)
        return EXIT_CONFIG
    opts = experiments.RecipeOptions(t_end=args.t_end)
    try:
        report = experiments.run_recipe(args.name, opts)
    except BlowUpError as exc:
        print(f"blow-up guard: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    print(report.render(), end="")
    if args.out is not None:
        report.write(args.out)
        print(f"wrote recipe outputs to {args.out}")
    return EXIT_OK if report.passed else EXIT_CRITERION


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "check":
            return _cmd_check(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "recipe":
            return _cmd_recipe(args)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
