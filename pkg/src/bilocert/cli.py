"""Command-line entry point: ``bilocert {table1,certify,sweep,bound,project}``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .bounds import GuessTarget, informed_guess, node_vulnerability_attack, uniform_guess
from .certify import (
    CertificationReport,
    certify,
    sweep_experimental,
    sweep_visibility,
    tilted_level,
    write_csv,
)
from .ingest import load_counts, project_ns
from .momentgen import LevelSpec
from .scenario import BilocalScenario, MeasurementStrategy, NoiseModel, compute_behavior

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3

BOB = {"1x4": "bsm_1x4", "2x2": "separable_2x2", "2x4": "rotated_2x4"}
TABLE1 = {
    ("ABC", "SE", "1x4"): 1.41,
    ("ABC", "SE", "2x2"): 1.41,
    ("ABC", "DE", "1x4"): 3.00,
    ("ABC", "DE", "2x2"): 2.41,
    ("AC", "SE", "1x4"): 1.41,
    ("AC", "SE", "2x2"): 1.41,
    ("AC", "DE", "1x4"): 1.41,
    ("AC", "DE", "2x2"): 1.41,
}
TABLE1_TOL = 0.02


class UsageError(Exception):
    pass


def parse_grid(text: str) -> list[float]:
    """``"a:b:step"`` (inclusive of ``b`` up to rounding) or a comma list."""
    try:
        if ":" in text:
            a, b, step = (float(s) for s in text.split(":"))
            if step <= 0:
                raise UsageError(f"grid step must be positive in {text!r}")
            n = int(math.floor((b - a) / step + 1e-9)) + 1
            grid = [round(a + k * step, 12) for k in range(max(n, 0))]
        else:
            grid = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad grid {text!r}; expected a:b:step or a comma list") from None
    if not grid:
        raise UsageError(f"empty grid {text!r}")
    return grid


def _scenario_args(p: argparse.ArgumentParser, eve: bool = True) -> None:
    if eve:
        p.add_argument("--scenario", choices=("se", "de"), default="se", help="eavesdropper model")
    p.add_argument("--bob", choices=tuple(BOB), default="1x4")
    p.add_argument("--strategy-outer", choices=("standard", "tilted"), default="standard")
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--theta", type=float, default=math.pi / 4)
    p.add_argument("--v", type=float, default=1.0)
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--indist", type=float, default=1.0)
    p.add_argument("--target", choices=("abc", "ac"), default="abc")


def _solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--level", default="default", help="e.g. length=2,scalars=A,qlen=2,carriers=L1; tilted 1x4 defaults to length=3")
    p.add_argument("--tol", type=float, default=1e-7)


def _output_args(p: argparse.ArgumentParser, fmt: str = "json") -> None:
    p.add_argument("--out", type=Path)
    p.add_argument("--format", choices=("json", "csv"), default=fmt)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bilocert", description="Randomness certification in bilocal networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("table1", help="min-entropies at unit visibility for every eve model, Bob variant and target")
    _solver_args(t)
    _output_args(t, "csv")
    t.add_argument("--export-sdpa", type=Path, metavar="DIR")

    c = sub.add_parser("certify", help="certify one scenario")
    _scenario_args(c)
    _solver_args(c)
    _output_args(c)
    c.add_argument("--export-sdpa", type=Path, metavar="DIR")

    s = sub.add_parser("sweep", help="certify over a visibility or indistinguishability grid")
    _scenario_args(s)
    _solver_args(s)
    _output_args(s, "csv")
    s.add_argument("--visibility", help="grid a:b:step over v")
    s.add_argument("--indist-grid", help="grid a:b:step over the photon indistinguishability")

    b = sub.add_parser("bound", help="explicit attacks (lower bounds on the guessing probability)")
    _scenario_args(b, eve=False)
    _output_args(b)
    b.add_argument("--strategy", choices=("uniform", "informed", "bell-projection", "all"), default="all")

    pr = sub.add_parser("project", help="maximum-likelihood projection of coincidence counts")
    pr.add_argument("counts", type=Path)
    _output_args(pr)
    pr.add_argument("--tol", type=float, default=1e-10)
    pr.add_argument("--starts", type=int, default=8)
    pr.add_argument("--then-certify", action="store_true", help="also bound the projected behavior")
    pr.add_argument("--scenario", choices=("se", "de"), default="se")
    pr.add_argument("--target", choices=("abc", "ac"), default="ac")
    pr.add_argument("--level", default="default")
    return parser


def _scenario(ns: argparse.Namespace) -> BilocalScenario:
    try:
        noise = NoiseModel(ns.v, ns.c, ns.indist)
        strategy = MeasurementStrategy(ns.strategy_outer, BOB[ns.bob], ns.delta, ns.theta)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return BilocalScenario(noise, strategy)


def _level(ns: argparse.Namespace, model: str) -> LevelSpec:
    if ns.level == "default" and getattr(ns, "strategy_outer", "standard") == "tilted":
        return tilted_level(BOB[ns.bob], model)
    try:
        return LevelSpec.parse(ns.level, model)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text if text.endswith("\n") else text + "\n")


def _reports_text(reports: Sequence, fmt: str) -> str:
    if fmt == "csv":
        return write_csv(reports)
    rows = [r.to_dict() if isinstance(r, CertificationReport) else {"error": r["error"], "scenario": r["scenario"].meta()}
            for r in reports]
    return json.dumps(rows, indent=2)


def cmd_table1(ns: argparse.Namespace) -> int:
    if ns.export_sdpa is not None:
        ns.export_sdpa.mkdir(parents=True, exist_ok=True)
    reports, lines, mismatch, unstable = [], [], False, False
    for (target, model, bob), expected in TABLE1.items():
        scen = BilocalScenario(NoiseModel(), MeasurementStrategy("standard", BOB[bob]))
        export = None if ns.export_sdpa is None else ns.export_sdpa / f"{model}_{bob}_{target}.dat-s"
        r = certify(scen, model, target, _level(ns, model), tol=ns.tol, export_sdpa=export)
        reports.append(r)
        diff = r.hmin_certified - expected
        ok = abs(diff) <= TABLE1_TOL
        mismatch |= not ok
        unstable |= not r.bound_valid
        lines.append(
            f"{target:>3} {model} {bob}: hmin={r.hmin_certified:.3f} expected={expected:.2f} "
            f"diff={diff:+.3f} {'ok' if ok else 'MISMATCH'} ({r.solver_status})"
        )
    print("\n".join(lines), file=sys.stderr)
    _emit(_reports_text(reports, ns.format), ns.out)
    if unstable:
        return EXIT_NUMERICAL
    return EXIT_MISMATCH if mismatch else EXIT_OK


def cmd_certify(ns: argparse.Namespace) -> int:
    model = ns.scenario.upper()
    export = None
    if ns.export_sdpa is not None:
        ns.export_sdpa.mkdir(parents=True, exist_ok=True)
        export = ns.export_sdpa / f"{model}_{ns.bob}_{ns.target.upper()}.dat-s"
    r = certify(_scenario(ns), model, ns.target.upper(), _level(ns, model), tol=ns.tol, export_sdpa=export)
    _emit(_reports_text([r], ns.format) if ns.format == "csv" else r.to_json(indent=2), ns.out)
    return EXIT_OK if r.bound_valid else EXIT_NUMERICAL


def cmd_sweep(ns: argparse.Namespace) -> int:
    model = ns.scenario.upper()
    if (ns.visibility is None) == (ns.indist_grid is None):
        raise UsageError("give exactly one of --visibility or --indist-grid")
    template = _scenario(ns)
    level = _level(ns, model)
    if ns.visibility is not None:
        grid = parse_grid(ns.visibility)
        if any(not 0.0 <= v <= 1.0 for v in grid):
            raise UsageError("visibilities must lie in [0, 1]")
        reports = sweep_visibility(template, model, ns.target.upper(), grid, level, ns.tol)
    else:
        grid = parse_grid(ns.indist_grid)
        if any(not 0.0 <= p <= 1.0 for p in grid):
            raise UsageError("indistinguishabilities must lie in [0, 1]")
        reports = sweep_experimental(template, model, ns.target.upper(), grid, ns.v, ns.c, level, ns.tol)
    _emit(_reports_text(reports, ns.format), ns.out)
    ok = all(isinstance(r, CertificationReport) and r.bound_valid for r in reports)
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_bound(ns: argparse.Namespace) -> int:
    scen = _scenario(ns)
    target = GuessTarget(ns.target.upper())
    beh = compute_behavior(scen)
    reports = []
    if ns.strategy in ("uniform", "all"):
        reports.append(uniform_guess(target, beh))
    if ns.strategy in ("informed", "all"):
        reports.append(informed_guess(beh, target))
    if ns.strategy in ("bell-projection", "all"):
        try:
            reports.append(node_vulnerability_attack(scen, target))
        except ValueError as exc:
            if ns.strategy != "all":
                raise UsageError(str(exc)) from None
    if ns.format == "csv":
        lines = ["strategy,p_guess,hmin"] + [f"{r.strategy},{r.p_guess!r},{r.hmin!r}" for r in reports]
        text = "\n".join(lines)
    else:
        text = json.dumps([r.to_dict() for r in reports], indent=2)
    _emit(text, ns.out)
    return EXIT_OK


def cmd_project(ns: argparse.Namespace) -> int:
    if not ns.counts.exists():
        raise UsageError(f"counts file {ns.counts} does not exist")
    try:
        counts = load_counts(ns.counts)
    except ValueError as exc:
        raise UsageError(f"{ns.counts}: {exc}") from None
    result = project_ns(counts, tol=ns.tol, seed=ns.seed, starts=ns.starts)
    payload = result.to_dict()
    if ns.then_certify and result.converged:
        payload["certification"] = _certify_behavior(result.behavior, ns)
    text = json.dumps(payload, indent=2)
    _emit(text, ns.out)
    return EXIT_OK if result.converged else EXIT_NUMERICAL


def _certify_behavior(behavior, ns: argparse.Namespace) -> dict:
    """SDP bound for a behavior that did not come from a scenario model."""
    from .momentgen import build_guessing_problem, realify
    from .sdpsolver import solve

    model = ns.scenario.upper()
    target = GuessTarget(ns.target.upper())
    problem = build_guessing_problem(behavior, model, target.parties, _level(ns, model))
    sol = solve(realify(problem))
    g = float(min(1.0, max(sol.dual_objective, 1.0 / target.size(behavior))))
    return {
        "eve_model": model,
        "target": target.parties,
        "p_guess_sdp": g,
        "hmin_certified": -math.log2(g),
        "solver_status": sol.status,
        "residual": sol.dual_infeasibility,
    }


COMMANDS = {
    "table1": cmd_table1,
    "certify": cmd_certify,
    "sweep": cmd_sweep,
    "bound": cmd_bound,
    "project": cmd_project,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    np.set_printoptions(precision=6)
    try:
        return COMMANDS[ns.command](ns)
    except UsageError as exc:
        print(f"bilocert {ns.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
