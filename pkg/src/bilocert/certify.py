"""Certified min-entropy: SDP upper bounds on Eve's guess, analytic attacks, sweeps."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .bounds import BoundReport, GuessTarget, best_analytic_bound
from .momentgen import LevelSpec, build_guessing_problem, realify
from .scenario import BilocalScenario, MeasurementStrategy, NoiseModel, brgp_value, compute_behavior
from .sdpsolver import solve, to_sdpa

CSV_HEADER = (
    "scenario,eve_model,target,v,c,p_indist,delta,theta,brgp,p_guess_sdp,"
    "hmin_certified,hmin_analytic,gap,solver_status,iterations"
)
SDP_MODELS = ("SE", "DE")
# the X-side bound stays valid when the solver stalls on a degenerate problem
# as long as the dual residual is this small
BOUND_RESIDUAL = 1e-6


@dataclass
class CertificationReport:
    scenario: BilocalScenario
    eavesdropper_model: str
    target: str
    level: str
    p_guess_sdp: float
    hmin_certified: float
    analytic: BoundReport
    gap: float
    brgp: float | None
    solver_status: str
    iterations: int
    residual: float
    runtime: float
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def bound_valid(self) -> bool:
        """True when the solver's dual point certifies ``p_guess_sdp``."""
        return bool(
            self.solver_status == "optimal"
            or (self.solver_status in ("numerical_failure", "max_iter") and self.residual < BOUND_RESIDUAL)
        )

    @property
    def scenario_label(self) -> str:
        s = self.scenario.strategy
        return f"{s.outer}_{s.bob}"

    def csv_row(self) -> list[Any]:
        s, n = self.scenario.strategy, self.scenario.noise
        return [
            self.scenario_label,
            self.eavesdropper_model,
            self.target,
            n.v,
            n.c,
            n.p,
            s.delta,
            s.theta,
            "" if self.brgp is None else self.brgp,
            self.p_guess_sdp,
            self.hmin_certified,
            self.analytic.hmin,
            self.gap,
            self.solver_status,
            self.iterations,
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario.meta(),
            "eve_model": self.eavesdropper_model,
            "target": self.target,
            "level": self.level,
            "p_guess_sdp": self.p_guess_sdp,
            "hmin_certified": self.hmin_certified,
            "analytic": self.analytic.to_dict(),
            "gap": self.gap,
            "brgp": self.brgp,
            "solver": {
                "status": self.solver_status,
                "iterations": self.iterations,
                "residual": self.residual,
                "bound_valid": self.bound_valid,
                **self.diagnostics,
            },
        }

    def to_json(self, **kw: Any) -> str:
        return json.dumps(self.to_dict(), **kw)


def certify(
    scenario: BilocalScenario,
    eavesdropper_model: str,
    target: GuessTarget | str,
    level_spec: LevelSpec | str | None = None,
    tol: float = 1e-7,
    max_iter: int = 200,
    export_sdpa: str | Path | None = None,
) -> CertificationReport:
    """SDP bound on Eve's guessing probability together with the best explicit attack."""
    model = eavesdropper_model.upper()
    if model not in SDP_MODELS:
        raise ValueError(f"SDP certification supports {SDP_MODELS}, got {eavesdropper_model!r}")
    t = GuessTarget.of(target).parties
    level = level_spec if isinstance(level_spec, LevelSpec) else LevelSpec.parse(level_spec, model)
    t0 = time.perf_counter()
    beh = compute_behavior(scenario)
    problem = build_guessing_problem(beh, model, t, level)
    inst = realify(problem)
    if export_sdpa is not None:
        Path(export_sdpa).write_text(to_sdpa(inst))
    sol = solve(inst, tol=tol, max_iter=max_iter)
    n_out = GuessTarget(t).size(beh)
    g = float(min(1.0, max(sol.dual_objective, 1.0 / n_out)))
    h = max(0.0, -math.log2(g))  # avoids -0.0 at g = 1
    analytic = best_analytic_bound(scenario, model, t)
    brgp = brgp_value(beh) if beh.shape == (2, 1, 2, 2, 4, 2) else None
    diag = {
        "objective": sol.objective,
        "bound": sol.dual_objective,
        "primal_infeasibility": sol.primal_infeasibility,
        "matrix_size": problem.matrix_size,
        "blocks": len(problem.blocks),
        "variables": inst.num_vars,
        "equalities": inst.num_eq,
    }
    return CertificationReport(
        scenario,
        model,
        t,
        str(level),
        g,
        h,
        analytic,
        analytic.hmin - h,
        brgp,
        sol.status,
        sol.iterations,
        sol.dual_infeasibility,
        time.perf_counter() - t0,
        diag,
    )


# ---------------------------------------------------------------- sweeps


def thread_count() -> int:
    env = os.environ.get("BILOCERT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"BILOCERT_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _job(args) -> CertificationReport | dict:
    scenario, model, target, level, tol, max_iter = args
    try:
        return certify(scenario, model, target, level, tol, max_iter)
    except Exception as exc:  # a failed point is recorded, the sweep continues
        return {"error": f"{type(exc).__name__}: {exc}", "scenario": scenario}


def run_jobs(jobs: Sequence[tuple], threads: int | None = None) -> list:
    """Certify each job; results keep the job order."""
    n = threads or thread_count()
    if n <= 1 or len(jobs) <= 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(n, len(jobs))) as pool:
        return list(pool.map(_job, jobs))


def sweep_visibility(
    template: BilocalScenario,
    eavesdropper_model: str,
    target: str,
    v_grid: Sequence[float],
    level_spec: LevelSpec | str | None = None,
    tol: float = 1e-7,
    threads: int | None = None,
) -> list:
    if len(v_grid) == 0:
        raise ValueError("empty visibility grid")
    jobs = [
        (replace(template, noise=replace(template.noise, v=float(v))), eavesdropper_model, target, level_spec, tol, 200)
        for v in v_grid
    ]
    return run_jobs(jobs, threads)


def sweep_experimental(
    template: BilocalScenario,
    eavesdropper_model: str,
    target: str,
    p_indist_grid: Sequence[float],
    v: float,
    c: float,
    level_spec: LevelSpec | str | None = None,
    tol: float = 1e-7,
    threads: int | None = None,
) -> list:
    if len(p_indist_grid) == 0:
        raise ValueError("empty indistinguishability grid")
    jobs = [
        (replace(template, noise=NoiseModel(v, c, float(p))), eavesdropper_model, target, level_spec, tol, 200)
        for p in p_indist_grid
    ]
    return run_jobs(jobs, threads)


@dataclass
class TiltedSweep:
    grid: list
    best: CertificationReport
    refined: bool


def _golden(fun: Callable[[float], float], grid: Sequence[float], values: Sequence[float]) -> float | None:
    """Golden-section refinement of a coarse maximum; None when it sits on the grid edge."""
    k = int(np.argmax(values))
    if k == 0 or k == len(grid) - 1:
        return None
    lo, mid, hi = grid[k - 1], grid[k], grid[k + 1]
    if values[k + 1] == values[k]:  # flat top between two grid points: probe the middle
        mid, lo = (grid[k] + grid[k + 1]) / 2, grid[k]
        if not fun(mid) > values[k]:
            return None
    elif not (values[k] > values[k - 1] and values[k] > values[k + 1]):
        return None
    res = minimize_scalar(lambda s: -fun(s), bracket=(lo, mid, hi), method="golden", options={"xtol": 1e-3})
    return float(res.x)


def tilted_level(bob_variant: str, eavesdropper_model: str = "SE") -> LevelSpec:
    """Default relaxation for tilted sweeps.

    With a single Bob setting the tilted statistics are reproduced by weaker
    adversaries at the default level; words of length three close the gap.
    The rotated 2x4 variant is already tight at the default level.
    """
    base = LevelSpec.default(eavesdropper_model.upper())
    return replace(base, length=3) if bob_variant == "bsm_1x4" else base


def sweep_tilted(
    eavesdropper_model: str,
    bob_variant: str,
    target: str,
    delta_grid: Sequence[float],
    theta_grid: Sequence[float] = (math.pi / 4,),
    level_spec: LevelSpec | str | None = None,
    tol: float = 1e-7,
    noise: NoiseModel | None = None,
    refine: bool = True,
    threads: int | None = None,
) -> TiltedSweep:
    """Coarse (delta, theta) grid followed by golden-section refinement of the best point."""
    if len(delta_grid) == 0 or len(theta_grid) == 0:
        raise ValueError("empty tilt grid")
    noise = noise or NoiseModel()
    if level_spec is None:
        level_spec = tilted_level(bob_variant, eavesdropper_model)

    def scen(d, th):
        return BilocalScenario(noise, MeasurementStrategy("tilted", bob_variant, float(d), float(th)))

    pts = [(d, th) for th in theta_grid for d in delta_grid]
    reports = run_jobs([(scen(d, th), eavesdropper_model, target, level_spec, tol, 200) for d, th in pts], threads)
    ok = [r for r in reports if isinstance(r, CertificationReport)]
    if not ok:
        raise RuntimeError("every grid point failed")
    best = max(ok, key=lambda r: r.hmin_certified)
    refined = False
    if refine:
        cache: dict[tuple[float, float], CertificationReport] = {}

        def h_at(d, th):
            d = min(max(d, 0.0), math.pi / 2)
            th = min(max(th, 0.0), math.pi / 2)
            key = (round(d, 12), round(th, 12))
            if key not in cache:
                cache[key] = certify(scen(d, th), eavesdropper_model, target, level_spec, tol)
            return cache[key].hmin_certified

        th0 = best.scenario.strategy.theta
        d_vals = [
            r.hmin_certified if isinstance(r, CertificationReport) else -1.0
            for r, (_, th) in zip(reports, pts)
            if th == th0
        ]
        d_star = _golden(lambda d: h_at(d, th0), list(delta_grid), d_vals)
        if d_star is not None:
            refined = True
            d0 = d_star
        else:
            d0 = best.scenario.strategy.delta
        if len(theta_grid) > 1:
            t_vals = [h_at(d0, th) for th in theta_grid]
            t_star = _golden(lambda th: h_at(d0, th), list(theta_grid), t_vals)
            if t_star is not None:
                refined = True
                h_at(d0, t_star)
        for r in cache.values():
            if r.hmin_certified > best.hmin_certified:
                best = r
    return TiltedSweep(reports, best, refined)


def write_csv(reports: Sequence, path: str | Path | None = None) -> str:
    """CSV text of ``reports`` (failed points carry ``error`` as solver status)."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    out.write(CSV_HEADER + "\n")
    for r in reports:
        if isinstance(r, CertificationReport):
            w.writerow(r.csv_row())
        else:
            sc = r["scenario"]
            s, n = sc.strategy, sc.noise
            w.writerow([f"{s.outer}_{s.bob}", "", "", n.v, n.c, n.p, s.delta, s.theta, "", "", "", "", "", "error", 0])
    text = out.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
