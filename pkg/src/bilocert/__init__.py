"""Device-independent randomness certification in the bilocal network."""

from __future__ import annotations

from .bounds import BoundReport, GuessTarget, best_analytic_bound, informed_guess, node_vulnerability_attack
from .certify import CertificationReport, certify, sweep_experimental, sweep_tilted, sweep_visibility
from .ingest import CountsTable, ProjectionResult, project_ns
from .momentgen import LevelSpec, MomentProblem, build_guessing_problem, realify
from .scenario import Behavior, BilocalScenario, MeasurementStrategy, NoiseModel, compute_behavior
from .sdpsolver import SdpInstance, SdpSolution, solve, verify

__all__ = [
    "Behavior",
    "BilocalScenario",
    "BoundReport",
    "CertificationReport",
    "CountsTable",
    "GuessTarget",
    "LevelSpec",
    "MeasurementStrategy",
    "MomentProblem",
    "NoiseModel",
    "ProjectionResult",
    "SdpInstance",
    "SdpSolution",
    "best_analytic_bound",
    "build_guessing_problem",
    "certify",
    "compute_behavior",
    "informed_guess",
    "node_vulnerability_attack",
    "project_ns",
    "realify",
    "solve",
    "sweep_experimental",
    "sweep_tilted",
    "sweep_visibility",
    "verify",
]
