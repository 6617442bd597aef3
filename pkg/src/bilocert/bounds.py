"""Explicit eavesdropping strategies: lower bounds on the guessing probability.

Every strategy here is an actual attack, so its success probability bounds
Eve's optimal guessing probability from below and the reported min-entropy
bounds the certifiable randomness from above.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .qcore import DensityMatrix, bell_projector, kron
from .scenario import BilocalScenario, Behavior, bob_measurements, outer_measurements, source_states

BRANCH_TOL = 1e-14
EVE_MODELS = ("SE", "WE", "DE")


@dataclass(frozen=True)
class GuessTarget:
    """Parties whose setting-0 outcomes Eve tries to guess."""

    parties: str = "ABC"

    def __post_init__(self) -> None:
        ps = "".join(q for q in "ABC" if q in self.parties.upper())
        if not ps or set(self.parties.upper()) - set("ABC"):
            raise ValueError(f"target must be a non-empty subset of 'ABC', got {self.parties!r}")
        object.__setattr__(self, "parties", ps)

    @classmethod
    def of(cls, target: "GuessTarget | str") -> "GuessTarget":
        return target if isinstance(target, GuessTarget) else cls(target)

    def axes(self) -> tuple[int, ...]:
        return tuple(k for k, q in enumerate("ABC") if q in self.parties)

    def size(self, behavior: Behavior) -> int:
        return int(np.prod([behavior.shape[3 + k] for k in self.axes()]))


@dataclass(frozen=True)
class BoundReport:
    """Success probability of one attack and the matching min-entropy ceiling."""

    strategy: str
    p_guess: float
    hmin: float
    details: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def of(cls, strategy: str, p_guess: float, **details: Any) -> "BoundReport":
        p = float(min(max(p_guess, 0.0), 1.0))
        if p <= 0.0:
            raise ValueError("guessing probability must be positive")
        return cls(strategy, p, -math.log2(p), details)

    @property
    def p_guess_lower(self) -> float:
        return self.p_guess

    @property
    def hmin_upper(self) -> float:
        return self.hmin

    def to_dict(self) -> dict[str, Any]:
        return {"strategy": self.strategy, "p_guess": self.p_guess, "hmin": self.hmin, "details": self.details}

    def to_json(self, **kw: Any) -> str:
        return json.dumps(self.to_dict(), **kw)


def uniform_guess(target: GuessTarget | str, behavior: Behavior) -> BoundReport:
    t = GuessTarget.of(target)
    n = t.size(behavior)
    return BoundReport.of("uniform", 1.0 / n, outcomes=n)


def _informed(p0: np.ndarray, axes: Sequence[int]) -> tuple[float, np.ndarray]:
    """sum over non-target outcomes of the max over target outcomes of p0[a, b, c]."""
    keep = [k for k in range(3) if k not in axes]
    q = np.transpose(p0, list(axes) + keep)
    n_t = int(np.prod([p0.shape[k] for k in axes]))
    q = q.reshape(n_t, -1)
    best = np.argmax(q, axis=0)  # ties -> lowest index
    return float(q.max(axis=0).sum()), best


def informed_guess(behavior: Behavior, target: GuessTarget | str) -> BoundReport:
    """Eve knows the non-target outcomes and guesses the most likely target outcome.

    Evaluated at settings x = y = z = 0.
    """
    t = GuessTarget.of(target)
    val, best = _informed(behavior.p[0, 0, 0], t.axes())
    return BoundReport.of("informed", val, guesses=best.tolist())


def post_projection_state(
    rho: DensityMatrix | np.ndarray, projectors: Sequence[np.ndarray]
) -> list[tuple[float, DensityMatrix]]:
    """Branches ``(Tr(rho P), P rho P / Tr(rho P))`` of a projective measurement.

    Branches with weight below 1e-14 are omitted.
    """
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    total = sum(np.asarray(P) for P in projectors)
    if not np.allclose(total, np.eye(m.shape[0]), atol=1e-10):
        raise ValueError("projectors must sum to the identity")
    out = []
    for P in projectors:
        P = np.asarray(P, dtype=complex)
        branch = P @ m @ P
        w = float(np.trace(branch).real)
        if w < BRANCH_TOL:
            continue
        out.append((w, DensityMatrix(branch / w)))
    return out


def behavior_from_state(rho: np.ndarray, scenario: BilocalScenario) -> np.ndarray:
    """p[x,y,z,a,b,c] of a global four-qubit state (order A, B1, B2, C)."""
    alice, charlie = outer_measurements(scenario.strategy)
    bob = bob_measurements(scenario.strategy, scenario.noise.p)
    shape = (len(alice), len(bob), len(charlie), len(alice[0]), len(bob[0]), len(charlie[0]))
    p = np.zeros(shape)
    r = rho.reshape(2, 4, 2, 2, 4, 2)  # a, b, c ; a', b', c'
    for x, y, z in np.ndindex(*shape[:3]):
        for a, b, c in np.ndindex(*shape[3:]):
            op_ = np.einsum("ij,kl,mn->ikmjln", alice[x][a], bob[y][b], charlie[z][c])
            p[x, y, z, a, b, c] = np.einsum("ikmjln,jlnikm->", op_, r).real
    return p


def node_vulnerability_attack(scenario: BilocalScenario, target: GuessTarget | str) -> BoundReport:
    """Eve measures Bob's two qubits in the Bell basis, then applies the informed guess per branch.

    Valid when Bob's measurement is diagonal in the Bell basis, so that the
    projection leaves the observed behavior unchanged.
    """
    t = GuessTarget.of(target)
    if scenario.strategy.bob not in ("bsm_1x4", "separable_2x2"):
        raise ValueError(f"node-vulnerability attack needs a Bell-diagonal Bob, got {scenario.strategy.bob!r}")
    rho_l, rho_r = source_states(scenario)
    rho = np.kron(rho_l.matrix, rho_r.matrix)
    eye2 = np.eye(2)
    projs = [kron(eye2, bell_projector(k), eye2) for k in range(4)]
    total, per_branch = 0.0, []
    for w, br in post_projection_state(rho, projs):
        p_b = behavior_from_state(br.matrix, scenario)
        val, _ = _informed(p_b[0, 0, 0], t.axes())
        total += w * val
        per_branch.append({"weight": w, "p_guess": val})
    return BoundReport.of("node_vulnerability", total, branches=per_branch)


def best_analytic_bound(scenario: BilocalScenario, eavesdropper_model: str, target: GuessTarget | str) -> BoundReport:
    """Strongest available attack for the eavesdropper model.

    The Bell-projection attack needs joint access to Bob's qubits and is only
    offered to the strong eavesdropper.
    """
    from .scenario import compute_behavior

    model = eavesdropper_model.upper()
    if model not in EVE_MODELS:
        raise ValueError(f"eavesdropper model must be one of {EVE_MODELS}, got {eavesdropper_model!r}")
    t = GuessTarget.of(target)
    beh = compute_behavior(scenario)
    reports = [uniform_guess(t, beh), informed_guess(beh, t)]
    if model == "SE" and scenario.strategy.bob in ("bsm_1x4", "separable_2x2"):
        reports.append(node_vulnerability_attack(scenario, t))
    best = reports[0]
    for r in reports[1:]:
        if r.p_guess > best.p_guess:
            best = r
    details = dict(best.details)
    details["candidates"] = {r.strategy: r.p_guess for r in reports}
    return BoundReport(best.strategy, best.p_guess, best.hmin, details)
