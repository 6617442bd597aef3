"""Coincidence counts, empirical behaviors and maximum-likelihood projection.

Counts ``N[x, z, a, b, c]`` come from a network where Bob has a single
setting. The projection maximizes ``sum N log p`` over behaviors that are
normalized, no-signalling and satisfy the outer-node independence
``p(ac|xz) = p(a|x) p(c|z)``.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from .scenario import Behavior

SHAPE = (2, 2, 2, 4, 2)  # x, z, a, b, c
HEADER = ("x", "z", "a", "b", "c", "count")
LOG_FLOOR = 1e-12
NS_TARGET = 1e-8
INDEP_TARGET = 1e-7


@dataclass(frozen=True)
class CountsTable:
    """Non-negative integer counts indexed ``[x, z, a, b, c]``."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        n = np.asarray(self.counts, dtype=float)
        if n.shape != SHAPE:
            raise ValueError(f"counts must have shape {SHAPE}, got {n.shape}")
        if np.any(n < 0) or np.any(n != np.round(n)):
            raise ValueError("counts must be non-negative integers")
        if np.any(n.sum(axis=(2, 3, 4)) <= 0):
            raise ValueError("every (x, z) slice needs a positive total")
        n = n.copy()
        n.setflags(write=False)
        object.__setattr__(self, "counts", n)

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    @classmethod
    def from_csv(cls, source: str | Path | io.TextIOBase) -> "CountsTable":
        """Read a ``x,z,a,b,c,count`` CSV from a path, CSV text or a text stream.

        Missing rows count as zero.
        """
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and "," not in source):
            text = Path(source).read_text()
        elif isinstance(source, str):
            text = source
        else:
            text = source.read()
        reader = csv.reader(io.StringIO(text))
        rows = [r for r in reader if r and any(s.strip() for s in r)]
        if not rows or tuple(s.strip() for s in rows[0]) != HEADER:
            raise ValueError(f"counts CSV must start with header {','.join(HEADER)}")
        n = np.zeros(SHAPE)
        for k, r in enumerate(rows[1:], start=2):
            if len(r) != len(HEADER):
                raise ValueError(f"line {k}: expected {len(HEADER)} fields, got {len(r)}")
            try:
                x, z, a, b, c = (int(s) for s in r[:5])
                val = float(r[5])
            except ValueError as exc:
                raise ValueError(f"line {k}: {exc}") from None
            idx = (x, z, a, b, c)
            if any(not 0 <= i < s for i, s in zip(idx, SHAPE)):
                raise ValueError(f"line {k}: index {idx} out of range {SHAPE}")
            n[idx] += val
        return cls(n)

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(HEADER)
        for idx in np.ndindex(*SHAPE):
            w.writerow([*idx, int(self.counts[idx])])
        return out.getvalue()

    @classmethod
    def sample(cls, behavior: Behavior, shots: int, seed: int = 0) -> "CountsTable":
        """Multinomial counts with ``shots`` events per (x, z) slice."""
        rng = np.random.default_rng(seed)
        p = _tensor(behavior)
        n = np.zeros(SHAPE)
        for x in range(2):
            for z in range(2):
                q = p[x, z].ravel()
                n[x, z] = rng.multinomial(shots, q / q.sum()).reshape(SHAPE[2:])
        return cls(n)


def _tensor(behavior: Behavior) -> np.ndarray:
    """p[x, z, a, b, c] of a single-Bob-setting behavior."""
    if behavior.shape != (2, 1, 2, 2, 4, 2):
        raise ValueError(f"expected cards (2,1,2,2,4,2), got {behavior.shape}")
    return behavior.p[:, 0]


def _behavior(q: np.ndarray, meta: dict | None = None) -> Behavior:
    q = np.clip(q, 0.0, None)
    q = q / q.sum(axis=(2, 3, 4), keepdims=True)
    return Behavior(q[:, None], meta, check_ns=False)


def empirical_behavior(counts: CountsTable) -> Behavior:
    """Per-slice relative frequencies; no-signalling is recorded, not enforced."""
    n = counts.counts
    return _behavior(n / n.sum(axis=(2, 3, 4), keepdims=True), {"source": "counts", "total": counts.total})


def _residuals(q: np.ndarray) -> tuple[float, float]:
    a_side = q.sum(axis=2)  # x, z, b, c : must not depend on x
    c_side = q.sum(axis=4)  # x, z, a, b : must not depend on z
    ns = max(float(np.abs(a_side[1] - a_side[0]).max()), float(np.abs(c_side[:, 1] - c_side[:, 0]).max()))
    pac = q.sum(axis=3)  # x, z, a, c
    pa = pac.sum(axis=3).mean(axis=1)  # x, a
    pc = pac.sum(axis=2).mean(axis=0)  # z, c
    ind = float(np.abs(pac - pa[:, None, :, None] * pc[None, :, None, :]).max())
    return ns, ind


def ns_residuals(behavior: Behavior) -> tuple[float, float]:
    """(largest no-signalling violation, largest ``|p(ac|xz) - p(a|x) p(c|z)|``).

    Outer marginals ``p(a|x)`` and ``p(c|z)`` are averaged over the other
    party's setting, which is exact for no-signalling data.
    """
    return _residuals(_tensor(behavior))


@dataclass
class ProjectionResult:
    behavior: Behavior
    log_likelihood: float
    ns_residual: float
    independence_residual: float
    iterations: int
    converged: bool
    seed: int
    starts: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "behavior": self.behavior.to_dict(),
            "log_likelihood": self.log_likelihood,
            "residuals": {"ns": self.ns_residual, "independence": self.independence_residual},
            "iterations": self.iterations,
            "converged": self.converged,
            "seed": self.seed,
            "starts": self.starts,
        }

    def to_json(self, **kw: Any) -> str:
        return json.dumps(self.to_dict(), **kw)


def log_likelihood(counts: CountsTable, behavior: Behavior) -> float:
    q = _tensor(behavior)
    n = counts.counts
    mask = n > 0
    return float(np.sum(n[mask] * np.log(np.maximum(q[mask], LOG_FLOOR))))


def _ns_system() -> tuple[np.ndarray, np.ndarray]:
    """Affine equalities (normalization and both no-signalling families) on vec(q)."""
    rows, rhs = [], []
    idx = np.arange(np.prod(SHAPE)).reshape(SHAPE)
    size = idx.size
    for x in range(2):
        for z in range(2):
            r = np.zeros(size)
            r[idx[x, z].ravel()] = 1
            rows.append(r)
            rhs.append(1.0)
    for z in range(2):
        for b in range(4):
            for c in range(2):
                r = np.zeros(size)
                r[idx[1, z, :, b, c]] += 1
                r[idx[0, z, :, b, c]] -= 1
                rows.append(r)
                rhs.append(0.0)
    for x in range(2):
        for a in range(2):
            for b in range(4):
                r = np.zeros(size)
                r[idx[x, 1, a, b, :]] += 1
                r[idx[x, 0, a, b, :]] -= 1
                rows.append(r)
                rhs.append(0.0)
    return np.array(rows), np.array(rhs)


def _independence(q: np.ndarray) -> np.ndarray:
    """p(a=0,c=0|xz) - p(a=0|x) p(c=0|z) for all (x, z); with NS this fixes every (a, c)."""
    q = q.reshape(SHAPE)
    pac = q.sum(axis=3)
    pa = pac[:, 0].sum(axis=2)[:, 0]  # p(a=0|x) read at z=0
    pc = pac[0].sum(axis=1)[:, 0]  # p(c=0|z) read at x=0
    return (pac[:, :, 0, 0] - pa[:, None] * pc[None, :]).ravel()


def _independence_jac(q: np.ndarray) -> np.ndarray:
    q = q.reshape(SHAPE)
    pac = q.sum(axis=3)
    pa = pac[:, 0].sum(axis=2)[:, 0]
    pc = pac[0].sum(axis=1)[:, 0]
    J = np.zeros((4, q.size))
    for x in range(2):
        for z in range(2):
            g = np.zeros(SHAPE)
            g[x, z, 0, :, 0] += 1
            g[x, 0, 0, :, :] -= pc[z]
            g[0, z, :, :, 0] -= pa[x]
            J[2 * x + z] = g.ravel()
    return J


def _solve_start(n: np.ndarray, q0: np.ndarray, p0: np.ndarray, null: np.ndarray, tol: float):
    total = n.sum()
    nv = n.ravel() / total
    mask = nv > 0

    def vec(t):
        return p0 + null @ t

    def f(t):
        q = vec(t)
        return -float(np.sum(nv[mask] * np.log(np.maximum(q[mask], LOG_FLOOR))))

    def g(t):
        q = vec(t)
        d = np.zeros_like(q)
        d[mask] = -nv[mask] / np.maximum(q[mask], LOG_FLOOR)
        return null.T @ d

    cons = [
        {"type": "eq", "fun": lambda t: _independence(vec(t)), "jac": lambda t: _independence_jac(vec(t)) @ null},
        {"type": "ineq", "fun": lambda t: vec(t), "jac": lambda t: null},
    ]
    t0 = null.T @ (q0.ravel() - p0)
    res = minimize(f, t0, jac=g, constraints=cons, method="SLSQP", options={"maxiter": 500, "ftol": tol * 1e-3})
    return vec(res.x).reshape(SHAPE), int(res.nit), bool(res.success)


def project_ns(
    counts: CountsTable, tol: float = 1e-10, seed: int = 0, starts: int = 8, threads: int | None = None
) -> ProjectionResult:
    """Maximum-likelihood behavior in the no-signalling set with independent outer nodes.

    Counts whose frequencies already satisfy every constraint are returned
    unchanged (they are the unconstrained maximum). Otherwise ``starts``
    local solves run from the least-squares no-signalling point mixed with
    seeded random perturbations; the best log-likelihood wins, ties going
    to the lowest start index.
    """
    n = counts.counts
    emp = n / n.sum(axis=(2, 3, 4), keepdims=True)
    ns, ind = _residuals(emp)
    if ns < NS_TARGET and ind < INDEP_TARGET:
        beh = _behavior(emp, {"source": "projection", "seed": seed})
        return ProjectionResult(beh, log_likelihood(counts, beh), ns, ind, 0, True, seed)
    A, b = _ns_system()
    p0 = np.linalg.lstsq(A, b, rcond=None)[0]
    null = sla.null_space(A)
    base = p0 + null @ (null.T @ (emp.ravel() - p0))
    base = 0.9 * base.reshape(SHAPE) + 0.1 / 16  # interior start
    rng = np.random.default_rng(seed)
    inits = [base]
    for _ in range(starts - 1):
        noise = rng.dirichlet(np.ones(16), size=(2, 2)).reshape(SHAPE)
        mix = 0.8 * base + 0.2 * noise
        inits.append(p0.reshape(SHAPE) + (null @ (null.T @ (mix.ravel() - p0))).reshape(SHAPE))

    def run(k):
        q, it, ok = _solve_start(n, inits[k], p0, null, tol)
        return q, it, ok

    with ThreadPoolExecutor(max_workers=threads or 1) as pool:
        outs = list(pool.map(run, range(len(inits))))
    summary, best = [], None
    for k, (q, it, ok) in enumerate(outs):
        beh = _behavior(q, {"source": "projection", "seed": seed, "start": k})
        ll = log_likelihood(counts, beh)
        r_ns, r_ind = _residuals(beh.p[:, 0])
        summary.append({"start": k, "log_likelihood": ll, "iterations": it, "success": ok})
        feasible = r_ns < NS_TARGET and r_ind < INDEP_TARGET
        key = (feasible, ll)
        if best is None or key > best[0]:
            best = (key, k, beh, ll, r_ns, r_ind, it, ok)
    (feasible, _), k, beh, ll, r_ns, r_ind, it, ok = best
    total_it = sum(s["iterations"] for s in summary)
    return ProjectionResult(beh, ll, r_ns, r_ind, total_it, feasible and ok, seed, summary)


def load_counts(path: str | Path) -> CountsTable:
    return CountsTable.from_csv(Path(path).read_text())


def save_result(result: ProjectionResult, path: str | Path) -> None:
    Path(path).write_text(result.to_json(indent=2) + "\n")
