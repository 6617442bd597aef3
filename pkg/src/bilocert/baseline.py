"""Single-source Bell baseline: CHSH at the NPA level and global randomness.

A two-party behavior ``p[x, y, a, b]`` is embedded in the network format
with a trivial third party (one setting, one outcome), so the guessing
relaxation of :mod:`bilocert.momentgen` applies unchanged; with no Charlie
operators the network factorization is void and the relaxation is the plain
NPA hierarchy with an eavesdropper.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .momentgen import LevelSpec, build_guessing_problem, realify, words_upto
from .monomials import Monomial, Word, canonical_symbol, cell_symbol, op
from .qcore import SIGMA_X, SIGMA_Z, bell_projector, observable_projectors
from .scenario import Behavior
from .sdpsolver import SdpInstance, SdpSolution, solve

BELL_LEVEL = LevelSpec(length=2, scalar_parties="", carriers="one")


def npa_instance(generators: Sequence[Monomial], objective: dict[Word, float]) -> tuple[SdpInstance, dict]:
    """One moment matrix over ``generators`` with free symbols, ``<1> = 1``.

    ``objective`` maps operator words to coefficients. Returns the instance
    and the symbol-to-variable map.
    """
    n = len(generators)
    var: dict = {}
    f0 = np.zeros((n, n))
    rows = []
    for i in range(n):
        for j in range(i, n):
            s = cell_symbol(generators[i], generators[j])
            if s is None:
                continue
            if s == ():
                f0[i, j] = f0[j, i] = 1.0
                continue
            rows.append((i, j, var.setdefault(s, len(var)), 1.0))
    c = np.zeros(len(var))
    c0 = 0.0
    for w, coef in objective.items():
        s = canonical_symbol([w])
        if s == ():
            c0 += coef
        elif s not in var:
            raise ValueError(f"objective word {w} is not a moment of the generating set")
        else:
            c[var[s]] += coef
    inst = SdpInstance((n,), (f0,), (np.array(rows, dtype=float).reshape(-1, 4),), c, c0)
    return inst, var


def chsh_objective() -> dict[Word, float]:
    """CHSH sum of correlators in terms of the projectors ``A_{0|x}``, ``B_{0|y}``.

    ``<A_x B_y> = 1 - 2<A_{0|x}> - 2<B_{0|y}> + 4<A_{0|x} B_{0|y}>``.
    """
    obj: dict[Word, float] = {}
    for x in range(2):
        for y in range(2):
            s = -1.0 if x == y == 1 else 1.0
            a, b = op("A", x, 0), op("B", y, 0)
            for w, k in (((), 1.0), ((a,), -2.0), ((b,), -2.0), ((a, b), 4.0)):
                obj[w] = obj.get(w, 0.0) + s * k
    return obj


def chsh_generators(level: str = "1+AB") -> list[Monomial]:
    ops_a = [op("A", x, 0) for x in range(2)]
    ops_b = [op("B", y, 0) for y in range(2)]
    gens = [Monomial()] + [Monomial((o,)) for o in ops_a + ops_b]
    if level == "1+AB":
        gens += [Monomial((a, b)) for a in ops_a for b in ops_b]
    elif level == "2":
        gens = [Monomial(w) for w in words_upto(ops_a + ops_b, 2)]
    elif level != "1":
        raise ValueError(f"level must be '1', '1+AB' or '2', got {level!r}")
    return gens


def tsirelson_bound(level: str = "1+AB", tol: float = 1e-9) -> SdpSolution:
    """Maximal CHSH value over the NPA relaxation at ``level``."""
    inst, _ = npa_instance(chsh_generators(level), chsh_objective())
    return solve(inst, tol=tol)


def tsirelson_behavior() -> np.ndarray:
    """``p[x, y, a, b]`` of the maximally violating qubit strategy."""
    alice = [SIGMA_Z, SIGMA_X]
    bob = [(SIGMA_Z + SIGMA_X) / math.sqrt(2), (SIGMA_Z - SIGMA_X) / math.sqrt(2)]
    rho = bell_projector(0)
    p = np.zeros((2, 2, 2, 2))
    for x, y in np.ndindex(2, 2):
        pa, pb = observable_projectors(alice[x]), observable_projectors(bob[y])
        for a, b in np.ndindex(2, 2):
            p[x, y, a, b] = np.trace(rho @ np.kron(pa[a], pb[b])).real
    return p


def as_network(p: np.ndarray) -> Behavior:
    """Embed ``p[x, y, a, b]`` as a network behavior with a trivial Charlie."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 4:
        raise ValueError("expected a tensor p[x, y, a, b]")
    return Behavior(p[:, :, None, :, :, None], {"source": "bipartite"})


def global_guessing(p: np.ndarray, level: LevelSpec = BELL_LEVEL, tol: float = 1e-8) -> tuple[float, SdpSolution]:
    """Eve's maximal probability of guessing ``(a, b)`` at ``x = y = 0``."""
    problem = build_guessing_problem(as_network(p), "SE", "ABC", level)
    sol = solve(realify(problem), tol=tol)
    return float(min(1.0, max(sol.dual_objective, 0.25))), sol
