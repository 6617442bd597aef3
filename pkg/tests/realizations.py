"""Explicit quantum realizations of bilocal behaviors with an eavesdropper.

Used as oracles: every installed moment identity must hold on them.
"""

from __future__ import annotations


import numpy as np

from bilocert.momentgen import EVE, FRED, _eve_labels
from bilocert.qcore import bell_projector
from bilocert.scenario import Behavior, BilocalScenario, bob_measurements, outer_measurements

I2, I4 = np.eye(2), np.eye(4)


def random_density(rng: np.random.Generator, dim: int = 4) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def local_operators(scenario: BilocalScenario) -> dict[tuple[int, int, int], np.ndarray]:
    """Projectors of A, B, C on the 16-dimensional space A (x) B1B2 (x) C."""
    alice, charlie = outer_measurements(scenario.strategy)
    bob = bob_measurements(scenario.strategy, scenario.noise.p)
    ops = {}
    for x, povm in enumerate(alice):
        for a, P in enumerate(povm):
            ops[(0, x, a)] = np.kron(P, np.eye(8))
    for y, povm in enumerate(bob):
        for b, P in enumerate(povm):
            ops[(1, y, b)] = np.kron(np.kron(I2, P), I2)
    for z, povm in enumerate(charlie):
        for c, P in enumerate(povm):
            ops[(2, z, c)] = np.kron(np.eye(8), P)
    return ops


def behavior_of(rho: np.ndarray, ops, shape) -> Behavior:
    p = np.zeros(shape)
    for idx in np.ndindex(*shape):
        x, y, z, a, b, c = idx
        p[idx] = np.trace(rho @ ops[(0, x, a)] @ ops[(1, y, b)] @ ops[(2, z, c)]).real
    return Behavior(p)


class ClassicalEve:
    """Sources are mixtures over hidden labels ``e`` (left) and ``f`` (right) that Eve reads.

    Eve's outcome is a fixed function of the hidden labels: one register for
    the strong eavesdropper, one register per source for the double one.
    """

    def __init__(self, scenario: BilocalScenario, model: str, target: str, n_hidden: int = 2, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.model = model
        self.ops = local_operators(scenario)
        self.q = rng.dirichlet(np.ones(n_hidden))
        self.r = rng.dirichlet(np.ones(n_hidden))
        self.left = [random_density(rng) for _ in range(n_hidden)]
        self.right = [random_density(rng) for _ in range(n_hidden)]
        shape = self._shape(scenario)
        rho_l = sum(q * m for q, m in zip(self.q, self.left))
        rho_r = sum(r * m for r, m in zip(self.r, self.right))
        self.behavior = behavior_of(np.kron(rho_l, rho_r), self.ops, shape)
        _, _, card, _, _ = _eve_labels(self.behavior, model, target)
        self.card = card
        if model == "SE":
            self.guess = {(e, f): int(rng.integers(card[EVE])) for e in range(n_hidden) for f in range(n_hidden)}
        else:
            self.g_e = [int(rng.integers(card[EVE])) for _ in range(n_hidden)]
            self.g_f = [int(rng.integers(card[FRED])) for _ in range(n_hidden)]
        self.states = {
            (e, f): np.kron(self.left[e], self.right[f]) * self.q[e] * self.r[f]
            for e in range(n_hidden)
            for f in range(n_hidden)
        }

    @staticmethod
    def _shape(scenario):
        alice, charlie = outer_measurements(scenario.strategy)
        bob = bob_measurements(scenario.strategy, scenario.noise.p)
        return (len(alice), len(bob), len(charlie), len(alice[0]), len(bob[0]), len(charlie[0]))

    def _eve_ok(self, e: int, f: int, eve_ops) -> bool:
        for o in eve_ops:
            if self.model == "SE":
                if self.guess[(e, f)] != o[2]:
                    return False
            elif o[0] == EVE and self.g_e[e] != o[2]:
                return False
            elif o[0] == FRED and self.g_f[f] != o[2]:
                return False
        return True

    def moment(self, w) -> complex:
        eve_ops = [o for o in w if o[0] >= EVE]
        prod = np.eye(16, dtype=complex)
        for o in w:
            if o[0] < EVE:
                prod = prod @ self.ops[o]
        return sum(np.trace(st @ prod) for (e, f), st in self.states.items() if self._eve_ok(e, f, eve_ops))


class BellProjectionEve:
    """Strong eavesdropper measuring Bob's two qubits in the Bell basis.

    Eve's outcome for Bell result ``k`` is ``guess[k]``.
    """

    def __init__(self, scenario: BilocalScenario, target: str, guess: dict[int, int]):
        from bilocert.scenario import source_states

        self.ops = local_operators(scenario)
        rho_l, rho_r = source_states(scenario)
        self.rho = np.kron(rho_l.matrix, rho_r.matrix)
        shape = ClassicalEve._shape(scenario)
        self.behavior = behavior_of(self.rho, self.ops, shape)
        _, _, card, _, _ = _eve_labels(self.behavior, "SE", target)
        for k in range(card[EVE]):
            P = sum((bell_projector(b) for b in range(4) if guess[b] == k), np.zeros((4, 4)))
            self.ops[(EVE, 0, k)] = np.kron(np.kron(I2, P), I2)

    def moment(self, w) -> complex:
        prod = np.eye(16, dtype=complex)
        for o in w:
            prod = prod @ self.ops[o]
        return np.trace(self.rho @ prod)


def guess_success(real, problem, target: str) -> float:
    """Probability that Eve's label matches the target outcomes at settings 0."""
    _, label_of, _, tparties, card = _eve_labels(real.behavior, problem.meta["model"], target)
    total = 0.0
    for t, lab in label_of.items():
        w = list(lab)
        for q, a in zip(tparties, t):
            w.append(({"A": 0, "B": 1, "C": 2}[q], 0, a))
        w.sort(key=lambda o: o[0])
        total += real.moment(tuple(w)).real
    return total


__all__ = ["BellProjectionEve", "ClassicalEve", "guess_success"]
