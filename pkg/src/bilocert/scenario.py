"""States, noise, measurements and the behaviour tensor of the bilocal (entanglement swapping) network.

Qubit order of the global state is ``A, B1, B2, C``: the left source feeds ``A, B1``,
the right source ``B2, C``. Bob's effects act on the two middle qubits.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from itertools import product
from typing import Any, Literal

import numpy as np

from .qcore import (
    PHI_MINUS,
    PHI_PLUS,
    PSI_MINUS,
    PSI_PLUS,
    SIGMA_X,
    SIGMA_Z,
    DensityMatrix,
    Povm,
    bell_projector,
    observable_projectors,
    projector,
)

NORM_TOL = 1e-9
NS_TOL = 1e-9

OuterKind = Literal["standard", "tilted"]
BobKind = Literal["bsm_1x4", "separable_2x2", "rotated_2x4"]

# Bell outcome -> (b0, b1); b0 is the Z-parity bit, b1 the phase bit.
BELL_BITS = {PHI_PLUS: (0, 0), PHI_MINUS: (0, 1), PSI_PLUS: (1, 0), PSI_MINUS: (1, 1)}


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class NoiseModel:
    """Visibility ``v``, coloured-noise fraction ``c`` and photon indistinguishability ``p``."""

    v: float = 1.0
    c: float = 0.0
    p: float = 1.0

    def __post_init__(self) -> None:
        for name in ("v", "c", "p"):
            object.__setattr__(self, name, _check_unit(name, getattr(self, name)))


@dataclass(frozen=True)
class MeasurementStrategy:
    outer: OuterKind = "standard"
    bob: BobKind = "bsm_1x4"
    delta: float = 0.0
    theta: float = math.pi / 4

    def __post_init__(self) -> None:
        if self.outer not in ("standard", "tilted"):
            raise ValueError(f"unknown outer strategy {self.outer!r}")
        if self.bob not in ("bsm_1x4", "separable_2x2", "rotated_2x4"):
            raise ValueError(f"unknown Bob strategy {self.bob!r}")
        for name in ("delta", "theta"):
            val = float(getattr(self, name))
            if not -1e-12 <= val <= math.pi / 2 + 1e-12:
                raise ValueError(f"{name} must lie in [0, pi/2], got {val}")
            object.__setattr__(self, name, val)


@dataclass(frozen=True)
class BilocalScenario:
    """Two sources sharing one noise model unless ``right_noise`` overrides the B2-C source."""

    noise: NoiseModel = field(default_factory=NoiseModel)
    strategy: MeasurementStrategy = field(default_factory=MeasurementStrategy)
    right_noise: NoiseModel | None = None

    @property
    def noise_right(self) -> NoiseModel:
        return self.noise if self.right_noise is None else self.right_noise

    def meta(self) -> dict[str, Any]:
        s = self.strategy
        out = {
            "v": self.noise.v,
            "c": self.noise.c,
            "p_indist": self.noise.p,
            "outer": s.outer,
            "bob": s.bob,
            "delta": s.delta,
            "theta": s.theta,
        }
        if self.right_noise is not None:
            out["right_noise"] = asdict(self.right_noise)
        return out


class Behavior:
    """Probability tensor ``p[x, y, z, a, b, c]`` of the three-party network.

    Parameters
    ----------
    p : array-like, shape (X, Y, Z, A, B, C)
    meta : dict, optional
        Free-form provenance (scenario parameters, counts file, ...).
    check_ns : bool
        When False only normalisation is enforced; no-signalling violations
        are recorded in :attr:`ns_violation` instead of raising.
    """

    def __init__(self, p: Any, meta: dict[str, Any] | None = None, *, check_ns: bool = True) -> None:
        arr = np.array(p, dtype=float)
        if arr.ndim != 6:
            raise ValueError(f"behaviour tensor must have 6 axes [x,y,z,a,b,c], got {arr.ndim}")
        if arr.min() < -NORM_TOL or arr.max() > 1 + NORM_TOL:
            raise ValueError("behaviour entries must lie in [0, 1]")
        sums = arr.sum(axis=(3, 4, 5))
        if np.max(np.abs(sums - 1)) > NORM_TOL:
            raise ValueError(f"behaviour slices are not normalised (max error {np.max(np.abs(sums - 1)):.2e})")
        arr = np.clip(arr, 0.0, 1.0)
        arr.setflags(write=False)
        self.p = arr
        self.meta = dict(meta or {})
        self.ns_violation = _signalling(arr)
        if check_ns and self.ns_violation > NS_TOL:
            raise ValueError(f"behaviour violates no-signalling by {self.ns_violation:.2e}")

    @property
    def cards(self) -> dict[str, int]:
        X, Y, Z, A, B, C = self.p.shape
        return {"X": X, "Y": Y, "Z": Z, "A": A, "B": B, "C": C}

    @property
    def shape(self) -> tuple[int, ...]:
        return self.p.shape

    def is_no_signalling(self, tol: float = NS_TOL) -> bool:
        return self.ns_violation <= tol

    def marginal(self, parties: str, settings: dict[str, int] | None = None) -> np.ndarray:
        """Marginal over the listed parties (subset of 'ABC').

        Settings of summed-out parties default to 0 (irrelevant for NS data).
        Returned array is indexed by the kept parties' settings then outcomes.
        """
        settings = dict(settings or {})
        p = self.p
        idx: list[Any] = []
        for name in "XYZ":
            party = {"X": "A", "Y": "B", "Z": "C"}[name]
            idx.append(slice(None) if party in parties else settings.get(party, 0))
        sub = p[tuple(idx)]
        # sub axes: kept settings..., a, b, c
        n_kept = sum(1 for q in "ABC" if q in parties)
        drop = tuple(n_kept + k for k, q in enumerate("ABC") if q not in parties)
        return sub.sum(axis=drop)

    def to_dict(self) -> dict[str, Any]:
        return {"cards": self.cards, "p": self.p.tolist(), "meta": _jsonable(self.meta)}

    def to_json(self, **kw: Any) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: dict[str, Any], *, check_ns: bool = True) -> "Behavior":
        cards = data["cards"]
        p = np.array(data["p"], dtype=float)
        expected = tuple(int(cards[k]) for k in ("X", "Y", "Z", "A", "B", "C"))
        if p.shape != expected:
            raise ValueError(f"tensor shape {p.shape} disagrees with cards {expected}")
        return cls(p, data.get("meta", {}), check_ns=check_ns)

    @classmethod
    def from_json(cls, text: str, *, check_ns: bool = True) -> "Behavior":
        return cls.from_dict(json.loads(text), check_ns=check_ns)

    def __repr__(self) -> str:
        return f"Behavior(cards={self.cards})"


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _signalling(p: np.ndarray) -> float:
    """Largest violation of the no-signalling equalities of a tensor ``p[x,y,z,a,b,c]``."""
    worst = 0.0
    # each party's (and each pair's) marginal must not depend on the other settings
    for keep in ("A", "B", "C", "AB", "AC", "BC"):
        drop_out = tuple(3 + k for k, q in enumerate("ABC") if q not in keep)
        marg = p.sum(axis=drop_out)
        for k, q in enumerate("ABC"):
            if q in keep:
                continue
            spread = marg.max(axis=k) - marg.min(axis=k)
            worst = max(worst, float(spread.max()))
    return worst


def werner_state(v: float) -> DensityMatrix:
    """v |psi-><psi-| + (1 - v) I/4."""
    return noisy_state(v, 0.0)


def noisy_state(v: float, c: float) -> DensityMatrix:
    """Singlet mixed with white noise and with coloured (psi- / psi+) noise.

    The noise part is a fraction ``c`` of the equal psi-/psi+ mixture and ``1 - c``
    of the maximally mixed state.
    """
    v = _check_unit("v", v)
    c = _check_unit("c", c)
    singlet = bell_projector(PSI_MINUS)
    colored = 0.5 * (singlet + bell_projector(PSI_PLUS))
    rho = v * singlet + (1 - v) * (c * colored + (1 - c) * np.eye(4) / 4)
    return DensityMatrix(rho)


def effective_bsm(p: float) -> Povm:
    """Bell-state measurement with partially distinguishable photons.

    Outcome order follows the frozen Bell order (phi+, phi-, psi+, psi-). Each
    effect mixes its Bell projector with its partner of the same parity with
    weights (1 +- p)/2.
    """
    p = _check_unit("p", p)
    hi, lo = (1 + p) / 2, (1 - p) / 2
    P = [bell_projector(k) for k in range(4)]
    partner = {PHI_PLUS: PHI_MINUS, PHI_MINUS: PHI_PLUS, PSI_PLUS: PSI_MINUS, PSI_MINUS: PSI_PLUS}
    return Povm(tuple(hi * P[k] + lo * P[partner[k]] for k in range(4)))


def rotated_bell_basis(theta: float) -> list[np.ndarray]:
    c, s = math.cos(theta), math.sin(theta)
    vecs = [
        [c, 0, 0, s],
        [0, c, s, 0],
        [s, 0, 0, -c],
        [0, s, -c, 0],
    ]
    return [np.asarray(v, dtype=complex) for v in vecs]


def outer_observables(strategy: MeasurementStrategy) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Dichotomic observables (A_0, A_1) and (C_0, C_1)."""
    if strategy.outer == "standard":
        a0 = (SIGMA_Z + SIGMA_X) / math.sqrt(2)
        a1 = (SIGMA_Z - SIGMA_X) / math.sqrt(2)
        return [a0, a1], [a0, a1]
    d = strategy.delta
    cd, sd = math.cos(d), math.sin(d)
    alice = [SIGMA_Z, cd * SIGMA_X - sd * SIGMA_Z]
    charlie = [SIGMA_X, cd * SIGMA_Z - sd * SIGMA_X]
    return alice, charlie


def outer_measurements(strategy: MeasurementStrategy) -> tuple[list[Povm], list[Povm]]:
    """Two-outcome projective POVMs for Alice and Charlie (outcome 0 is eigenvalue +1)."""
    alice, charlie = outer_observables(strategy)
    to_povm = lambda obs: Povm(tuple(observable_projectors(obs)))  # noqa: E731
    return [to_povm(o) for o in alice], [to_povm(o) for o in charlie]


def bob_measurements(strategy: MeasurementStrategy, p_indist: float = 1.0) -> list[Povm]:
    if strategy.bob == "bsm_1x4":
        return [effective_bsm(p_indist)]
    if strategy.bob == "separable_2x2":
        zz = np.kron(SIGMA_Z, SIGMA_Z)
        xx = np.kron(SIGMA_X, SIGMA_X)
        return [Povm(tuple(observable_projectors(zz))), Povm(tuple(observable_projectors(xx)))]
    bsm = Povm(tuple(bell_projector(k) for k in range(4)))
    rotated = Povm(tuple(projector(v) for v in rotated_bell_basis(strategy.theta)))
    return [bsm, rotated]


def source_states(scenario: BilocalScenario) -> tuple[DensityMatrix, DensityMatrix]:
    left, right = scenario.noise, scenario.noise_right
    return noisy_state(left.v, left.c), noisy_state(right.v, right.c)


def compute_behavior(scenario: BilocalScenario) -> Behavior:
    """p(abc|xyz) = Tr[(rho_L (x) rho_R) A_{a|x} (x) B_{b|y} (x) C_{c|z}]."""
    rho_l, rho_r = source_states(scenario)
    alice, charlie = outer_measurements(scenario.strategy)
    bob = bob_measurements(scenario.strategy, scenario.noise.p)
    A = np.array([[e for e in povm] for povm in alice])  # (x, a, 2, 2)
    C = np.array([[e for e in povm] for povm in charlie])
    nb = max(len(povm) for povm in bob)
    if any(len(povm) != nb for povm in bob):
        raise ValueError("all of Bob's settings must have the same number of outcomes")
    B = np.array([[e for e in povm] for povm in bob])  # (y, b, 4, 4)
    L = rho_l.matrix.reshape(2, 2, 2, 2)  # a, b1 ; a', b1'
    R = rho_r.matrix.reshape(2, 2, 2, 2)  # b2, c ; b2', c'
    Bt = B.reshape(B.shape[0], B.shape[1], 2, 2, 2, 2)  # b1 b2 ; b1' b2'
    # Tr[(L (x) R)(A (x) B (x) C)] with L[a b1, a' b1'], R[b2 c, b2' c']
    p = np.einsum("ijkl,mnop,xski,yblojm,zrpn->xyzsbr", L, R, A, Bt, C, optimize=True)
    if np.max(np.abs(p.imag)) > 1e-12:
        raise RuntimeError("complex probabilities from a valid scenario")
    return Behavior(p.real, scenario.meta())


def bob_bits(b: int) -> tuple[int, int]:
    return BELL_BITS[b]


def brgp_value(behavior: Behavior) -> float:
    """sqrt|I| + sqrt|J| for a single-setting four-outcome Bob and dichotomic outer parties."""
    X, Y, Z, A, B, C = behavior.shape
    if (X, Y, Z, A, B, C) != (2, 1, 2, 2, 4, 2):
        raise ValueError(f"BRGP needs cards (2,1,2,2,4,2), got {(X, Y, Z, A, B, C)}")
    p = behavior.p[:, 0]  # x, z, a, b, c
    sign = np.array([1.0, -1.0])
    b0 = np.array([(-1.0) ** BELL_BITS[b][0] for b in range(4)])
    b1 = np.array([(-1.0) ** BELL_BITS[b][1] for b in range(4)])
    corr0 = np.einsum("xzabc,a,b,c->xz", p, sign, b0, sign)
    corr1 = np.einsum("xzabc,a,b,c->xz", p, sign, b1, sign)
    i_val = corr0.sum() / 4
    j_val = sum((-1) ** (x + z) * corr1[x, z] for x, z in product(range(2), range(2))) / 4
    return float(math.sqrt(abs(i_val)) + math.sqrt(abs(j_val)))
