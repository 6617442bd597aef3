"""Small dense quantum toolkit: Pauli matrices, Bell states, density operators and POVMs.

Everything here works on plain complex ``numpy`` arrays. The two wrapper classes
:class:`DensityMatrix` and :class:`Povm` only add validation on construction and are
otherwise immutable views of their arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

STRUCT_TOL = 1e-10
ARITH_TOL = 1e-12

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# Frozen Bell-basis order, used for behaviours, reports and file formats.
BELL_LABELS = ("phi+", "phi-", "psi+", "psi-")
PHI_PLUS, PHI_MINUS, PSI_PLUS, PSI_MINUS = range(4)

_S = 1.0 / np.sqrt(2.0)
_BELL_VECTORS = np.array(
    [
        [_S, 0, 0, _S],
        [_S, 0, 0, -_S],
        [0, _S, _S, 0],
        [0, _S, -_S, 0],
    ],
    dtype=complex,
)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def is_hermitian(m: np.ndarray, atol: float = ARITH_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.allclose(m, m.conj().T, rtol=0, atol=atol)


def kron(*factors: np.ndarray) -> np.ndarray:
    """Kronecker product of one or more matrices (left to right)."""
    if not factors:
        raise ValueError("kron needs at least one factor")
    return reduce(np.kron, (np.asarray(f, dtype=complex) for f in factors))


def projector(vec: Sequence[complex]) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def bell_vector(index: int) -> np.ndarray:
    if index not in range(4):
        raise ValueError(f"Bell index must be in 0..3, got {index!r}")
    return _BELL_VECTORS[index].copy()


def bell_projector(index: int) -> np.ndarray:
    """Rank-one projector on a Bell state (0=phi+, 1=phi-, 2=psi+, 3=psi-)."""
    return projector(bell_vector(index))


def eigh(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix, ascending eigenvalues."""
    m = np.asarray(m, dtype=complex)
    if not is_hermitian(m, atol=1e-9):
        raise ValueError("eigh expects a Hermitian matrix")
    return np.linalg.eigh((m + m.conj().T) / 2)


def min_eigenvalue(m: np.ndarray) -> float:
    return float(eigh(m)[0][0])


def observable_projectors(obs: np.ndarray) -> list[np.ndarray]:
    """Projectors on the +1 and -1 eigenspaces of a dichotomic observable.

    Outcome 0 is the +1 eigenspace, outcome 1 the -1 eigenspace.
    """
    obs = np.asarray(obs, dtype=complex)
    ident = np.eye(obs.shape[0], dtype=complex)
    return [(ident + obs) / 2, (ident - obs) / 2]


@dataclass(frozen=True)
class DensityMatrix:
    """A validated density operator.

    Construction checks hermiticity (1e-12), unit trace (1e-12) and
    positivity (smallest eigenvalue >= -1e-10).
    """

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {m.shape}")
        if not is_hermitian(m):
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1) > ARITH_TOL:
            raise ValueError(f"density matrix trace is {tr.real:.3g}, expected 1")
        lam = np.linalg.eigvalsh((m + m.conj().T) / 2)[0]
        if lam < -STRUCT_TOL:
            raise ValueError(f"density matrix has negative eigenvalue {lam:.3g}")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(np.kron(self.matrix, other.matrix))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True)
class Povm:
    """A validated POVM: positive elements summing to the identity."""

    elements: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        elems = tuple(_frozen(e) for e in self.elements)
        if not elems:
            raise ValueError("POVM needs at least one element")
        d = elems[0].shape[0]
        for k, e in enumerate(elems):
            if e.shape != (d, d):
                raise ValueError(f"POVM element {k} has shape {e.shape}, expected {(d, d)}")
            if not is_hermitian(e, atol=STRUCT_TOL):
                raise ValueError(f"POVM element {k} is not Hermitian")
            if np.linalg.eigvalsh((e + e.conj().T) / 2)[0] < -STRUCT_TOL:
                raise ValueError(f"POVM element {k} is not positive semidefinite")
        if not np.allclose(sum(elems), np.eye(d), rtol=0, atol=STRUCT_TOL):
            raise ValueError("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", elems)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, k: int) -> np.ndarray:
        return self.elements[k]

    def __iter__(self):
        return iter(self.elements)


def partial_trace(
    rho: DensityMatrix | np.ndarray, subsystem_dims: Sequence[int], keep: Iterable[int]
) -> DensityMatrix:
    """Trace out every subsystem not listed in ``keep``.

    ``subsystem_dims`` lists the local dimensions in tensor order; the kept
    subsystems stay in their original relative order.
    """
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    dims = [int(d) for d in subsystem_dims]
    if int(np.prod(dims)) != m.shape[0]:
        raise ValueError(f"subsystem dims {dims} do not multiply to {m.shape[0]}")
    keep = sorted(set(keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {len(dims)} subsystems")
    n = len(dims)
    t = m.reshape(dims + dims)
    traced = [k for k in range(n) if k not in keep]
    # trace pairs from the highest axis down so the remaining axis numbers stay valid
    for k in sorted(traced, reverse=True):
        cur = t.ndim // 2
        t = np.trace(t, axis1=k, axis2=k + cur)
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return DensityMatrix(t.reshape(d_keep, d_keep))


def born_probability(rho: DensityMatrix | np.ndarray, effects: Sequence[np.ndarray]) -> float:
    """Tr(rho E1 (x) E2 (x) ...), clamped to [0, 1] after a sanity check."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    op = kron(*effects)
    if op.shape != m.shape:
        raise ValueError(f"effect product has shape {op.shape}, state has {m.shape}")
    p = np.trace(m @ op)
    if abs(p.imag) > 1e-9 or p.real < -STRUCT_TOL or p.real > 1 + STRUCT_TOL:
        raise ValueError(f"Born rule returned {p}, effects are not valid")
    return float(min(max(p.real, 0.0), 1.0))
