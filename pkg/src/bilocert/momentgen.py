"""Moment-matrix relaxations with scalar extension for the bilocal network.

The guessing-probability problem is relaxed as follows. Eve's measurement
(one outcome ``e`` per guess) is absorbed into the moment matrix by splitting
it into one positive block per Eve outcome: block ``e`` holds the moments
``<E_e r^dagger c>`` for generators ``r, c`` over the parties A, B, C plus
scalar-extension columns. All blocks are expressed in one pool of canonical
moment symbols so that

* the sum of the blocks over ``e`` is the Eve-free moment matrix
  (completeness ``sum_e E_e = 1``, installed as linear rows),
* observable moments are pinned to the behavior,
* products of expectations that the network factorizes (A vs C for the
  strong eavesdropper, (A,E) vs (C,F) for the double eavesdropper) share a
  single variable, which is the linear scalar-extension constraint.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .monomials import (
    Monomial,
    Op,
    Symbol,
    Word,
    canonical_symbol,
    canonical_word,
    op,
    symbol_conj,
)
from .scenario import Behavior
from .sdpsolver import SdpInstance

EVE, FRED = 3, 4  # party indices of Eve's two measurement registers
DAG_GROUPS: dict[str, tuple[frozenset[int], ...]] = {
    "bilocal_SE": (frozenset({0}), frozenset({2})),
    "bilocal_DE": (frozenset({0, EVE}), frozenset({2, FRED})),
}
MODEL_DAG = {"SE": "bilocal_SE", "DE": "bilocal_DE"}
TARGETS = ("ABC", "AC")

# bit split of a four-outcome Bob result between the two DE registers
BITS = {0: (0, 0), 1: (0, 1), 2: (1, 0), 3: (1, 1)}


# ---------------------------------------------------------------- level spec


@dataclass(frozen=True)
class LevelSpec:
    """Choice of generating monomials.

    Parameters
    ----------
    length : int
        Maximum length of operator words over A, B, C.
    scalar_parties : str
        Parties whose words are adjoined as expectation scalars ``<Q>``;
        a subset of ``"ACE"`` (``E`` means Eve's first register).
    scalar_length : int
        Maximum length of a scalar word.
    carriers : str
        Operator words multiplying each scalar: ``"one"`` (only ``<Q>1``)
        or ``"L1"`` (``<Q>1`` and ``S<Q>`` for every single projector ``S``).
    local : bool
        Also include every product with at most one projector per party
        (the words ``A_x B_y C_z`` that ``length=2`` misses).
    """

    length: int = 2
    scalar_parties: str = "A"
    scalar_length: int = 2
    carriers: str = "L1"
    local: bool = False

    def __post_init__(self) -> None:
        if self.length < 1 or self.scalar_length < 0:
            raise ValueError("level lengths must be positive")
        if set(self.scalar_parties) - set("ACE"):
            raise ValueError(f"scalar parties must be drawn from 'ACE', got {self.scalar_parties!r}")
        if self.carriers not in ("one", "L1"):
            raise ValueError(f"carriers must be 'one' or 'L1', got {self.carriers!r}")

    @classmethod
    def default(cls, model: str) -> "LevelSpec":
        return cls()

    @classmethod
    def parse(cls, text: str | None, model: str = "SE") -> "LevelSpec":
        """Parse ``"default"`` or a comma list such as ``"length=2,scalars=AE,qlen=2,carriers=L1"``."""
        base = cls.default(model)
        if text is None or text.strip() in ("", "default"):
            return base
        keys = {
            "length": "length",
            "scalars": "scalar_parties",
            "qlen": "scalar_length",
            "carriers": "carriers",
            "local": "local",
        }
        kw = {}
        for item in text.split(","):
            m = re.fullmatch(r"\s*(\w+)\s*=\s*(\w*)\s*", item)
            if not m or m.group(1) not in keys:
                raise ValueError(f"bad level item {item!r}; expected one of {sorted(keys)}")
            name = keys[m.group(1)]
            if name in ("length", "scalar_length"):
                kw[name] = int(m.group(2))
            elif name == "local":
                if m.group(2) not in ("0", "1"):
                    raise ValueError(f"local must be 0 or 1, got {m.group(2)!r}")
                kw[name] = m.group(2) == "1"
            else:
                kw[name] = m.group(2)
        return cls(**{**base.__dict__, **kw})

    def __str__(self) -> str:
        return (
            f"length={self.length},scalars={self.scalar_parties},qlen={self.scalar_length},"
            f"carriers={self.carriers},local={int(self.local)}"
        )


# ---------------------------------------------------------------- monomials


def canonicalize(raw: Monomial) -> Monomial | None:
    """Canonical form of a monomial; ``None`` is the zero monomial."""
    return Monomial.of(raw.ops, raw.scalars)


def party_operators(behavior: Behavior) -> tuple[list[Op], list[Op], list[Op]]:
    """Projectors of A, B, C with the last outcome of every setting eliminated."""
    X, Y, Z, NA, NB, NC = behavior.shape
    return (
        [op("A", x, a) for x in range(X) for a in range(NA - 1)],
        [op("B", y, b) for y in range(Y) for b in range(NB - 1)],
        [op("C", z, c) for z in range(Z) for c in range(NC - 1)],
    )


def words_upto(ops: Sequence[Op], length: int) -> list[Word]:
    """Distinct non-zero canonical words of length <= ``length``, identity first."""
    out: dict[Word, None] = {(): None}
    for n in range(1, length + 1):
        for t in itertools.product(ops, repeat=n):
            w = canonical_word(t)
            if w is not None and len(w) == n:
                out[w] = None
    return list(out)


def generate_monomials(ops_by_party: Sequence[Sequence[Op]], length: int) -> list[Monomial]:
    """All canonical operator monomials of length <= ``length`` (identity included)."""
    ops = [o for group in ops_by_party for o in group]
    return [Monomial(w, ()) for w in words_upto(ops, length)]


def scalar_extension_set(
    base: Sequence[Monomial], scalars: Iterable[Word], carriers: Iterable[Word] = ((),)
) -> list[Monomial]:
    """Append the columns ``S<Q>`` for every carrier word ``S`` and scalar word ``Q``.

    Duplicates are dropped while keeping first-seen order.
    """
    out: dict[Monomial, None] = dict.fromkeys(base)
    for s in carriers:
        for q in scalars:
            m = Monomial.of(s, (q,))
            if m is not None and m.scalars:
                out.setdefault(m, None)
    return list(out)


# ---------------------------------------------------------------- identifications


@dataclass(frozen=True)
class Identification:
    """Cell ``first`` equals cell ``second`` (its complex conjugate when ``conjugate``)."""

    first: tuple[int, int]
    second: tuple[int, int]
    conjugate: bool
    symbol: Symbol


def _raw_cell(row: Monomial, col: Monomial) -> tuple | None:
    rd = row.dagger()
    w = canonical_word(rd.ops + col.ops)
    if w is None:
        return None
    return (w, tuple(sorted(rd.scalars + col.scalars)))


def factorization_identities(generators: Sequence[Monomial], dag_kind: str) -> list[Identification]:
    """Linear identifications between upper-triangle cells of the moment matrix.

    A cell is first labelled by its raw content (operator word times its
    scalar factors). Two cells are identified when their canonical moment
    symbols coincide, possibly after conjugation. The canonical symbol drops
    ``<1>`` factors and splits operator words into the d-separated groups of
    ``dag_kind``, so both kinds of identification (symbolic coincidence and
    factorization) are found. Cells whose value is the constant 1 are skipped.
    """
    if dag_kind not in DAG_GROUPS:
        raise ValueError(f"unknown dag kind {dag_kind!r}; expected one of {sorted(DAG_GROUPS)}")
    groups = DAG_GROUPS[dag_kind]
    n = len(generators)
    first: dict[Symbol, tuple[int, int]] = {}
    seen_raw: set = set()
    out = []
    for i in range(n):
        for j in range(i, n):
            raw = _raw_cell(generators[i], generators[j])
            if raw is None:
                continue
            s = canonical_symbol([raw[0], *raw[1]], groups, real=False)
            if not s:
                continue
            if raw in seen_raw:
                continue
            seen_raw.add(raw)
            key = min(s, symbol_conj(s))
            if key in first:
                conj = s != _symbol_at(generators, first[key], groups)
                out.append(Identification(first[key], (i, j), conj, key))
            else:
                first[key] = (i, j)
    return out


def _symbol_at(gens: Sequence[Monomial], cell: tuple[int, int], groups) -> Symbol:
    raw = _raw_cell(gens[cell[0]], gens[cell[1]])
    return canonical_symbol([raw[0], *raw[1]], groups, real=False)


# ---------------------------------------------------------------- problem


@dataclass(frozen=True)
class EveBlock:
    """One positive block: Eve outcome projectors ``label`` times the generator Gram matrix."""

    label: tuple[Op, ...]
    cells: np.ndarray  # (n, n) symbol ids, -1 for zero cells


@dataclass(frozen=True)
class MomentProblem:
    """Symbolic relaxation.

    ``symbols[k]`` is the moment symbol of variable id ``k``. Each id is
    either pinned (``known_values``), a known multiple of another id
    (``scaled``) or free. ``completeness`` holds rows ``sum(terms) = total``
    expressing ``sum_e E_e = 1``. ``objective`` maps ids to coefficients.
    """

    generators: tuple[Monomial, ...]
    blocks: tuple[EveBlock, ...]
    symbols: tuple[Symbol, ...]
    known_values: dict[int, float]
    scaled: dict[int, tuple[float, int]]
    completeness: tuple[tuple[tuple[int, ...], int], ...]
    objective: dict[int, float]
    groups: tuple[frozenset[int], ...]
    hermitian: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def matrix_size(self) -> int:
        return len(self.generators)

    @property
    def num_symbols(self) -> int:
        return len(self.symbols)


def _observable_value(p: np.ndarray, w: Word) -> float | None:
    """Probability of a word with at most one projector per observed party."""
    ps = [o[0] for o in w]
    if len(set(ps)) != len(ps) or any(q > 2 for q in ps):
        return None
    sett = [0, 0, 0]
    idx: list = [slice(None)] * 3
    for o in w:
        sett[o[0]] = o[1]
        idx[o[0]] = o[2]
    return float(np.sum(p[tuple(sett)][tuple(idx)]))


def _eve_labels(behavior: Behavior, model: str, target: str):
    """Eve outcome labels and the map from target outcome tuples to labels."""
    _, _, _, NA, NB, NC = behavior.shape
    card = {"A": NA, "B": NB, "C": NC}
    tparties = [q for q in "ABC" if q in target]
    tuples = list(itertools.product(*[range(card[q]) for q in tparties]))
    if model == "SE":
        label_of = {t: ((EVE, 0, k),) for k, t in enumerate(tuples)}
        return sorted(set(label_of.values())), label_of, {EVE: len(tuples)}, tparties, card

    def split(t):
        d = dict(zip(tparties, t))
        e, f = [], []
        if "A" in d:
            e.append(d["A"])
        if "B" in d:
            if NB == 4:
                b0, b1 = BITS[d["B"]]
                e.append(b0)
                f.append(b1)
            else:
                e.append(d["B"])
        if "C" in d:
            f.append(d["C"])
        return tuple(e), tuple(f)

    es = sorted({split(t)[0] for t in tuples})
    fs = sorted({split(t)[1] for t in tuples})
    label_of = {t: ((EVE, 0, es.index(split(t)[0])), (FRED, 0, fs.index(split(t)[1]))) for t in tuples}
    labels = [((EVE, 0, i), (FRED, 0, j)) for i in range(len(es)) for j in range(len(fs))]
    return labels, label_of, {EVE: len(es), FRED: len(fs)}, tparties, card


def _scalar_words(behavior: Behavior, level: LevelSpec, eve_card: dict[int, int], p: np.ndarray) -> list[Word]:
    oa, _, oc = party_operators(behavior)
    ops = (oa if "A" in level.scalar_parties else []) + (oc if "C" in level.scalar_parties else [])
    if "E" in level.scalar_parties:
        ops = ops + [op("E", 0, k) for k in range(eve_card[EVE])]
    out = []
    for w in words_upto(ops, level.scalar_length):
        if not w or sum(o[0] == EVE for o in w) > 1:
            continue
        if _observable_value(p, w) is not None:
            continue  # known scalar, adds nothing
        out.append(w)
    return out


def guessing_generators(behavior: Behavior, model: str, target: str, level: LevelSpec) -> list[Monomial]:
    _, _, eve_card, _, _ = _eve_labels(behavior, model, target)
    oa, ob, oc = party_operators(behavior)
    base = generate_monomials((oa, ob, oc), level.length)
    if level.local:
        seen = set(base)
        for combo in itertools.product([None, *oa], [None, *ob], [None, *oc]):
            m = Monomial.of([o for o in combo if o is not None])
            if m is not None and m not in seen:
                seen.add(m)
                base.append(m)
    words = [m.ops for m in base]
    carriers = [()] if level.carriers == "one" else [w for w in words if len(w) <= 1]
    return scalar_extension_set(base, _scalar_words(behavior, level, eve_card, behavior.p), carriers)


def build_guessing_problem(
    behavior: Behavior, eavesdropper_model: str, target: str, level_spec: LevelSpec | str | None = None
) -> MomentProblem:
    """Relaxation of Eve's maximal guessing probability for ``target`` at settings 0.

    Parameters
    ----------
    behavior : Behavior
        Observed bilocal behavior.
    eavesdropper_model : {"SE", "DE"}
        Strong eavesdropper (one register ``E``, A and C factorize) or double
        eavesdropper (registers ``E``, ``F``; (A,E) and (C,F) factorize).
    target : {"ABC", "AC"}
        Parties whose setting-0 outcomes Eve guesses.
    level_spec : LevelSpec or str, optional
        Generating set; defaults to :meth:`LevelSpec.default`.
    """
    model = eavesdropper_model.upper()
    if model not in MODEL_DAG:
        raise ValueError(f"eavesdropper model must be SE or DE, got {eavesdropper_model!r}")
    target = target.upper()
    if target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}, got {target!r}")
    level = level_spec if isinstance(level_spec, LevelSpec) else LevelSpec.parse(level_spec, model)
    if behavior.p.ndim != 6:
        raise ValueError("behavior must be a six-index tensor p[x,y,z,a,b,c]")
    groups = DAG_GROUPS[MODEL_DAG[model]]
    p = behavior.p
    labels, label_of, eve_card, tparties, card = _eve_labels(behavior, model, target)
    gens = guessing_generators(behavior, model, target, level)

    ids: dict[Symbol, int] = {}
    pending: list[Symbol] = []

    def sid(s: Symbol) -> int:
        k = ids.get(s)
        if k is None:
            k = ids[s] = len(ids)
            pending.append(s)
        return k

    def gsym(words) -> Symbol | None:
        return canonical_symbol(words, groups, True)

    n = len(gens)
    daggers = [g.dagger() for g in gens]
    blocks = []
    for lab in labels:
        cells = np.full((n, n), -1, dtype=np.int64)
        for i in range(n):
            rd = daggers[i]
            for j in range(i, n):
                w = canonical_word(lab + rd.ops + gens[j].ops)
                s = None if w is None else gsym([w, *rd.scalars, *gens[j].scalars])
                if s is not None:
                    cells[i, j] = cells[j, i] = sid(s)
        blocks.append(EveBlock(tuple(lab), cells))

    # completeness rows, closed under the symbols they introduce
    completeness = []
    done: set[Symbol] = set()
    while pending:
        s = pending.pop()
        if s in done:
            continue
        done.add(s)
        for ei, w in enumerate(s):
            evs = [o for o in w if o[0] in eve_card]
            if not evs:
                continue
            o = evs[0]
            rest = list(s[:ei]) + list(s[ei + 1 :])
            terms = tuple(
                sid(gsym(rest + [tuple((o[0], o[1], k) if q == o else q for q in w)]))
                for k in range(eve_card[o[0]])
            )
            total = sid(gsym(rest + [tuple(q for q in w if q != o)]))
            completeness.append((terms, total))
            break  # the remaining Eve factors follow through the chain of rows

    symbols = tuple(sorted(ids, key=ids.get))
    known, scaled = {}, {}
    for k, s in enumerate(symbols):
        coef, rest = 1.0, []
        for w in s:
            x = _observable_value(p, w)
            if x is None:
                rest.append(w)
            else:
                coef *= x
        if not rest:
            known[k] = coef
        elif len(rest) < len(s):
            r = canonical_symbol(rest, (), True)
            scaled[k] = (coef, sid(r))
    symbols = tuple(sorted(ids, key=ids.get))  # reduced remainders may add free symbols

    objective: dict[int, float] = {}
    for t, lab in label_of.items():
        factors = []
        for q, a in zip(tparties, t):
            nq = card[q]
            if a < nq - 1:
                factors.append([(1.0, (op(q, 0, a),))])
            else:  # eliminated last outcome: 1 - sum of the others
                factors.append([(1.0, ())] + [(-1.0, (op(q, 0, b),)) for b in range(nq - 1)])
        for combo in itertools.product(*factors):
            coef = float(np.prod([c for c, _ in combo]))
            w = canonical_word(list(lab) + [o for _, ws in combo for o in ws])
            s = gsym([w])
            if s not in ids:
                raise ValueError("level too small: objective moment missing from the relaxation")
            objective[ids[s]] = objective.get(ids[s], 0.0) + coef

    meta = {"model": model, "target": target, "level": str(level), "eve_card": dict(eve_card)}
    return MomentProblem(
        tuple(gens), tuple(blocks), symbols, known, scaled, tuple(completeness), objective, groups, False, meta
    )


# ---------------------------------------------------------------- SDP instance


def _affine(problem: MomentProblem):
    """Map every symbol id to (constant, coefficient, free variable index or -1)."""
    free: dict[int, int] = {}
    out = {}
    for k in range(problem.num_symbols):
        if k in problem.known_values:
            out[k] = (problem.known_values[k], 0.0, -1)
        elif k in problem.scaled:
            coef, r = problem.scaled[k]
            out[k] = (0.0, coef, free.setdefault(r, len(free)))
        else:
            out[k] = (0.0, 1.0, free.setdefault(k, len(free)))
    return out, free


def realify(problem: MomentProblem) -> SdpInstance:
    """Real block LMI of ``problem`` for :func:`bilocert.sdpsolver.solve`.

    Symbols are identified with their complex conjugates when built, which is
    exact for the real optimum: the conjugate of any feasible moment
    assignment is feasible with the same objective, so their average is a
    real feasible point. Each Eve block therefore maps to one real symmetric
    block of the same size.
    """
    aff, free = _affine(problem)
    m = len(free)
    F0s, ents = [], []
    for blk in problem.blocks:
        n = blk.cells.shape[0]
        f0 = np.zeros((n, n))
        rows = []
        iu, ju = np.triu_indices(n)
        for i, j in zip(iu, ju):
            k = int(blk.cells[i, j])
            if k < 0:
                continue
            c0, a, v = aff[k]
            if v < 0:
                f0[i, j] = f0[j, i] = c0
            elif a != 0.0:
                rows.append((i, j, v, a))
        F0s.append(f0)
        ents.append(np.array(rows, dtype=float).reshape(-1, 4))
    ri, ci, vi, f = [], [], [], []
    r = 0
    for terms, total in problem.completeness:
        acc: dict[int, float] = {}
        const = 0.0
        for k, sg in [(t, 1.0) for t in terms] + [(total, -1.0)]:
            c0, a, v = aff[k]
            const += sg * c0
            if v >= 0:
                acc[v] = acc.get(v, 0.0) + sg * a
        acc = {v: a for v, a in acc.items() if abs(a) > 1e-15}
        if not acc:
            if abs(const) > 1e-9:
                raise ValueError(f"behavior inconsistent with completeness (residual {const:.2e})")
            continue
        for v, a in acc.items():
            ri.append(r)
            ci.append(v)
            vi.append(a)
        f.append(-const)
        r += 1
    c = np.zeros(m)
    c0 = 0.0
    for k, w in problem.objective.items():
        b0, a, v = aff[k]
        c0 += w * b0
        if v >= 0:
            c[v] += w * a
    E = sp.csr_matrix((vi, (ri, ci)), shape=(r, m))
    return SdpInstance(tuple(b.cells.shape[0] for b in problem.blocks), tuple(F0s), tuple(ents), c, c0, E, np.array(f))


def moment_values(problem: MomentProblem, moment) -> np.ndarray:
    """Evaluate every symbol with ``moment(word) -> complex`` (product over factors)."""
    out = np.empty(problem.num_symbols, dtype=complex)
    for k, s in enumerate(problem.symbols):
        v = 1.0 + 0j
        for w in s:
            v *= moment(w)
        out[k] = v
    return out


def block_matrices(problem: MomentProblem, values: np.ndarray) -> list[np.ndarray]:
    """Numeric Eve blocks for given symbol values (zero cells stay 0)."""
    out = []
    for blk in problem.blocks:
        cells = blk.cells
        m = np.where(cells >= 0, values[np.maximum(cells, 0)], 0.0)
        out.append(m)
    return out
