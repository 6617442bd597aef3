"""Non-commutative projector words, scalar-extended monomials and moment symbols.

An operator symbol is ``(party, setting, outcome)``. Parties are ordered
A < B < C < E < F and operators of different parties commute. Within a party
each symbol is a projector, and projectors of one setting are mutually
orthogonal.

A moment symbol is the canonical form of a product of expectation values
``<W1><W2>...``; it is stored as a sorted tuple of words. Identity words are
dropped, so ``()`` is the constant 1. ``None`` is the zero moment.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import groupby
from typing import Iterable, Sequence

PARTIES = ("A", "B", "C", "E", "F")
PARTY_INDEX = {name: k for k, name in enumerate(PARTIES)}

Op = tuple[int, int, int]
Word = tuple[Op, ...]
Symbol = tuple[Word, ...]

# outcome label marking a dichotomic +-1 observable instead of a projector
OBSERVABLE = -1

IDENTITY: Word = ()
ONE: Symbol = ()


def op(party: str | int, setting: int, outcome: int) -> Op:
    p = PARTY_INDEX[party] if isinstance(party, str) else int(party)
    return (p, int(setting), int(outcome))


def obs(party: str | int, setting: int) -> Op:
    return op(party, setting, OBSERVABLE)


def word(*ops: Op) -> Word:
    return tuple(ops)


def _reduce_party(ops: list[Op]) -> list[Op] | None:
    out: list[Op] = []
    for o in ops:
        if out and out[-1][1] == o[1]:
            if o[2] == OBSERVABLE and out[-1][2] == OBSERVABLE:
                out.pop()  # involution X^2 = 1
                continue
            if out[-1][2] == o[2]:
                continue  # idempotence
            if OBSERVABLE not in (o[2], out[-1][2]):
                return None  # orthogonal projectors
        out.append(o)
    return out


def canonical_word(w: Iterable[Op]) -> Word | None:
    """Sort parties, apply idempotence and orthogonality. Returns None for zero."""
    ops = sorted(w, key=lambda o: o[0])  # stable: keeps order inside a party
    out: list[Op] = []
    for _, grp in groupby(ops, key=lambda o: o[0]):
        red = _reduce_party(list(grp))
        if red is None:
            return None
        out.extend(red)
    return tuple(out)


def adjoint(w: Word) -> Word:
    """Adjoint of a canonical word: reverse each party's sub-word."""
    out: list[Op] = []
    for _, grp in groupby(w, key=lambda o: o[0]):
        out.extend(reversed(list(grp)))
    return tuple(out)


def parties_of(w: Word) -> frozenset[int]:
    return frozenset(o[0] for o in w)


def split_word(w: Word, groups: Sequence[frozenset[int]]) -> list[Word]:
    """Split ``w`` into independent factors when every party of ``w`` lies in one of ``groups``.

    Parties not covered by any group glue the whole word together, so the word
    is returned unsplit.
    """
    if not groups or not w:
        return [w]
    ps = parties_of(w)
    owner: dict[int, int] = {}
    for p in ps:
        hits = [g for g, members in enumerate(groups) if p in members]
        if not hits:
            return [w]
        owner[p] = hits[0]
    used = sorted(set(owner.values()))
    if len(used) < 2:
        return [w]
    return [tuple(o for o in w if owner[o[0]] == g) for g in used]


def symbol_conj(s: Symbol) -> Symbol:
    return tuple(sorted(adjoint(w) for w in s))


def canonical_symbol(
    words: Iterable[Word | None],
    groups: Sequence[frozenset[int]] = (),
    real: bool = True,
) -> Symbol | None:
    """Canonical moment symbol for the product of expectations of ``words``.

    Each word is first canonicalised and split along ``groups`` (independence
    factorisation). With ``real=True`` a symbol and its complex conjugate are
    identified, which is valid for conjugation-invariant relaxations.
    """
    elems: list[Word] = []
    for w in words:
        if w is None:
            return None
        cw = canonical_word(w)
        if cw is None:
            return None
        for part in split_word(cw, groups):
            if part:
                elems.append(part)
    s = tuple(sorted(elems))
    if real:
        c = symbol_conj(s)
        if c < s:
            s = c
    return s


@dataclass(frozen=True, order=True)
class Monomial:
    """Generator of a moment matrix: an operator word times expectation scalars.

    ``scalars`` holds words ``Q`` standing for the scalar ``<Q>``.
    """

    ops: Word = ()
    scalars: tuple[Word, ...] = ()

    @classmethod
    def of(cls, ops: Iterable[Op] = (), scalars: Iterable[Iterable[Op]] = ()) -> "Monomial | None":
        w = canonical_word(ops)
        if w is None:
            return None
        sc = []
        for q in scalars:
            cq = canonical_word(q)
            if cq is None:
                return None
            if cq:
                sc.append(cq)
        return cls(w, tuple(sorted(sc)))

    @property
    def is_identity(self) -> bool:
        return not self.ops and not self.scalars

    @property
    def length(self) -> int:
        return len(self.ops)

    def dagger(self) -> "Monomial":
        # <Q>* = <Q^dagger>
        return Monomial(adjoint(self.ops), tuple(sorted(adjoint(q) for q in self.scalars)))

    def __str__(self) -> str:
        return monomial_str(self)


def cell_symbol(
    row: Monomial, col: Monomial, groups: Sequence[frozenset[int]] = (), real: bool = True
) -> Symbol | None:
    """Symbol of the moment-matrix entry <row^dagger col>."""
    rd = row.dagger()
    op_word = canonical_word(rd.ops + col.ops)
    if op_word is None:
        return None
    return canonical_symbol([op_word, *rd.scalars, *col.scalars], groups, real)


def op_str(o: Op) -> str:
    if o[2] == OBSERVABLE:
        return f"{PARTIES[o[0]]}{o[1]}"
    return f"{PARTIES[o[0]]}{o[2]}|{o[1]}"


def word_str(w: Word) -> str:
    return "1" if not w else " ".join(op_str(o) for o in w)


def monomial_str(m: Monomial) -> str:
    base = word_str(m.ops)
    if not m.scalars:
        return base
    sc = "".join(f"<{word_str(q)}>" for q in m.scalars)
    return sc if not m.ops else f"{base} {sc}"


def symbol_str(s: Symbol | None) -> str:
    if s is None:
        return "0"
    if not s:
        return "1"
    return "".join(f"<{word_str(w)}>" for w in s)
