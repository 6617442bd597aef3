"""Hypothesis property tests on cheap invariants (no SDP solves)."""

from __future__ import annotations

import itertools

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from bilocert.bounds import informed_guess, node_vulnerability_attack, uniform_guess
from bilocert.ingest import CountsTable, empirical_behavior
from bilocert.momentgen import LevelSpec
from bilocert.monomials import adjoint, canonical_symbol, canonical_word, op
from bilocert.scenario import Behavior, compute_behavior

from .conftest import scenario

unit = st.floats(0.0, 1.0, allow_nan=False)
angle = st.floats(0.0, np.pi / 2, allow_nan=False)
bell_bob = st.sampled_from(["bsm_1x4", "separable_2x2"])
target = st.sampled_from(["AC", "ABC"])


@st.composite
def scenarios(draw, bobs=st.sampled_from(["bsm_1x4", "separable_2x2", "rotated_2x4"])):
    bob = draw(bobs)
    outer = draw(st.sampled_from(["standard", "tilted"]))
    return scenario(bob, draw(unit), draw(unit), draw(unit), outer, draw(angle), draw(angle))


@settings(max_examples=40, deadline=None)
@given(scenarios())
def test_behavior_is_a_no_signalling_distribution(sc):
    beh = compute_behavior(sc)
    assert np.all(beh.p >= -1e-12)
    assert np.allclose(beh.p.sum(axis=(3, 4, 5)), 1.0, atol=1e-12)
    assert beh.is_no_signalling()
    # outer nodes share no source: p(a, c | x, z) = p(a | x) p(c | z)
    pac = beh.p.sum(axis=4)[:, 0]
    pa, pc = pac.sum(axis=3), pac.sum(axis=2)
    assert np.allclose(pac, pa[:, :, :, None] * pc[:, :, None, :], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(scenarios(bell_bob), target)
def test_attack_ordering(sc, t):
    beh = compute_behavior(sc)
    u = uniform_guess(t, beh).p_guess
    i = informed_guess(beh, t).p_guess
    n = node_vulnerability_attack(sc, t).p_guess
    assert u <= i + 1e-12
    assert i <= n + 1e-12
    assert n <= 1 + 1e-12


@settings(max_examples=30, deadline=None)
@given(scenarios(), target)
def test_informed_guess_is_brute_force_max(sc, t):
    beh = compute_behavior(sc)
    p0 = beh.p[0, 0, 0]
    na, nb, nc = p0.shape
    best = 0.0
    if t == "AC":
        for g in itertools.product(range(na * nc), repeat=nb):
            best = max(best, sum(p0[g[b] // nc, b, g[b] % nc] for b in range(nb)))
    else:
        best = float(p0.max())
    assert informed_guess(beh, t).p_guess == best


ops = st.tuples(st.integers(0, 2), st.integers(0, 1), st.integers(-1, 1)).map(lambda o: op(*o))
words = st.lists(ops, max_size=6)


@given(words)
def test_canonical_word_is_idempotent(w):
    cw = canonical_word(w)
    if cw is not None:
        assert canonical_word(cw) == cw
        assert canonical_word(adjoint(cw)) == adjoint(cw)
        assert adjoint(adjoint(cw)) == cw


@given(st.lists(words, min_size=1, max_size=3))
def test_real_symbol_is_conjugation_invariant(ws):
    s = canonical_symbol(ws)
    if s is not None:
        assert canonical_symbol([adjoint(canonical_word(w)) for w in ws]) == s


@given(
    st.integers(1, 4),
    st.sampled_from(["", "A", "C", "AC", "AE", "E"]),
    st.integers(1, 3),
    st.sampled_from(["one", "L1"]),
    st.booleans(),
    st.sampled_from(["SE", "DE"]),
)
def test_level_spec_round_trip(length, scalars, qlen, carriers, local, model):
    lv = LevelSpec(length, scalars, qlen, carriers, local)
    assert LevelSpec.parse(str(lv), model) == lv


counts = st.lists(st.integers(0, 50), min_size=64, max_size=64).map(lambda v: np.array(v, dtype=float).reshape(2, 2, 2, 4, 2))


@given(counts)
def test_counts_csv_round_trip(n):
    n[:, :, 0, 0, 0] += 1  # positive slice totals
    table = CountsTable(n)
    back = CountsTable.from_csv(table.to_csv())
    assert np.array_equal(back.counts, table.counts)
    emp = empirical_behavior(table)
    assert np.allclose(emp.p.sum(axis=(3, 4, 5)), 1.0)


@given(st.lists(unit, min_size=16, max_size=16))
def test_behavior_json_round_trip(w):
    q = np.array(w) + 1e-3
    p = np.broadcast_to((q / q.sum()).reshape(2, 4, 2), (1, 1, 1, 2, 4, 2)).copy()
    beh = Behavior(p)
    back = Behavior.from_json(beh.to_json())
    assert np.array_equal(back.p, beh.p)
