from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from bilocert.bounds import (
    BoundReport,
    GuessTarget,
    behavior_from_state,
    best_analytic_bound,
    informed_guess,
    node_vulnerability_attack,
    post_projection_state,
    uniform_guess,
)
from bilocert.qcore import DensityMatrix, bell_projector
from bilocert.scenario import compute_behavior, source_states

from .conftest import scenario


def brute_force_informed(p0: np.ndarray, axes) -> float:
    """Explicit loop over non-target outcomes, max over target outcomes."""
    rest = [k for k in range(3) if k not in axes]
    total = 0.0
    for r in itertools.product(*[range(p0.shape[k]) for k in rest]):
        best = 0.0
        for t in itertools.product(*[range(p0.shape[k]) for k in axes]):
            idx = [0, 0, 0]
            for k, v in zip(axes, t):
                idx[k] = v
            for k, v in zip(rest, r):
                idx[k] = v
            best = max(best, p0[tuple(idx)])
        total += best
    return total


def test_target_normalization():
    assert GuessTarget("ca").parties == "AC"
    assert GuessTarget.of("abc").axes() == (0, 1, 2)
    for bad in ("", "AD", "X"):
        with pytest.raises(ValueError):
            GuessTarget(bad)


def test_reference_values(ideal_1x4, ideal_2x2):
    assert uniform_guess("ABC", ideal_1x4).p_guess == pytest.approx(1 / 16)
    assert uniform_guess("ABC", ideal_2x2).hmin == pytest.approx(3.0)
    assert informed_guess(ideal_1x4, "ABC").p_guess == pytest.approx(0.125)
    assert informed_guess(ideal_1x4, "ABC").hmin == pytest.approx(3.0)
    assert informed_guess(ideal_2x2, "ABC").p_guess == pytest.approx(0.1875)
    assert informed_guess(ideal_1x4, "AC").p_guess == pytest.approx(0.375)


def test_node_vulnerability_is_three_eighths():
    for bob in ("bsm_1x4", "separable_2x2"):
        for target in ("AC", "ABC"):
            r = node_vulnerability_attack(scenario(bob), target)
            assert r.p_guess == pytest.approx(0.375, abs=1e-12)
            assert r.hmin == pytest.approx(-math.log2(0.375))
    with pytest.raises(ValueError):
        node_vulnerability_attack(scenario("rotated_2x4", theta=0.3), "AC")


def test_node_attack_at_zero_visibility():
    # sources are maximally mixed: knowing Bob's result leaves a and c uniform
    assert node_vulnerability_attack(scenario(v=0.0), "AC").p_guess == pytest.approx(0.25)
    assert node_vulnerability_attack(scenario(v=0.0), "ABC").p_guess == pytest.approx(0.25)


@pytest.mark.parametrize("seed", range(10))
def test_informed_equals_brute_force(seed):
    rng = np.random.default_rng(seed)
    bob = ["bsm_1x4", "separable_2x2", "rotated_2x4"][seed % 3]
    outer = "tilted" if seed % 2 else "standard"
    sc = scenario(bob, v=rng.uniform(), c=rng.uniform(), p=rng.uniform(), outer=outer,
                  delta=rng.uniform(0, 1.5), theta=rng.uniform(0, 1.5))
    beh = compute_behavior(sc)
    for t in ("A", "AC", "ABC", "B", "BC"):
        tg = GuessTarget(t)
        assert informed_guess(beh, tg).p_guess == brute_force_informed(beh.p[0, 0, 0], tg.axes())


def test_post_projection_state():
    rho = DensityMatrix(bell_projector(0))
    branches = post_projection_state(rho, [bell_projector(k) for k in range(4)])
    assert len(branches) == 1  # zero-weight branches are dropped
    w, st = branches[0]
    assert w == pytest.approx(1.0)
    assert np.allclose(st.matrix, bell_projector(0))
    with pytest.raises(ValueError):
        post_projection_state(rho, [bell_projector(0)])


def test_bell_projection_keeps_the_behavior():
    sc = scenario(v=0.8, c=0.4)
    rho_l, rho_r = source_states(sc)
    rho = np.kron(rho_l.matrix, rho_r.matrix)
    projs = [np.kron(np.kron(np.eye(2), bell_projector(k)), np.eye(2)) for k in range(4)]
    mixed = sum(w * st.matrix for w, st in post_projection_state(rho, projs))
    assert np.allclose(behavior_from_state(mixed, sc), compute_behavior(sc).p, atol=1e-12)


def test_best_bound_per_model():
    sc = scenario()
    se = best_analytic_bound(sc, "SE", "ABC")
    de = best_analytic_bound(sc, "DE", "ABC")
    assert se.strategy == "node_vulnerability" and se.p_guess == pytest.approx(0.375)
    assert de.strategy == "informed" and de.p_guess == pytest.approx(0.125)
    assert set(se.details["candidates"]) == {"uniform", "informed", "node_vulnerability"}
    assert best_analytic_bound(sc, "we", "AC").strategy == "informed"
    with pytest.raises(ValueError):
        best_analytic_bound(sc, "XE", "AC")


def test_report_serialization():
    r = BoundReport.of("informed", 0.25, note="x")
    assert r.hmin == pytest.approx(2.0)
    assert r.p_guess_lower == 0.25 and r.hmin_upper == pytest.approx(2.0)
    assert set(r.to_dict()) == {"strategy", "p_guess", "hmin", "details"}
    assert '"informed"' in r.to_json()
    with pytest.raises(ValueError):
        BoundReport.of("none", 0.0)
