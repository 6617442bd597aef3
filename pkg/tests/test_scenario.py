from __future__ import annotations

import math

import numpy as np
import pytest

from bilocert.qcore import bell_projector
from bilocert.scenario import (
    BELL_BITS,
    Behavior,
    MeasurementStrategy,
    NoiseModel,
    brgp_value,
    compute_behavior,
    effective_bsm,
    noisy_state,
    rotated_bell_basis,
)

from .conftest import scenario


def test_cards_per_bob_variant():
    assert compute_behavior(scenario("bsm_1x4")).shape == (2, 1, 2, 2, 4, 2)
    assert compute_behavior(scenario("separable_2x2")).shape == (2, 2, 2, 2, 2, 2)
    assert compute_behavior(scenario("rotated_2x4", theta=0.3)).shape == (2, 2, 2, 2, 4, 2)


def test_ideal_swapping_statistics(ideal_1x4):
    p = ideal_1x4.p[0, 0, 0]
    assert np.allclose(p.sum(axis=(0, 2)), 0.25)  # Bell outcomes uniform
    # A0 and C0 agree on phi+, anticorrelate on psi-, are unbiased on the rest
    assert p[0, 0, 0] == pytest.approx(0.125) and p[0, 0, 1] == pytest.approx(0.0)
    assert p[0, 3, 1] == pytest.approx(0.125) and p[0, 3, 0] == pytest.approx(0.0)
    assert np.allclose(p[:, 1, :], 0.0625)
    assert p.max() == pytest.approx(0.125)


def test_brgp_scales_linearly_with_visibility():
    for v in (1.0, 0.8, 0.5):
        assert brgp_value(compute_behavior(scenario(v=v))) == pytest.approx(math.sqrt(2) * v, abs=1e-12)
    with pytest.raises(ValueError):
        brgp_value(compute_behavior(scenario("separable_2x2")))


def test_zero_visibility_is_uniform():
    p = compute_behavior(scenario(v=0.0)).p
    assert np.allclose(p, 1 / 16)


def test_behaviors_are_normalized_and_no_signalling():
    for bob in ("bsm_1x4", "separable_2x2", "rotated_2x4"):
        for outer, delta in (("standard", 0.0), ("tilted", 0.4)):
            b = compute_behavior(scenario(bob, v=0.7, c=0.3, p=0.8, outer=outer, delta=delta))
            assert np.allclose(b.p.sum(axis=(3, 4, 5)), 1.0)
            assert b.is_no_signalling(1e-12)


def test_noisy_state_mixture():
    rho = noisy_state(0.5, 1.0).matrix
    expected = 0.5 * bell_projector(3) + 0.25 * (bell_projector(3) + bell_projector(2))
    assert np.allclose(rho, expected)
    assert np.allclose(noisy_state(0.0, 0.0).matrix, np.eye(4) / 4)


def test_effective_bsm_limits():
    assert np.allclose(effective_bsm(1.0)[0], bell_projector(0))
    half = effective_bsm(0.0)
    assert np.allclose(half[0], half[1])
    assert np.allclose(half[0], 0.5 * (bell_projector(0) + bell_projector(1)))


def test_bell_bits_convention():
    assert BELL_BITS == {0: (0, 0), 1: (0, 1), 2: (1, 0), 3: (1, 1)}


def test_rotated_basis_is_orthonormal():
    vecs = np.array(rotated_bell_basis(0.37))
    assert np.allclose(vecs @ vecs.conj().T, np.eye(4))


def test_parameter_validation():
    with pytest.raises(ValueError):
        NoiseModel(v=1.2)
    with pytest.raises(ValueError):
        MeasurementStrategy("standard", "bsm_2x2")
    with pytest.raises(ValueError):
        MeasurementStrategy("tilted", "bsm_1x4", delta=2.0)


def test_behavior_validation_and_round_trip(ideal_1x4):
    again = Behavior.from_json(ideal_1x4.to_json())
    assert np.array_equal(again.p, ideal_1x4.p)
    with pytest.raises(ValueError):
        Behavior(np.ones((2, 1, 2, 2, 4, 2)))
    with pytest.raises(ValueError):
        Behavior(np.ones((2, 2)))
    bad = np.zeros((2, 1, 2, 2, 4, 2))
    bad[0, 0, 0, 0, 0, 0] = 1
    bad[1, 0, 0, 0, 0, 1] = 1  # C's marginal depends on x
    bad[:, 0, 1, 0, 0, 0] = 1
    with pytest.raises(ValueError):
        Behavior(bad)
    assert Behavior(bad, check_ns=False).ns_violation == pytest.approx(1.0)


def test_marginal(ideal_1x4):
    pa = ideal_1x4.marginal("A")
    assert pa.shape == (2, 2)
    assert np.allclose(pa, 0.5)
