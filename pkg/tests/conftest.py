from __future__ import annotations

import numpy as np
import pytest

from bilocert.scenario import BilocalScenario, MeasurementStrategy, NoiseModel, compute_behavior


def scenario(bob: str = "bsm_1x4", v: float = 1.0, c: float = 0.0, p: float = 1.0, outer: str = "standard",
             delta: float = 0.0, theta: float = np.pi / 4) -> BilocalScenario:
    return BilocalScenario(NoiseModel(v, c, p), MeasurementStrategy(outer, bob, delta, theta))


@pytest.fixture(scope="session")
def ideal_1x4():
    return compute_behavior(scenario())


@pytest.fixture(scope="session")
def ideal_2x2():
    return compute_behavior(scenario("separable_2x2"))
