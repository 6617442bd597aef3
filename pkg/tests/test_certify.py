from __future__ import annotations

import importlib
import math

import pytest

from bilocert.certify import (
    CSV_HEADER,
    CertificationReport,
    certify,
    sweep_tilted,
    sweep_visibility,
    thread_count,
    write_csv,
)
from bilocert.sdpsolver import from_sdpa

from .conftest import scenario

cmod = importlib.import_module("bilocert.certify")
H_SE = -math.log2(0.375)


@pytest.fixture(scope="module")
def se_ac():
    return certify(scenario(), "SE", "AC")


def test_ideal_se_ac(se_ac):
    assert se_ac.hmin_certified == pytest.approx(H_SE, abs=0.02)
    assert se_ac.bound_valid
    assert se_ac.analytic.strategy == "node_vulnerability"
    assert abs(se_ac.gap) <= 0.02
    assert se_ac.brgp == pytest.approx(math.sqrt(2))


def test_report_formats(se_ac):
    row = se_ac.csv_row()
    assert len(row) == len(CSV_HEADER.split(","))
    text = write_csv([se_ac])
    lines = text.strip().split("\n")
    assert lines[0] == CSV_HEADER and len(lines) == 2
    d = se_ac.to_dict()
    assert d["eve_model"] == "SE" and d["target"] == "AC"
    assert d["solver"]["bound_valid"] is True
    assert '"p_guess_sdp"' in se_ac.to_json()


def test_failed_points_are_flagged():
    text = write_csv([{"error": "boom", "scenario": scenario(v=0.5)}])
    assert text.strip().split("\n")[1].split(",")[13] == "error"


def test_certify_validation():
    with pytest.raises(ValueError):
        certify(scenario(), "WE", "AC")
    with pytest.raises(ValueError):
        certify(scenario(), "SE", "AB")


def test_sdpa_export(tmp_path):
    path = tmp_path / "se.dat-s"
    r = certify(scenario(v=0.9), "SE", "AC", export_sdpa=path)
    inst = from_sdpa(path.read_text())
    assert inst.num_vars == r.diagnostics["variables"]


def test_uncorrelated_behavior_gives_no_randomness():
    r = certify(scenario(v=0.0), "SE", "AC")
    assert r.hmin_certified == pytest.approx(0.0, abs=1e-3)


def test_sweep_keeps_grid_order():
    grid = [1.0, 0.6]
    out = sweep_visibility(scenario(), "SE", "AC", grid, threads=1)
    assert [r.scenario.noise.v for r in out] == grid
    assert out[0].hmin_certified > out[1].hmin_certified
    with pytest.raises(ValueError):
        sweep_visibility(scenario(), "SE", "AC", [])


def test_thread_count(monkeypatch):
    monkeypatch.setenv("BILOCERT_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("BILOCERT_THREADS", "many")
    with pytest.raises(ValueError):
        thread_count()


def test_golden_refinement():
    f = lambda s: -((s - 0.37) ** 2)  # noqa: E731
    grid = [0.0, 0.25, 0.5, 0.75]
    s = cmod._golden(f, grid, [f(g) for g in grid])
    assert s == pytest.approx(0.37, abs=2e-3)
    assert cmod._golden(f, [0.5, 0.75], [f(0.5), f(0.75)]) is None  # maximum on the edge


def test_tilted_sweep_refines(monkeypatch):
    # replace the SDP by a smooth stand-in peaking at delta = 0.4
    def fake(scen, model, target, level=None, tol=1e-7, max_iter=200, export_sdpa=None):
        d = scen.strategy.delta
        h = 2.0 - (d - 0.4) ** 2
        rep = certify(scenario(v=0.0), "SE", "AC") if not hasattr(fake, "base") else fake.base
        fake.base = rep
        return CertificationReport(scen, model, target, "fake", 2 ** -h, h, rep.analytic, 0.0, None, "optimal", 1,
                                   0.0, 0.0)

    monkeypatch.setattr(cmod, "certify", fake)
    res = sweep_tilted("SE", "bsm_1x4", "ABC", [0.1, 0.3, 0.5, 0.7], threads=1)
    assert res.refined
    assert res.best.scenario.strategy.delta == pytest.approx(0.4, abs=2e-3)
    assert res.best.hmin_certified == pytest.approx(2.0, abs=1e-5)
    assert [r.scenario.strategy.delta for r in res.grid] == [0.1, 0.3, 0.5, 0.7]
    with pytest.raises(ValueError):
        sweep_tilted("SE", "bsm_1x4", "ABC", [])
