"""Smoke tests for the mbfsim python module (built by the CMake tree)."""

import json
import math

import pytest

import mbfsim


def test_spec_roundtrip_and_transitions():
    spec = mbfsim.make_spec("ctmc-internal", n=200, p=0.4, q=0.6)
    assert spec.variant == "ctmc-internal"
    assert spec.seed_rate == 0.6  # defaults to q
    down, up, stay = mbfsim.transitions(spec, 100)
    assert down == pytest.approx(40.0)
    assert up == pytest.approx(30.0)
    assert stay == 0.0
    back = mbfsim.ChainSpec.from_json(spec.to_json())
    assert back.to_json() == spec.to_json()


def test_invalid_spec_raises():
    with pytest.raises(ValueError):
        mbfsim.make_spec("dtmc", n=10, p=0.6, q=0.6)  # p + q + r != 1


def test_threshold_fraction():
    assert mbfsim.threshold_from_fraction(1.0 / 3.0, 200) == 66


def test_hitting_times_exact_value():
    spec = mbfsim.make_spec("dtmc", n=200, p=0.5, q=0.5)
    f = mbfsim.hitting_times(spec, 66)
    assert f[0] == pytest.approx(4422.0)
    assert f[66] == 0.0


def test_stationary_peak():
    spec = mbfsim.make_spec("ctmc-internal", n=200, p=0.4, q=0.6)
    pi = mbfsim.stationary(spec)
    assert abs(pi.index(max(pi)) - 66) <= 1
    assert sum(pi) == pytest.approx(1.0)


def test_regime_names():
    assert mbfsim.internal_regime(0.3, 0.6) == "log-time"
    assert mbfsim.internal_regime(0.8, 0.6) == "exponential-time"
    assert mbfsim.internal_regime(0.4, 0.6) == "indeterminate"


def test_closed_forms():
    assert mbfsim.gamblers_ruin(0.6, 0.4, 5) == pytest.approx(0.5 / (1.5**5 - 1))
    assert mbfsim.lazy_scaling(4422.0, 0.5) == pytest.approx(8844.0)
    assert mbfsim.escape_time_lower_bound(0.6, 0.4, 15) == pytest.approx(3.796875)
    assert mbfsim.drift_time_lower_bound(0.4, 200) == pytest.approx(3000.0)
    closed = mbfsim.coordinated_f1(0.5, 1.0, 30)
    literal = mbfsim.coordinated_f1_literal(0.5, 1.0, 30)
    geo = sum(0.5**i for i in range(1, 10))
    assert closed == pytest.approx(literal + 1.0 + geo)


def test_batch_runs_deterministic():
    spec = mbfsim.make_spec("dtmc", n=60, p=0.5, q=0.5)
    a = mbfsim.run_batch(spec, start=0, limit=20000, runs=10, seed=7, f=20)
    b = mbfsim.run_batch(spec, start=0, limit=20000, runs=10, seed=7, f=20, jobs=3)
    assert a.to_json() == b.to_json()
    assert a.runs == 10
    assert a.n_flipped == 10  # balanced rates always flip
    assert sum(a.occupancy) == pytest.approx(1.0)


def test_trace_structure():
    spec = mbfsim.make_spec("dtmc", n=20, p=0.0, q=1.0)
    tr = mbfsim.simulate_trace(spec, start=0, limit=5, seed=1)
    assert tr["events"] == [(1.0, 1), (2.0, 2), (3.0, 3), (4.0, 4), (5.0, 5)]
    assert tr["end_time"] == 5.0


def test_scenario_loop():
    scenario = {
        "spec": {"n": 30, "variant": "dtmc", "p": 0.5, "q": 0.5, "r": 0.0},
        "policy": {"f": 10},
        "method": "quantile-hitting",
        "epsilon": 0.01,
        "replan": "once-per-interval",
        "horizon": 20000,
        "seed": 3,
    }
    report = json.loads(mbfsim.run_scenario(json.dumps(scenario)))
    assert report["n_reconfigurations"] > 0
    assert report["unsafe_fraction"] < 0.05
    assert not report["thrashing"]
