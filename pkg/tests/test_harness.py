import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfac import harness
from mfac.errors import ConfigInvalid, ConfigParse, IoFailure
from mfac.harness import (ExperimentConfig, apply_overrides, canonical_config, export_trace, run, summary_path,
                          sweep, sweep_rows, table1)


def short(name, **changes):
    return canonical_config(name).replace(**changes)


def test_ramp_offset_vanishes_without_weight():
    trace = run(canonical_config("ex1_1"))
    assert np.max(np.abs(trace.e[trace.rows_between(40, 700)])) <= 1e-6


@pytest.mark.parametrize("name, first", [("ex1_1", 3), ("ex2", 6), ("ex4", 5)])
def test_deadbeat_with_true_compensation(name, first):
    # ex4's third initial output is not plant-generated, so its first prediction misses
    trace = run(canonical_config(name))
    assert np.max(np.abs(trace.e[trace.k >= first])) <= 1e-9


def test_deadbeat_on_nonlinear_siso_plant():
    trace = run(short("ex1", compensation="true"))
    assert np.max(np.abs(trace.e[trace.k > trace.config.k0])) <= 1e-9


def test_uncompensated_error_is_negative_disturbance_step():
    trace = run(short("ex2", compensation="none"))
    k0 = trace.config.k0
    dw = np.diff(trace.w[:, 0])
    # rows are k = 1..N; e at row index i is e(i+1)
    np.testing.assert_allclose(trace.e[k0:, 0], -dw[k0 - 1:], atol=1e-10)


def test_divergence_halts_run():
    trace = run(short("ex4", lam=0.1))
    assert trace.summary["diverged"]
    assert trace.k[-1] < 400
    assert np.isnan(trace.u[-1]).all()


def test_summary_fields_consistent():
    trace = run(short("ex1", horizon=200))
    s = trace.summary
    np.testing.assert_array_equal(trace.e, trace.y_star - trace.y)
    assert s["max_abs_output"] == np.max(np.abs(trace.y))
    assert s["diverged"] == (s["max_abs_output"] > 1e3)
    assert s["steady_state_error"] == trace.e[-1, 0]
    window = trace.e[trace.rows_between(100, 200), 0]
    assert s["rms_error"] == pytest.approx(np.sqrt(np.mean(window ** 2)))


def test_input_reconstruction():
    trace = run(short("ex3", lam=0.5, horizon=120))
    k0 = trace.config.k0
    rebuilt = trace.u[k0 - 2] + np.cumsum(trace.du, axis=0)
    np.testing.assert_array_equal(rebuilt, trace.u[k0 - 1:])


def test_unit_gain_estimate_lags_disturbance():
    trace = run(canonical_config("ex1"))
    k0 = trace.config.k0
    np.testing.assert_allclose(trace.w_hat[k0:], trace.w[k0 - 1:-1], atol=1e-12)


def test_estimation_lag_costs_less_than_no_compensation():
    estimated = run(canonical_config("ex1")).summary["rms_error"]
    uncompensated = run(short("ex1", compensation="none")).summary["rms_error"]
    assert 0 < estimated < uncompensated


def test_initial_window_is_at_rest():
    trace = run(canonical_config("ex4"))
    np.testing.assert_array_equal(trace.y[:3], [[0, 0], [1, 1], [0, 0]])
    np.testing.assert_array_equal(trace.w[:3], np.zeros((3, 2)))
    np.testing.assert_array_equal(trace.u[:2], np.zeros((2, 2)))


def test_run_is_deterministic(tmp_path):
    a = export_trace(run(canonical_config("ex3").replace(lam=0.5, horizon=150)), tmp_path / "a.csv")
    b = export_trace(run(canonical_config("ex3").replace(lam=0.5, horizon=150)), tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_export_row_count_and_reexport(tmp_path):
    trace = run(short("ex2", horizon=10))
    path = export_trace(trace, tmp_path / "t.csv")
    first = path.read_bytes()
    lines = first.decode().splitlines()
    assert len(lines) == 11
    assert lines[0] == "k,y_star_1,y_1,u_1,w_1,w_hat_1,e_1"
    assert export_trace(trace, path).read_bytes() == first
    summary = json.loads(summary_path(path).read_text())
    assert summary["rows"] == 10 and summary["config"]["plant_id"] == "ex2"


def test_export_mimo_columns(tmp_path):
    path = export_trace(run(short("ex4", horizon=12)), tmp_path / "m.csv")
    header = path.read_text().splitlines()[0].split(",")
    assert len(header) == 1 + 6 * 2
    assert header[:3] == ["k", "y_star_1", "y_star_2"]


def test_export_twelve_significant_digits(tmp_path):
    path = export_trace(run(short("ex1", horizon=20)), tmp_path / "d.csv")
    values = [v for line in path.read_text().splitlines()[1:] for v in line.split(",")[1:]]
    assert all(len(v.lstrip("-").replace(".", "").split("e")[0].lstrip("0")) <= 12 for v in values)


def test_export_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(IoFailure):
        export_trace(run(short("ex2", horizon=10)), blocker / "t.csv")


def test_sweep_preserves_order_and_matches_serial():
    lambdas = [3.0, 0.0, 1.5]
    base = short("ex1", horizon=150)
    concurrent = sweep(base, lambdas, workers=3)
    serial = sweep(base, lambdas, workers=1)
    assert [t.config.lam for t in concurrent] == lambdas
    for a, b in zip(concurrent, serial):
        assert a.y.tobytes() == b.y.tobytes() and a.u.tobytes() == b.u.tobytes()
    assert [r["lambda"] for r in sweep_rows(concurrent)] == lambdas


def test_sweep_needs_lambdas():
    with pytest.raises(ConfigInvalid):
        sweep(canonical_config("ex1"), [])


def test_ex4_divergence_flags():
    flags = [t.summary["diverged"] for t in sweep(canonical_config("ex4"), [0.0, 0.02, 0.1])]
    assert flags == [False, False, True]


def test_ex3_rejection_degrades_with_weight():
    # ordering checked before k = 85, where the zero-weight input dynamics blow up (see decisions ledger)
    traces = sweep(canonical_config("ex3").replace(rms_window=[4, 80]), [0.0, 0.5, 1.5])
    rms = [t.summary["rms_error"] for t in traces]
    assert rms[0] < rms[1] < rms[2]


def test_table1_rows(tmp_path):
    rows = table1(tmp_path / "table1.csv")
    assert [r.lam for r in rows] == [0.0, 0.1, -0.1, 0.2]
    for r in rows:
        assert f"{r.measured + 0.0:.6f}" == f"{r.lam + 0.0:.6f}"
        assert r.constant
    assert len((tmp_path / "table1.csv").read_text().splitlines()) == 5


def test_exclusion_window_after_switch():
    base = short("ex1", lam=3.0, horizon=300, rms_window=[1, 300])
    plain = run(base).summary["rms_error"]
    trimmed = run(base.replace(exclude_after_switch=5)).summary["rms_error"]
    assert trimmed < plain


# --- configs ----------------------------------------------------------------

@pytest.mark.parametrize("name", ["ex1", "ex1_1", "ex2", "ex3", "ex4"])
def test_canonical_configs_round_trip(name):
    config = canonical_config(name)
    assert ExperimentConfig.from_dict(json.loads(json.dumps(config.to_dict()))) == config


def test_canonical_setups():
    assert canonical_config("ex2").k0 == 5
    assert canonical_config("ex3").k0 == 3
    assert (canonical_config("ex1").l_y, canonical_config("ex1").l_u) == (1, 2)
    assert canonical_config("ex1").compensation == "estimated"


@pytest.mark.parametrize("change, key", [
    ({"horizon": 9}, "horizon"),
    ({"l_u": 1}, "l_y/l_u"),
    ({"trajectory_id": "nope"}, "trajectory_id"),
    ({"plant_id": "ex7"}, "plant_id"),
    ({"lambda": -0.5}, "lambda"),
    ({"observer_gain": 3.0}, "observer_gain"),
    ({"compensation": "magic"}, "compensation"),
    ({"unknown": 1}, "unknown"),
    ({"horizon": "400"}, "horizon"),
    ({"initial_u": [0]}, "initial_u"),
])
def test_invalid_configs_name_the_key(change, key):
    data = dict(canonical_config("ex1").to_dict(), **change)
    with pytest.raises(ConfigInvalid, match=key):
        ExperimentConfig.from_dict(data)


def test_missing_required_key():
    with pytest.raises(ConfigInvalid, match="plant_id"):
        ExperimentConfig.from_dict({"trajectory_id": "traj_eq20", "disturbance_id": "dist_eq19"})


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"plant_id": "ex2", "lambda": 0.,}')
    with pytest.raises(ConfigParse, match="lambda"):
        harness.load_config(path)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 10), st.integers(10, 900), st.sampled_from(["true", "none", "estimated"]))
def test_override_equals_file_edit(tmp_path_factory, lam, horizon, mode):
    base = canonical_config("ex1").to_dict()
    via_set = apply_overrides(base, [f"lambda={lam!r}", f"horizon={horizon}", f"compensation={mode}"])
    edited = dict(base, **{"lambda": lam, "horizon": horizon, "compensation": mode})
    path = tmp_path_factory.mktemp("cfg") / "c.json"
    path.write_text(json.dumps(edited))
    assert ExperimentConfig.from_dict(via_set) == harness.load_config(path)


def test_override_type_checked():
    with pytest.raises(ConfigInvalid, match="horizon"):
        apply_overrides(canonical_config("ex1").to_dict(), ["horizon=1.5"])
    with pytest.raises(ConfigInvalid, match="bogus"):
        apply_overrides(canonical_config("ex1").to_dict(), ["bogus=1"])
    with pytest.raises(ConfigInvalid):
        apply_overrides(canonical_config("ex1").to_dict(), ["novalue"])
