import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from skle.chordal import brownian_drivers
from skle.harness import (PRESETS, ExperimentConfig, default_config, effective_size, ks_two_sample,
                          real_crossing_steps, run_preset, weighted_ks)

# ------------------------------------------------------------------ KS statistics


def test_identical_samples():
    x = np.random.default_rng(0).standard_normal(500)
    r = ks_two_sample(x, x)
    assert r.statistic == 0 and r.p_value == 1


def test_separation_oracle():
    x = np.random.default_rng(1).standard_normal(2000)
    assert ks_two_sample(x, x + 10).p_value < 1e-10


def test_calibration_oracle():
    rng = np.random.default_rng(2)
    p = np.array([ks_two_sample(rng.standard_normal(2000), rng.standard_normal(2000)).p_value
                  for _ in range(200)])
    assert abs(np.mean(p < 0.05) - 0.05) <= 0.04


@given(st.integers(5, 300), st.integers(5, 300), st.integers(0, 2 ** 16))
def test_ks_ranges(n1, n2, seed):
    rng = np.random.default_rng(seed)
    r = ks_two_sample(rng.standard_normal(n1), rng.exponential(size=n2))
    assert 0 <= r.statistic <= 1 and 0 <= r.p_value <= 1
    assert (r.n1, r.n2) == (n1, n2)


def test_unit_weights_reduce_to_plain_ks():
    rng = np.random.default_rng(3)
    x, y = rng.standard_normal(800), rng.standard_normal(600) + 0.1
    a, b = weighted_ks(x, np.ones(800), y), ks_two_sample(x, y)
    assert a.statistic == pytest.approx(b.statistic, abs=1e-15)
    # scipy adds a small-sample correction to the Kolmogorov tail
    assert a.p_value == pytest.approx(b.p_value, rel=0.1)
    assert effective_size(np.ones(800)) == pytest.approx(800)


def test_weights_correct_a_tilted_sample():
    # x ~ N(0.5, 1) reweighted by the likelihood ratio to N(0, 1)
    rng = np.random.default_rng(4)
    x = rng.standard_normal(4000) + 0.5
    w = np.exp(-0.5 * x + 0.125)
    y = rng.standard_normal(4000)
    assert weighted_ks(x, w, y).p_value > 0.01
    assert ks_two_sample(x, y).p_value < 1e-10


def test_ks_input_validation():
    with pytest.raises(ValueError):
        ks_two_sample([], [1.0])
    with pytest.raises(ValueError):
        weighted_ks([1.0], [-1.0], [1.0])


# ------------------------------------------------------------------ configs

@pytest.mark.parametrize("preset", PRESETS)
def test_config_roundtrip(preset, tmp_path):
    cfg = default_config(preset, seed=7)
    assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_json(p) == cfg


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig("nonsense")
    with pytest.raises(ValueError):
        ExperimentConfig("thm42", n_paths=99)


# ------------------------------------------------------------------ helpers

def test_real_crossing_constant_driver():
    # g_t(x) = sqrt(x^2 + 4t) never meets a driver frozen at 0
    u = np.zeros((2, 100))
    assert np.all(real_crossing_steps(u, 1e-3, 0.5, np.zeros(2)) == 101)
    # a driver outrunning the 2 sqrt(dt) push of each step catches the point
    t = (np.arange(100) + 0.5) * 0.02
    steps = real_crossing_steps(50 * t[None, :], 0.02, 0.5, np.zeros(1))
    assert 1 <= steps[0] <= 100


def test_sle6_real_point_swallow_law():
    # P(SLE_6 from -0.25 swallows 0 by t) for Bessel dimension 2/3 at 1/sqrt(6)-scaled start
    from scipy import stats
    kappa, x, T, dt, n = 6.0, 0.25, 0.25, 1e-4, 2000
    xi, _ = brownian_drivers(kappa, n, T, dt, seed=5, start=-x)
    u = 0.5 * (xi[:, 1:] + xi[:, :-1])
    hit = real_crossing_steps(u, dt, 0.0, xi[:, 0]) <= u.shape[1]
    exact = stats.gamma(1 / 6).sf(x * x / kappa / 2 / T)
    # crossings between nodes are missed, so the discrete rate sits below the exact one
    assert hit.mean() <= exact + 3 * math.sqrt(exact * (1 - exact) / n)
    assert hit.mean() >= exact - 0.15


# ------------------------------------------------------------------ presets at small scale

def test_thm42_no_slits_agrees():
    cfg = default_config("thm42", n_paths=200, dt=2e-3, geometry={"y": [], "x": [], "xr": []},
                         params={"xi0": 2.0, "probe": [2.5, 0.3], "eps": 0.05, "t_max": 0.3, "control": False})
    res = run_preset(cfg)
    assert all(r.p_value > 0.01 for r in res.ks)


def test_thm42_far_slit_agrees():
    cfg = default_config("thm42", n_paths=200, dt=2e-3, geometry={"y": [1.0], "x": [39.5], "xr": [40.5]},
                         params={"xi0": 0.0, "probe": [0.5, 0.3], "eps": 0.05, "t_max": 0.3, "control": False})
    res = run_preset(cfg)
    assert all(r.p_value > 0.01 for r in res.ks)
    assert res.info["discard_A"]["fraction"] == 0


def test_locality_tiny_disk_agrees():
    cfg = default_config("locality-sle6", n_paths=200, dt=1e-3,
                         params={"center": 1.0, "radius": 1e-3, "kappa": 6.0, "control_kappa": 0})
    res = run_preset(cfg)
    assert all(r.p_value > 0.01 for r in res.ks)


def test_girsanov_slit_free():
    base = dict(n_paths=300, dt=2e-3, geometry={})
    res = run_preset(default_config("girsanov-thm43", **base,
                                    params={"xi0": 0.0, "alpha": 2.0, "b": "zero", "t_max": 0.3}))
    assert np.all(res.samples["A_weight"] == 1)
    res = run_preset(default_config("girsanov-thm43", **base,
                                    params={"xi0": 0.0, "alpha": 2.0, "b": "const:0.8", "t_max": 0.3}))
    assert res.ks[0].p_value > 0.01
    assert abs(res.info["mean_weight"] - 1) <= 3 * res.info["mean_weight_se"]


def test_radial_compare_and_determinism():
    cfg = default_config("radial-compare", n_paths=200, dt=2e-3)
    a, b = run_preset(cfg), run_preset(cfg)
    assert a.summary() == b.summary()
    assert all(r.p_value > 0.01 for r in a.ks)
    assert set(a.traces) == {"A", "B"}
