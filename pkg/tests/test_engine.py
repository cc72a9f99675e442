import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skle.abm_mc import ObstacleSet, hcap_mc
from skle.chordal import DrivingFunction, flow
from skle.engine import (CAPACITY, DEGENERATE, HORIZON, SQRT6, SkleConfig, build_phi, capacity_clock,
                         chordal_from_U, girsanov_weight, kle_integrate, parse_alpha, parse_b, pathwise_check,
                         record_tips, reparametrize, simulate, solve_sde, u_decomposition_check)
from skle.geometry import GeometryError, SlitVector, scale_slits, shift_slits

S1 = SlitVector([1.0], [-0.5], [0.5])
EMPTY = SlitVector.empty()


def _one(cfg, seed=0):
    return simulate(cfg, 1, seed=seed).run(0)


# ------------------------------------------------------------------ coefficients and configs

def test_parse_coefficients():
    assert parse_alpha("const:2.5")(S1) == 2.5 and parse_alpha(3)(S1) == 3
    assert parse_b("zero")(S1) == 0.0
    assert parse_b("const:0.5")(EMPTY) == 0.5
    with pytest.raises(ValueError):
        parse_b("sideways")


def test_probes_must_be_in_H():
    with pytest.raises(GeometryError):
        simulate(SkleConfig(EMPTY, probes=(0.5 - 0.1j,), t_max=0.01), 1)


def test_noise_shape_checked():
    with pytest.raises(ValueError):
        simulate(SkleConfig(EMPTY, dt=0.01, t_max=0.1), dB=np.zeros((1, 3)))


# ------------------------------------------------------------------ driver SDE

@given(st.floats(0.1, 3), st.floats(-1, 1), st.floats(-1, 1), st.integers(0, 2 ** 16))
@settings(max_examples=20)
def test_slit_free_driver_exact(a0, b0, xi0, seed):
    dt, T = 1e-2, 0.3
    rec = solve_sde(EMPTY, xi0, a0, f"const:{b0}", dt, T, rng=seed)
    direct = xi0 + a0 * np.concatenate([[0], np.cumsum(rec.dB)]) + b0 * rec.time_grid
    assert np.allclose(rec.xi, direct, atol=1e-12)
    assert rec.stopped_reason == HORIZON


def test_frozen_driver_and_falling_slit():
    rec = solve_sde(S1, 0.0, 0.0, "zero", 1e-3, 0.1, rng=1)
    assert np.all(rec.xi == 0)
    y = rec.s[:, 0]
    assert np.all(np.diff(y) < 0)
    assert rec.slits(rec.stop_index).y[0] < 1


def test_brownian_scaling():
    c, dt, T = 2.0, 1e-3, 0.05
    s = SlitVector([0.8], [-0.3], [0.6])
    base = SkleConfig(s, 0.1, SQRT6, "neg-bmd", dt, T)
    big = SkleConfig(scale_slits(s, c), 0.1 * c, SQRT6, "neg-bmd", c * c * dt, c * c * T)
    dB = np.random.default_rng(3).standard_normal((1, base.steps)) * math.sqrt(dt)
    e1, e2 = simulate(base, dB=dB), simulate(big, dB=c * dB)
    assert np.max(np.abs(e2.xi - c * e1.xi)) <= c * dt
    assert np.max(np.abs(e2.Y - c * e1.Y)) <= c * dt


def test_degenerate_stop():
    # a slit sitting almost on the floor collapses quickly
    s = SlitVector([0.02], [-0.05], [0.05])
    ens = simulate(SkleConfig(s, 0.0, SQRT6, "zero", 1e-3, 0.2, y_min_frac=0.5), 2, seed=4)
    assert set(ens.reason) == {DEGENERATE}
    assert np.all(ens.stop < ens.K)
    assert np.all(ens.Y[:, -1, 0] >= 0.01 - 1e-12)


# ------------------------------------------------------------------ KL flow

def test_slit_free_flow_is_chordal():
    cfg = SkleConfig(EMPTY, 0.0, 2.0, "zero", 1e-3, 0.2)
    run = _one(cfg, 5)
    z = np.array([0.3 + 0.4j, -1 + 1j, 2j, 0.05 + 0.05j])
    probe, g = kle_integrate(run.record, z)
    gc, swc = flow(DrivingFunction(run.record.time_grid, run.record.xi), z)
    live = ~np.isfinite(swc)
    assert np.max(np.abs(g[live] - gc[live])) <= 1e-6
    assert np.array_equal(np.isfinite(probe.swallow_times), ~live)
    assert np.allclose(probe.swallow_times[~live], swc[~live], atol=1e-12)


def test_far_slits_look_chordal():
    dB = np.random.default_rng(6).standard_normal((1, 200)) * math.sqrt(1e-3)
    z = (0.1 + 0.1j, -0.2 + 0.15j, 0.3 + 0.2j, 0.5j)
    far = simulate(SkleConfig(shift_slits(S1, -40), 0.0, SQRT6, "neg-bmd", 1e-3, 0.2, probes=z), dB=dB)
    near = simulate(SkleConfig(EMPTY, 0.0, SQRT6, "zero", 1e-3, 0.2, probes=z), dB=dB)
    a, b = far.run(0).hull_probe, near.run(0).hull_probe
    assert a.max_discrepancy(b) <= 1e-3


def test_record_tips_match_ensemble():
    run = _one(SkleConfig(S1, 0.0, SQRT6, "neg-bmd", 2e-3, 0.05), 7)
    assert np.allclose(record_tips(run.record), run.ens.tips[0], atol=1e-9)


def test_kle_integrate_rejects_real_points():
    run = _one(SkleConfig(EMPTY, dt=0.01, t_max=0.05))
    with pytest.raises(GeometryError):
        kle_integrate(run.record, [0.5])


# ------------------------------------------------------------------ Phi and the capacity clock

def test_slit_free_phi_is_identity():
    run = _one(SkleConfig(EMPTY, 0.0, SQRT6, "zero", 1e-3, 0.05), 8)
    p1, p2, _ = build_phi(run, [1, 10, 50])
    assert np.allclose(p1, 1, atol=1e-10) and np.allclose(p2, 0, atol=1e-8)
    assert np.allclose(capacity_clock(run), 2 * np.arange(run.ens.K + 1) * run.dt, atol=1e-12)
    rep = reparametrize(run)
    assert np.allclose(rep.check_times, np.arange(run.ens.K + 1) * run.dt)
    assert np.allclose(rep.U_steps, 0.5 * (run.ens.xi[0, 1:] + run.ens.xi[0, :-1]), atol=1e-10)
    with pytest.raises(ValueError):
        build_phi(run, [0])


def test_single_slit_clock():
    cfg = SkleConfig(S1, 0.0, SQRT6, "neg-bmd", 1e-3, 0.1, phi2_every=10)
    ens = simulate(cfg, 4, seed=9)
    for p in range(4):
        run = ens.run(p)
        a = run.a_path[: run.stop + 1]
        assert a[0] == 0 and np.all(np.diff(a) > 0)
        assert np.allclose(capacity_clock(run)[: run.stop + 1], a, rtol=1e-12, atol=1e-15)
        phi = run.phi_prime[: run.stop]
        assert np.all(np.isfinite(phi)) and np.all(phi > 0)
    p1, _, _ = build_phi(ens.run(0), [20, 60, 100])
    assert np.all(np.isfinite(p1)) and np.all(p1 > 0)
    # Cauchy-integral Phi' agrees with the capacity-rate Phi'
    assert np.allclose(p1[0], ens.phi1[0, [19, 59, 99]], rtol=0.05)


@pytest.mark.slow
def test_capacity_matches_abm_hcap():
    # the zipper capacity carries an O(dt) bias of about 3e-3 at dt = 1e-3
    cfg = SkleConfig(S1, 0.0, SQRT6, "neg-bmd", 2.5e-4, 0.1)
    run = _one(cfg, 10)
    tips = run.tips[: run.stop + 1]
    est = hcap_mc(ObstacleSet.polyline(tips), n=60_000, rng=11)
    a = run.a_path[run.stop]
    assert est.agrees(a, 3)


def test_capacity_target_stop():
    ens = simulate(SkleConfig(S1, 0.0, SQRT6, "neg-bmd", 1e-3, 0.1, capacity_target=0.05), 3, seed=12)
    for p in range(3):
        k = ens.target_index[p]
        if ens.reason[p] == CAPACITY:
            assert ens.a[p, k] >= 0.05 > ens.a[p, k - 1]


# ------------------------------------------------------------------ pathwise checks

def test_pathwise_single_slit():
    probes = tuple(complex(x, y) for x in (-0.3, 0.0, 0.3) for y in (0.1, 0.25))
    cfg = SkleConfig(S1, 0.0, SQRT6, "neg-bmd", 1e-3, 0.1, probes=probes)
    ens = simulate(cfg, 3, seed=13)
    for p in range(3):
        assert pathwise_check(ens.run(p)) <= 2 * cfg.dt


def test_chordal_from_U_slit_free():
    cfg = SkleConfig(EMPTY, 0.0, SQRT6, "zero", 1e-3, 0.1, probes=(0.1 + 0.1j, 0.4j))
    run = _one(cfg, 14)
    _, sw = chordal_from_U(reparametrize(run))
    assert run.hull_probe.max_discrepancy(type(run.hull_probe)(run.hull_probe.query_points, sw)) <= 1e-9


def test_decomposition_slit_free():
    dt = 1e-3
    r1 = _one(SkleConfig(EMPTY, 0.0, SQRT6, "zero", dt, 0.1), 15)
    assert u_decomposition_check(r1) <= 3 * math.sqrt(dt)
    r2 = _one(SkleConfig(EMPTY, 0.0, 1.3, "const:0.7", dt, 0.1), 16)
    assert u_decomposition_check(r2) <= 10 * dt


# ------------------------------------------------------------------ Girsanov

def test_girsanov_slit_free():
    r0 = _one(SkleConfig(EMPTY, 0.0, SQRT6, "zero", 1e-3, 0.1), 17)
    assert np.allclose(girsanov_weight(r0), 1.0)
    a0, b0 = 2.0, 0.8
    r = _one(SkleConfig(EMPTY, 0.0, a0, f"const:{b0}", 1e-3, 0.1), 18)
    B = np.concatenate([[0], np.cumsum(r.ens.dB[0])])
    t = np.arange(B.size) * r.dt
    assert np.allclose(girsanov_weight(r, a0), np.exp(-(b0 / a0) * B - 0.5 * (b0 / a0) ** 2 * t), rtol=1e-10)
    with pytest.raises(ValueError):
        girsanov_weight(r, 1.0)


@pytest.mark.slow
def test_girsanov_martingale():
    ens = simulate(SkleConfig(S1, 0.0, SQRT6, "neg-bmd", 2e-3, 0.05, phi2_every=5), 2000, seed=19)
    n = ens.K
    W = np.array([girsanov_weight(ens.run(p))[min(n, ens.stop[p])] for p in range(ens.n_paths)])
    assert abs(W.mean() - 1) <= 3 * W.std(ddof=1) / math.sqrt(W.size)
