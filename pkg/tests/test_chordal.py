import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from skle.chordal import (AnalyticHull, DrivingFunction, Swallowed, batch_tips, batch_tips_until,
                          brownian_drivers, complex_poisson_H, expansion_tail_check, flow, graded_steps,
                          hcap_translation_check, loewner_forward, slit_map, slit_map_inverse,
                          swallow_time, tips, trace, zipper)
from skle.geometry import NEVER, GeometryError

upper = st.builds(complex, st.floats(-5, 5), st.floats(0.05, 5))


def test_poisson_kernel_values():
    assert complex_poisson_H(1j, 0) == pytest.approx(1j / math.pi)
    assert complex_poisson_H(1 + 1j, 1) == pytest.approx(1j / math.pi)
    assert complex_poisson_H(2 + 1j, 0).imag == pytest.approx(0.2 / math.pi)
    with pytest.raises(GeometryError):
        complex_poisson_H(1.0, 0)


def test_forward_closed_form():
    d = DrivingFunction.constant(0.0, 1.0, 1e-3)
    assert loewner_forward(d, 3j) == pytest.approx(1j * math.sqrt(5), rel=1e-12)
    assert loewner_forward(d, 1 + 1j, T=0.0) == 1 + 1j


@given(st.floats(-3, 3), st.builds(complex, st.floats(0.5, 5), st.floats(0.05, 5)), st.booleans())
def test_constant_driver_translation(c, z, left):
    z = -z.conjugate() if left else z          # stay off the swallowed segment
    d = DrivingFunction.constant(c, 0.3, 0.01)
    g = loewner_forward(d, z + c)
    w = np.sqrt(z * z + 4 * 0.3)
    w = w if w.imag > 0 else -w
    assert g == pytest.approx(c + w, rel=1e-10, abs=1e-12)


def test_swallow_times():
    d = DrivingFunction.constant(0.0, 2.0, 1e-3)
    assert swallow_time(d, 1j) == pytest.approx(0.25, abs=1e-6)
    assert swallow_time(d, 2j) == pytest.approx(1.0, abs=1e-6)
    assert swallow_time(d, 10 + 1j) == NEVER
    r = loewner_forward(d, 1j)
    assert isinstance(r, Swallowed) and r.bracket[0] <= r.t <= r.bracket[1]


def test_swallow_monotone_in_horizon():
    d = DrivingFunction.brownian(6.0, 1.0, 1e-3, rng=3)
    z = np.array([0.3 + 0.4j, -0.5 + 0.2j, 1 + 1j, 0.1 + 0.9j])
    short = flow(d, z, T=0.5)[1]
    long = flow(d, z)[1]
    fin = np.isfinite(short)
    assert np.all(long[fin] == short[fin])
    assert np.all(np.isfinite(long) | ~fin)


def test_trace_vertical_segment():
    tr = trace(DrivingFunction.constant(0.0, 1.0, 1e-3))
    assert tr.tip[-1] == pytest.approx(2j, abs=1e-9)
    assert tr.tip[0] == 0
    k0 = trace(DrivingFunction.brownian(0.0, 1.0, 1e-3, rng=1))
    assert np.allclose(k0.tip, tr.tip)


def test_trace_reflection():
    d = DrivingFunction.brownian(4.0, 0.5, 1e-3, rng=7)
    a, b = trace(d), trace(d.reflected())
    assert np.allclose(b.tip, -np.conj(a.tip), atol=1e-12)


@given(upper, st.floats(-2, 2), st.floats(1e-6, 0.1))
def test_slit_map_roundtrip(z, u, dt):
    assume(abs(z.real - u) > 1e-6 or z.imag ** 2 > 4 * dt + 1e-6)   # points on the new slit are swallowed
    assert slit_map_inverse(slit_map(z, u, dt), u, dt) == pytest.approx(z, abs=1e-9)
    assert slit_map(z, u, dt).imag > 0


def test_batch_tips_match_single():
    xi, _ = brownian_drivers(6.0, 3, 0.1, 1e-3, seed=2)
    u = 0.5 * (xi[:, 1:] + xi[:, :-1])
    bt = batch_tips(u, 1e-3)
    for p in range(3):
        assert np.allclose(bt[p], tips(u[p], np.full(u.shape[1], 1e-3)))
    tt, stop = batch_tips_until(u, 1e-3, lambda z, n, p: np.abs(z) > 0.3)
    for p in range(3):
        k = stop[p]
        assert k == u.shape[1] + 1 or abs(bt[p, k - 1]) > 0.3
        assert np.all(np.abs(bt[p, :min(k, u.shape[1] + 1) - 1]) <= 0.3)


def test_brownian_streams_independent_of_ensemble_size():
    a, _ = brownian_drivers(6.0, 5, 0.05, 1e-3, seed=4)
    b, _ = brownian_drivers(6.0, 2, 0.05, 1e-3, seed=4)
    assert np.array_equal(a[:2], b)


@given(st.floats(0.01, 1.0), st.floats(1e-4, 1e-2), st.floats(1e-3, 0.1))
def test_graded_steps(T, dt_max, ratio):
    h = graded_steps(T, dt_max, ratio, 1e-6)
    assert h.sum() == pytest.approx(T, abs=1e-12)
    assert h.max() <= dt_max + 1e-15
    t = np.concatenate([[0.0], np.cumsum(h)[:-1]])
    assert np.all(h[:-1] >= np.minimum(np.maximum(ratio * t[:-1], 1e-6), dt_max) * (1 - 1e-12))


def test_graded_grid_tips_and_capacity():
    h = graded_steps(0.1, 2e-3, 0.05, 1e-5)
    xi, dB = brownian_drivers(6.0, 2, 0.0, h, seed=6)
    assert xi.shape == (2, h.size + 1)
    u = 0.5 * (xi[:, 1:] + xi[:, :-1])
    tt, stop = batch_tips_until(u, h, lambda z, n, p: np.zeros(z.shape, bool))
    for p in range(2):
        assert np.allclose(tt[p], tips(u[p], h))
    U, da = zipper(tt, xi[:, 0])
    assert np.allclose(da, 2 * h, atol=1e-9)


def test_zipper_recovers_driver():
    xi, _ = brownian_drivers(3.0, 2, 0.2, 1e-3, seed=5)
    u = 0.5 * (xi[:, 1:] + xi[:, :-1])
    U, da = zipper(batch_tips(u, 1e-3), xi[:, 0])
    assert np.allclose(U, u, atol=1e-8)
    assert np.allclose(da, 2e-3, atol=1e-8)


def test_analytic_hulls():
    seg, disk = AnalyticHull.segment(0, 1), AnalyticHull.half_disk(0, 1)
    assert seg.hcap == 0.5 and disk.hcap == 1.0
    z = np.array([0.3 + 2j, -4 + 0.1j])
    for A in (seg, disk, AnalyticHull.half_disk(1, 0.5)):
        assert np.allclose(A.inverse(A.map(z)), z)
    assert expansion_tail_check(seg, 10j) < 10
    assert expansion_tail_check(seg, 100j) < 10
    assert expansion_tail_check(disk, 5 + 5j) < 1e-12


def test_hcap_translation():
    ok, e0, e1 = hcap_translation_check(AnalyticHull.segment(0, 1), 5.0, n=20_000, rng=1)
    assert ok and e0.agrees(0.5, 4) and e1.agrees(0.5, 4)
    ok, e0, _ = hcap_translation_check(AnalyticHull.half_disk(0, 1), -3.0, n=20_000, rng=2)
    assert ok and e0.agrees(1.0, 4)
    assert hcap_translation_check(AnalyticHull.segment(0, 1), 0.0, n=2_000, rng=3)[0]


def test_driver_validation():
    with pytest.raises(GeometryError):
        DrivingFunction([0.0, 0.0], [0, 1])
    with pytest.raises(GeometryError):
        DrivingFunction([0.1, 0.2], [0, 1])
    with pytest.raises(GeometryError):
        flow(DrivingFunction.constant(0, 1, 0.1), [1j], T=2.0)
