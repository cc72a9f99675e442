import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from skle.abm_mc import (ESCAPED, FLOOR, HULL, SLIT, EstimateCI, ObstacleSet, Rect, default_contour,
                         harmonic_measure_eta, hcap_mc, im_g0, sample_hit, slit_hit_probs, walk)
from skle.geometry import GeometryError, SlitVector
from skle.rng import RngStream

SEG = ObstacleSet(segments=[(0j, 1j)])
DISK = ObstacleSet(disks=[(0j, 1.0)])
C = SlitVector([1.0], [-1.0], [1.0])


def test_empty_domain_hits_floor():
    r = walk(np.full(20_000, 1j), ObstacleSet(), rng=1)
    assert np.mean(r.kind == ESCAPED) <= 1e-3
    assert np.all((r.kind == FLOOR) | (r.kind == ESCAPED))
    assert np.all(np.abs(r.location[r.kind == FLOOR].imag) < 1e-5)


def test_hit_near_slit():
    freq = [np.mean(walk(np.full(4000, (1 + eps) * 1j), ObstacleSet(slits=C), rng=2).kind == SLIT)
            for eps in (1e-1, 1e-2, 1e-4)]
    assert freq[0] < freq[1] < freq[2] and freq[2] > 0.99
    assert sample_hit(1j + 1e-7j, ObstacleSet(slits=C), rng=3).kind == "slit"


def test_symmetric_slit_halves():
    r = walk(np.full(40_000, 2j), ObstacleSet(slits=C), rng=4)
    on = r.kind == SLIT
    left, right = np.sum(on & (r.location.real < 0)), np.sum(on & (r.location.real > 0))
    n = left + right
    assert abs(left - right) <= 3 * math.sqrt(n)


def test_im_g0_oracles():
    e = im_g0(2j, SEG, n=40_000, rng=5)
    assert e.agrees(math.sqrt(3), 3.5)
    assert im_g0(2j, ObstacleSet(), n=10).value == 2.0
    far = im_g0(100 + 1j, SEG, n=10_000, rng=6)
    exact = np.sqrt((100 + 1j) ** 2 + 1).imag
    assert far.agrees(exact, 3.5) and abs(far.value - 1) < 0.01


def test_hcap_oracles():
    assert hcap_mc(SEG, n=40_000, rng=7).agrees(0.5, 3.5)
    assert hcap_mc(DISK, n=40_000, rng=8).agrees(1.0, 3.5)
    t = 0.25
    assert hcap_mc(ObstacleSet(segments=[(0j, 2j * math.sqrt(t))]), n=40_000, rng=9).agrees(2 * t, 3.5)
    with pytest.raises(GeometryError):
        hcap_mc(DISK, R=0.5)


def test_slit_hit_probs():
    assert slit_hit_probs(1j, SlitVector.empty()) == []
    far = SlitVector([1.0], [1e6 - 0.5], [1e6 + 0.5])
    p = slit_hit_probs(1j, far, n=5000, rng=10)[0]
    assert p.value <= 3 * p.std_error
    two = SlitVector([1.0, 1.0], [-2.0, 1.0], [-1.0, 2.0])
    a, b = slit_hit_probs(1j, two, n=40_000, rng=11)
    assert abs(a.value - b.value) <= 3 * math.hypot(a.std_error, b.std_error)


def test_contour_measure_symmetric_and_normalized():
    s = SlitVector([1.0], [-0.5], [0.5])
    nu = harmonic_measure_eta(0, s, n=40_000, rng=12)
    assert nu.total_mass == pytest.approx(1.0, abs=1e-12)
    re = nu.points.real
    n = re.size
    assert abs(np.sum(re < 0) - np.sum(re > 0)) <= 3 * math.sqrt(n)


def test_contour_point_limit():
    # a tiny slit at the centre of a fixed box: the exit law is that of Brownian motion from the centre
    s = SlitVector([1.0], [-1e-4], [1e-4])
    rect = Rect(-0.4, 0.4, 0.6, 1.4)
    nu = harmonic_measure_eta(0, s, contour=rect, n=60_000, rng=13)
    ref = walk(np.full(20_000, 1j), ObstacleSet(enclosure=rect.as_tuple()), rng=14)
    pos = rect.arclength(ref.location)
    grid = np.linspace(0, 1, 21)
    F_ref = np.array([np.mean(pos <= g) for g in grid])
    F_nu = nu.cdf(grid)
    se = np.sqrt(F_ref * (1 - F_ref) / pos.size + F_nu * (1 - F_nu) / nu.points.size) + 1e-12
    assert np.max(np.abs(F_ref - F_nu) / se) <= 3.5


def test_contour_validation():
    s = SlitVector([1.0, 1.0], [-1.0, 0.2], [0.0, 1.0])
    r = default_contour(s, 0)
    assert r.x1 < 0.2 and r.y0 > 0
    with pytest.raises(GeometryError):
        harmonic_measure_eta(0, s, contour=Rect(-2, 2, 0.5, 1.5), n=10)


def test_walk_rejects_bad_start():
    with pytest.raises(GeometryError):
        walk([0.5j], DISK)
    with pytest.raises(GeometryError):
        walk([-1j], ObstacleSet())


@given(st.integers(0, 2 ** 32), st.integers(0, 1000))
def test_streams_deterministic(seed, k):
    a = RngStream(seed, k).generator().random(4)
    b = RngStream(seed, k).generator().random(4)
    c = RngStream(seed, k + 1).generator().random(4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


@given(st.floats(-10, 10), st.floats(0, 5), st.floats(0, 5))
def test_ci_agreement_symmetric(v, s1, s2):
    a, b = EstimateCI(v, s1, 10), EstimateCI(v + s1 + s2, s2, 10)
    assert a.agrees(b) == b.agrees(a)
