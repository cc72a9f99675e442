"""Chordal Loewner evolution in the upper half-plane.

The flow dg/dt = 2/(g - xi(t)) is discretized by freezing the driver at the
midpoint of each step, where the step map is the explicit vertical-slit map
``u + sqrt((z - u)^2 + 4 dt)``.  Hull capacity on this clock is hcap(K_t) = 2t.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from skle.geometry import NEVER, GeometryError, as_point
from skle.rng import as_generator


def complex_poisson_H(z, xi=0.0):
    """Complex Poisson kernel of absorbing Brownian motion on H: -1/(pi (z - xi))."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise GeometryError("complex Poisson kernel needs Im z > 0")
    out = -1.0 / (np.pi * (z - xi))
    return complex(out) if out.ndim == 0 else out


def _upper_sqrt(q, ref):
    """sqrt(q) on the branch with Im >= 0; on the real axis keep the sign of ``ref``."""
    w = np.sqrt(q)
    flip = (w.imag < 0) | ((w.imag == 0) & (w.real * np.real(ref) < 0))
    return np.where(flip, -w, w)


def slit_map(z, u, dt):
    """Forward step map of a vertical slit of capacity 2*dt at u."""
    d = z - u
    return u + _upper_sqrt(d * d + 4.0 * dt, d)


def slit_map_inverse(z, u, dt):
    d = z - u
    return u + _upper_sqrt(d * d - 4.0 * dt, d)


@dataclass(frozen=True)
class DrivingFunction:
    """Piecewise-linear driver sampled on a strictly increasing grid starting at 0."""

    time_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.time_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or len(t) < 1:
            raise GeometryError("time grid and values must be 1-d and of equal length")
        if t[0] != 0 or np.any(np.diff(t) <= 0):
            raise GeometryError("time grid must start at 0 and increase strictly")
        if not np.all(np.isfinite(v)):
            raise GeometryError("driver values must be finite")
        object.__setattr__(self, "time_grid", t)
        object.__setattr__(self, "values", v)

    @property
    def horizon(self) -> float:
        return float(self.time_grid[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.time_grid)

    @property
    def dt_max(self) -> float:
        return float(self.steps.max()) if len(self.time_grid) > 1 else 0.0

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.values[1:] + self.values[:-1])

    def __call__(self, t):
        return np.interp(t, self.time_grid, self.values)

    def truncate(self, T: float) -> "DrivingFunction":
        """Restriction to [0, T]; T need not be a grid node."""
        if T >= self.horizon:
            return self
        k = np.searchsorted(self.time_grid, T, side="left")
        t = np.append(self.time_grid[:k], T) if self.time_grid[k] != T else self.time_grid[:k + 1]
        return DrivingFunction(t, self(t))

    def window(self, t0: float, t1: float) -> "DrivingFunction":
        """The driver on [t0, t1], re-based to start at time 0 (t0 must be a grid node)."""
        k0 = int(np.searchsorted(self.time_grid, t0))
        k1 = int(np.searchsorted(self.time_grid, t1, side="right"))
        return DrivingFunction(self.time_grid[k0:k1] - self.time_grid[k0], self.values[k0:k1])

    def scaled(self, c: float) -> "DrivingFunction":
        """Brownian scaling t -> c*xi(t/c^2)."""
        return DrivingFunction(c * c * self.time_grid, c * self.values)

    def reflected(self) -> "DrivingFunction":
        return DrivingFunction(self.time_grid, -self.values)

    @classmethod
    def constant(cls, value: float, T: float, dt: float) -> "DrivingFunction":
        n = max(1, int(math.ceil(T / dt - 1e-9)))
        t = np.linspace(0.0, T, n + 1)
        return cls(t, np.full(n + 1, float(value)))

    @classmethod
    def brownian(cls, kappa: float, T: float, dt: float, rng=None, start: float = 0.0) -> "DrivingFunction":
        """Samples of start + sqrt(kappa) B(t)."""
        gen = as_generator(rng)
        n = max(1, int(math.ceil(T / dt - 1e-9)))
        t = np.linspace(0.0, T, n + 1)
        dB = gen.standard_normal(n) * np.sqrt(np.diff(t))
        return cls(t, start + math.sqrt(kappa) * np.concatenate([[0.0], np.cumsum(dB)]))


@dataclass(frozen=True)
class Swallowed:
    t: float
    bracket: tuple[float, float]


def _refined_swallow(t_k, dt_k, g, xi_k):
    # frozen-driver local solution: (g - xi)^2 + 4 tau = 0
    tau = np.real(-(g - xi_k) ** 2) / 4.0
    return t_k + np.clip(tau, 0.0, 4.0 * dt_k)


def flow(driver: DrivingFunction, z, T: float | None = None, threshold: float = 4.0):
    """Flow many points; returns (g_T values, swallow times).

    Swallowed points keep their last value; their swallow time is finite.
    A point is swallowed when |g_t(z) - xi(t)| < threshold * sqrt(dt).
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex)).copy()
    if np.any(z.imag <= 0):
        raise GeometryError("query points must lie in H")
    T = driver.horizon if T is None else T
    if T > driver.horizon + 1e-12:
        raise GeometryError("T beyond driver horizon")
    d = driver.truncate(T)
    t, xi, u, steps = d.time_grid, d.values, d.midpoints, d.steps
    swallow = np.full(z.shape, NEVER)
    alive = np.ones(z.shape, bool)
    for k in range(len(steps)):
        dt = steps[k]
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        g = slit_map(z[idx], u[k], dt)
        z[idx] = g
        near = np.abs(g - xi[k + 1]) < threshold * math.sqrt(dt)
        if near.any():
            hit = idx[near]
            swallow[hit] = _refined_swallow(t[k + 1], dt, g[near], xi[k + 1])
            alive[hit] = False
    return z, swallow


def loewner_forward(driver: DrivingFunction, z, T: float | None = None):
    """g_T(z), or ``Swallowed`` if the point is absorbed before T."""
    z = as_point(z)
    g, sw = flow(driver, [z], T)
    if math.isfinite(sw[0]):
        dt = driver.dt_max
        return Swallowed(float(sw[0]), (float(sw[0]) - 4 * dt, float(sw[0]) + dt))
    return complex(g[0])


def swallow_time(driver: DrivingFunction, z) -> float:
    """Swallow time of z, or ``NEVER`` if it survives the driver horizon."""
    _, sw = flow(driver, [as_point(z)])
    return float(sw[0])


def swallow_times(driver: DrivingFunction, zs) -> np.ndarray:
    return flow(driver, zs)[1]


@dataclass(frozen=True)
class TraceSample:
    t: float
    driver: float
    tip: complex


@dataclass(frozen=True)
class Trace:
    t: np.ndarray
    driver: np.ndarray
    tip: np.ndarray

    def __len__(self):
        return len(self.t)

    def __iter__(self) -> Iterator[TraceSample]:
        for a, b, c in zip(self.t, self.driver, self.tip):
            yield TraceSample(float(a), float(b), complex(c))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "driver", "tip_re", "tip_im"])
            for a, b, c in zip(self.t, self.driver, self.tip):
                w.writerow([repr(float(a)), repr(float(b)), repr(float(c.real)), repr(float(c.imag))])

    @classmethod
    def from_csv(cls, path) -> "Trace":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2] + 1j * data[:, 3])


def tips(u: np.ndarray, steps: np.ndarray, nodes=None) -> np.ndarray:
    """Tips at the given step indices (1-based: node k is after k steps).

    Each tip is the backward composition of the inverse step maps applied to
    the frozen driver value of its last step.
    """
    n = len(steps)
    nodes = np.arange(1, n + 1) if nodes is None else np.asarray(nodes, dtype=int)
    out = np.zeros(len(nodes), dtype=complex)
    if len(nodes) == 0:
        return out
    order = np.argsort(nodes)
    sn = nodes[order]
    z = u[sn - 1].astype(complex)
    for m in range(int(sn[-1]), 0, -1):
        lo = int(np.searchsorted(sn, m, side="left"))
        z[lo:] = slit_map_inverse(z[lo:], u[m - 1], steps[m - 1])
    out[order] = z
    return out


def trace(driver: DrivingFunction, dt: float | None = None, every: int = 1) -> Trace:
    """Tip of the hull at every ``every``-th grid node (plus the final node).

    ``dt`` (optional) resamples the driver on a uniform grid of that step first.
    """
    d = driver
    if dt is not None and abs(d.dt_max - dt) > 1e-15:
        n = max(1, int(math.ceil(d.horizon / dt - 1e-9)))
        tg = np.linspace(0, d.horizon, n + 1)
        d = DrivingFunction(tg, d(tg))
    n = len(d.steps)
    nodes = np.arange(every, n + 1, every)
    if len(nodes) == 0 or nodes[-1] != n:
        nodes = np.append(nodes, n)
    tp = tips(d.midpoints, d.steps, nodes)
    t = np.concatenate([[0.0], d.time_grid[nodes]])
    drv = np.concatenate([[d.values[0]], d.values[nodes]])
    tip = np.concatenate([[complex(d.values[0])], tp])
    return Trace(t, drv, tip)


# ---------------------------------------------------------------- many paths at once

def graded_steps(T: float, dt_max: float, ratio: float, dt_min: float) -> np.ndarray:
    """Steps dt_k = clip(ratio * t_k, dt_min, dt_max) summing to T.

    Keeps the relative resolution sqrt(dt / t) bounded for small hulls too,
    where a uniform grid spends only a handful of steps.
    """
    out, t = [], 0.0
    while t < T - 1e-12:
        h = min(max(ratio * t, dt_min), dt_max, T - t)
        out.append(h)
        t += h
    return np.array(out)


def brownian_drivers(kappa: float, n_paths: int, T: float, dt, seed: int = 0,
                     start: float | np.ndarray = 0.0, stream_offset: int = 0):
    """Node values (P, K+1) of start + sqrt(kappa) B on a uniform grid.

    ``dt`` may also be an array of K step sizes (then T is ignored).  Path p
    uses the stream (seed, stream_offset + p), so a path does not depend on
    the ensemble size.
    """
    from skle.rng import RngStream

    steps = np.atleast_1d(np.asarray(dt, float))
    K = steps.size if steps.size > 1 else max(1, int(math.ceil(T / dt - 1e-9)))
    dB = np.empty((n_paths, K))
    for p in range(n_paths):
        dB[p] = RngStream(seed, stream_offset + p).generator().standard_normal(K)
    dB *= np.sqrt(steps)
    xi = np.concatenate([np.zeros((n_paths, 1)), np.cumsum(dB, axis=1)], axis=1)
    return np.asarray(start, float).reshape(-1, 1) + math.sqrt(kappa) * xi, dB


def batch_tips(u: np.ndarray, dt: float, upto: int | None = None) -> np.ndarray:
    """Tips after every step for P paths; u is (P, K) of frozen driver values.

    Returns (P, upto) where column m-1 is the tip after m steps.
    """
    u = np.atleast_2d(u)
    K = u.shape[1] if upto is None else int(upto)
    z = u[:, :K].astype(complex)
    for m in range(K, 0, -1):
        z[:, m - 1:] = slit_map_inverse(z[:, m - 1:], u[:, m - 1:m], dt)
    return z


def batch_tips_until(u: np.ndarray, dt: float, stop_fn, block: int = 50):
    """Tips computed block by block, abandoning paths once ``stop_fn`` fires.

    ``dt`` is a step size or an array of K step sizes.
    ``stop_fn(tips_block, node_indices, path_indices)`` returns a boolean array
    (paths, block) marking nodes at which the path is stopped.  Returns the
    tips (P, K) with NaN after the stop and the stop node (K + 1 when never).
    """
    u = np.atleast_2d(u)
    P, K = u.shape
    h = np.broadcast_to(np.asarray(dt, float), (K,))
    out = np.full((P, K), np.nan + 0j)
    stop = np.full(P, K + 1)
    alive = np.arange(P)
    for k0 in range(0, K, block):
        if alive.size == 0:
            break
        k1 = min(K, k0 + block)
        z = u[alive, k0:k1].astype(complex)
        for m in range(k1, 0, -1):
            lo = max(m - 1 - k0, 0)
            z[:, lo:] = slit_map_inverse(z[:, lo:], u[alive, m - 1:m], h[m - 1])
        out[alive, k0:k1] = z
        hit = np.asarray(stop_fn(z, np.arange(k0 + 1, k1 + 1), alive), bool)
        fired = hit.any(axis=1)
        if fired.any():
            first = hit.argmax(axis=1)
            for a, f in zip(alive[fired], first[fired]):
                stop[a] = k0 + f + 1
                out[a, k0 + f + 1:] = np.nan
        alive = alive[~fired]
    return out, stop


def batch_flow(u: np.ndarray, xi: np.ndarray, dt: float, z, threshold: float = 4.0, real_ok: bool = False):
    """Forward flow of query points for P paths; returns (g, swallow times) of shape (P, Q).

    xi holds node values (P, K+1) and u frozen values (P, K).  Real query
    points are allowed with ``real_ok`` and stay real.
    """
    u, xi = np.atleast_2d(u), np.atleast_2d(xi)
    P, K = u.shape
    z = np.asarray(z, complex)
    g = np.broadcast_to(z, (P,) + z.shape[-1:]).astype(complex).copy()
    if not real_ok and np.any(g.imag <= 0):
        raise GeometryError("query points must lie in H")
    sw = np.full(g.shape, NEVER)
    alive = np.ones(g.shape, bool)
    lim = threshold * math.sqrt(dt)
    for k in range(K):
        nxt = slit_map(g, u[:, k:k + 1], dt)
        g = np.where(alive, nxt, g)
        near = alive & (np.abs(g - xi[:, k + 1:k + 2]) < lim)
        if near.any():
            tt = _refined_swallow((k + 1) * dt, dt, g, xi[:, k + 1:k + 2])
            sw = np.where(near, tt, sw)
            alive &= ~near
    return g, sw


def zipper(points: np.ndarray, start) -> tuple[np.ndarray, np.ndarray]:
    """Vertical-slit zipper for P polylines.

    points (P, K) are successive curve points after the start point; each is
    mapped to the real axis by the slit map based below it.  Returns the
    driver values U (P, K) and capacity increments (P, K) with hcap = sum.
    NaN points (stopped paths) contribute nothing.
    """
    w = np.atleast_2d(points).astype(complex).copy()
    P, K = w.shape
    U = np.empty((P, K))
    da = np.zeros((P, K))
    last = np.broadcast_to(np.asarray(start, float), (P,)).copy()
    for j in range(K):
        c = w[:, j]
        ok = np.isfinite(c)
        base = np.where(ok, c.real, last)
        v = np.where(ok, np.maximum(c.imag, 0.0), 0.0)
        U[:, j] = base
        da[:, j] = 0.5 * v * v
        last = base
        if j + 1 < K:
            d = w[:, j + 1:] - base[:, None]
            w[:, j + 1:] = base[:, None] + _upper_sqrt(d * d + (v * v)[:, None], d)
    return U, da


# ---------------------------------------------------------------- analytic hulls

@dataclass(frozen=True)
class AnalyticHull:
    """Hulls with closed-form canonical maps: a vertical segment or a half-disk."""

    kind: str
    center: float
    size: float

    @classmethod
    def segment(cls, x0: float, height: float) -> "AnalyticHull":
        return cls("segment", float(x0), float(height))

    @classmethod
    def half_disk(cls, c: float, r: float) -> "AnalyticHull":
        return cls("half_disk", float(c), float(r))

    @property
    def hcap(self) -> float:
        return self.size ** 2 / 2 if self.kind == "segment" else self.size ** 2

    @property
    def rad(self) -> float:
        if self.kind == "segment":
            return math.hypot(self.center, self.size)
        return abs(self.center) + self.size

    def map(self, z):
        z = np.asarray(z, dtype=complex)
        w = z - self.center
        if self.kind == "segment":
            return self.center + _upper_sqrt(w * w + self.size ** 2, w)
        return self.center + w + self.size ** 2 / w

    def inverse(self, w):
        w = np.asarray(w, dtype=complex) - self.center
        if self.kind == "segment":
            return self.center + _upper_sqrt(w * w - self.size ** 2, w)
        # z + r^2/z = w  ->  z = (w + sqrt(w^2 - 4 r^2)) / 2 with |z| >= r
        r = np.sqrt(w * w - 4 * self.size ** 2)
        z1, z2 = (w + r) / 2, (w - r) / 2
        pick = np.where(np.abs(z1) >= np.abs(z2), z1, z2)
        return self.center + pick

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.kind == "segment":
            return (z.real == self.center) & (z.imag <= self.size)
        return np.abs(z - self.center) <= self.size

    def shifted(self, x: float) -> "AnalyticHull":
        return AnalyticHull(self.kind, self.center + x, self.size)

    def obstacles(self):
        from skle.abm_mc import ObstacleSet
        if self.kind == "segment":
            return ObstacleSet(segments=[(complex(self.center, 0), complex(self.center, self.size))])
        return ObstacleSet(disks=[(complex(self.center, 0), self.size)])


def expansion_tail_check(A: AnalyticHull, z) -> float:
    """|z - g_A(z) + hcap/z| |z|^2 / (rad hcap); bounded for |z| >= 2 rad(A)."""
    z = as_point(z)
    if abs(z) < 2 * A.rad:
        raise GeometryError("need |z| >= 2 rad(A)")
    g = complex(A.map(z))
    return abs(z - g + A.hcap / z) * abs(z) ** 2 / (A.rad * A.hcap)


def hcap_translation_check(A, x: float, n: int = 200_000, rng=None, n_sigma: float = 3.0):
    """Compare MC half-plane capacities of A and A - x; returns (ok, est_A, est_shifted)."""
    from skle.abm_mc import hcap_mc

    obs = A.obstacles() if isinstance(A, AnalyticHull) else A
    gen = as_generator(rng)
    e0 = hcap_mc(obs, n=n, rng=gen)
    if x == 0:
        return True, e0, e0
    e1 = hcap_mc(obs.shifted(-x), n=n, rng=gen)
    tol = n_sigma * math.hypot(e0.std_error, e1.std_error) + e0.bias_bound + e1.bias_bound
    return abs(e0.value - e1.value) <= tol, e0, e1
