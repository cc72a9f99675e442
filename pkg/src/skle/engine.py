"""Stochastic Komatu-Loewner evolution on standard slit domains.

One step of length dt, for P paths at once:

* driver SDE (Euler-Maruyama), coefficients evaluated at s - xi_hat;
* Komatu-Loewner step on query points: the chordal slit map at the frozen
  midpoint driver, followed by the explicit Euler correction -2 pi dt h(.),
  where Psi_s = -1/(pi z) + h is the spectral kernel of the current slits;
* tips by backward composition of the inverse steps.

The attachment process U(t) = g_t^0(gamma(t)) and the half-plane capacity a(t)
come from running the vertical-slit zipper on the tips; Phi_t'(xi(t))^2 is
the capacity rate da/(2 dt).  Phi_t'' is taken from Cauchy integrals of
Phi_t = g_t^0 o g_t^{-1} over a circle around xi(t), closed by reflection.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from skle.bmd import M_MIN, SlitKernel, required_orders, solve_kernel
from skle.chordal import _refined_swallow, _upper_sqrt, slit_map, slit_map_inverse, zipper
from skle.geometry import NEVER, SLIT_GAP, CoefficientFunction, GeometryError, HullProbe, SlitVector
from skle.rng import RngStream, as_generator

SQRT6 = math.sqrt(6.0)
HORIZON, DEGENERATE, CAPACITY = "horizon", "slit_degeneracy", "capacity_target"


# ------------------------------------------------------------------ coefficients

def parse_alpha(spec) -> CoefficientFunction:
    """A number or "const:<v>"."""
    if isinstance(spec, CoefficientFunction):
        return spec
    if isinstance(spec, str):
        spec = spec.split(":", 1)[1] if spec.startswith("const:") else spec
    v = float(spec)
    return CoefficientFunction.constant(v, 0)


def parse_b(spec) -> CoefficientFunction:
    """"zero", "neg-bmd" or "const:<v>".

    A nonzero constant is homogeneous of degree -1 only on the empty slit
    space; it is accepted for slit-free runs and for controls.
    """
    if isinstance(spec, CoefficientFunction):
        return spec
    if spec in ("zero", "0", 0, None):
        return CoefficientFunction(lambda s: 0.0, -1, name="zero")
    if spec == "neg-bmd":
        from skle.bmd import b_bmd
        return CoefficientFunction(lambda s: -b_bmd(s), -1, name="neg-bmd")
    if isinstance(spec, str) and spec.startswith("const:"):
        v = float(spec.split(":", 1)[1])
        return CoefficientFunction(lambda s: v, -1, name=f"const:{v}")
    raise ValueError(f"unknown drift spec {spec!r}")


def _coeff_values(cf: CoefficientFunction, ker: SlitKernel | None, y, x, xr) -> np.ndarray:
    P = y.shape[0]
    if cf.name == "zero":
        return np.zeros(P)
    if cf.name.startswith("const:"):
        return np.full(P, float(cf.name.split(":", 1)[1]))
    if cf.name == "neg-bmd":
        return -ker.b_bmd() if ker is not None else np.zeros(P)
    return np.array([cf(SlitVector(y[p], x[p], xr[p])) for p in range(P)])


# ------------------------------------------------------------------ configs

@dataclass(frozen=True)
class SkleConfig:
    s0: SlitVector
    xi0: float = 0.0
    alpha: float | str = SQRT6
    b: str = "neg-bmd"
    dt: float = 1e-3
    t_max: float = 0.3
    y_min_frac: float = 1e-3
    max_order: int = 160
    probes: tuple = ()
    capacity_target: float | None = None   # half-plane capacity a at which a run is complete
    phi2_every: int = 0                    # Phi'' at every n-th node (0: never)
    phi_points: int = 32
    chunk: int = 250

    @property
    def steps(self) -> int:
        return max(1, int(math.ceil(self.t_max / self.dt - 1e-9)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["s0"] = self.s0.to_dict()
        d["probes"] = [[complex(p).real, complex(p).imag] for p in self.probes]
        return d


# ------------------------------------------------------------------ KL steps

def _h(ker: SlitKernel | None, z, xi):
    if ker is None:
        return np.zeros(np.shape(z), complex)
    return ker.h(z - xi[:, None])


def kle_step(g, u, xi_k, ker, dt):
    """Forward step for points g (P, Q); u and xi_k are (P,)."""
    S = slit_map(g, u[:, None], dt)
    if ker is None:
        return S
    return S - 2 * np.pi * dt * _h(ker, S, xi_k)


def kle_step_inverse(w, u, xi_k, ker, dt):
    v = w if ker is None else w + 2 * np.pi * dt * _h(ker, w, xi_k)
    return slit_map_inverse(v, u[:, None], dt)


def _valid(Y, X, XR, y_min, gap=SLIT_GAP):
    ok = np.all(Y >= y_min, axis=1) & np.all(XR - X > gap, axis=1)
    N = Y.shape[1]
    for j in range(N):
        for k in range(j + 1, N):
            near = np.abs(Y[:, j] - Y[:, k]) <= gap
            sep = np.maximum(X[:, k] - XR[:, j], X[:, j] - XR[:, k])
            ok &= ~(near & (sep <= gap))
    return ok


# ------------------------------------------------------------------ ensemble

@dataclass
class Ensemble:
    """Arrays of P runs sharing one configuration; node k is after k steps."""

    config: SkleConfig
    dB: np.ndarray          # (P, K)
    xi: np.ndarray          # (P, K+1)
    Y: np.ndarray           # (P, K+1, N)
    X: np.ndarray
    XR: np.ndarray
    stop: np.ndarray        # (P,) number of accepted steps
    reason: np.ndarray      # (P,) object
    b_bmd: np.ndarray       # (P, K)
    alpha_v: np.ndarray     # (P, K)
    b_v: np.ndarray         # (P, K)
    orders: np.ndarray      # (K,) series length used per step (max over chunks)
    tips: np.ndarray        # (P, K)  tip after k steps, NaN past the stop
    U: np.ndarray           # (P, K)  zipper base of step k
    da: np.ndarray          # (P, K)  capacity increments
    probe_swallow: np.ndarray  # (P, Q) raw-clock swallow times
    phi2: np.ndarray        # (P, K)  NaN where not computed
    target_index: np.ndarray  # (P,) first node with a >= target (-1 if never)

    @property
    def n_paths(self) -> int:
        return self.xi.shape[0]

    @property
    def K(self) -> int:
        return self.dB.shape[1]

    @property
    def a(self) -> np.ndarray:
        return np.concatenate([np.zeros((self.n_paths, 1)), np.cumsum(self.da, axis=1)], axis=1)

    @property
    def phi1(self) -> np.ndarray:
        p = np.sqrt(self.da / (2 * self.config.dt))
        k = np.arange(self.K)[None, :]
        return np.where(k < self.stop[:, None], p, np.nan)

    @property
    def phi1_adapted(self) -> np.ndarray:
        """Phi' known at the start of each step: step k uses the capacity rate of step k - 1."""
        return np.concatenate([np.ones((self.n_paths, 1)), self.phi1[:, :-1]], axis=1)

    def run(self, p: int) -> "SkleRun":
        return SkleRun(self, p)


def _simulate_chunk(cfg: SkleConfig, dB: np.ndarray, alpha_cf, b_cf):
    s0 = cfg.s0
    P, K = dB.shape
    N, dt = s0.n, cfg.dt
    xi = np.empty((P, K + 1)); xi[:, 0] = cfg.xi0
    Y = np.empty((P, K + 1, N)); X = np.empty_like(Y); XR = np.empty_like(Y)
    Y[:, 0], X[:, 0], XR[:, 0] = s0.y, s0.x, s0.xr
    y_min = cfg.y_min_frac * (s0.y.min() if N else 1.0)
    stop = np.full(P, K)
    reason = np.array([HORIZON] * P, dtype=object)
    alive = np.ones(P, bool)
    bb = np.zeros((P, K)); av = np.zeros((P, K)); bv = np.zeros((P, K))
    kernels: list[SlitKernel | None] = [None] * K
    orders = np.zeros(K, int)
    for k in range(K):
        y, x, xr = Y[:, k], X[:, k] - xi[:, k, None], XR[:, k] - xi[:, k, None]
        ker = None
        drift = np.zeros((P, 3 * N))
        if N:
            req = required_orders(y, x, xr)
            over = alive & (req > cfg.max_order)
            if over.any():
                stop[over] = k
                reason[over] = DEGENERATE
                alive &= ~over
            if not alive.any():
                break
            # frozen configurations of stopped paths are replaced by a live one
            src = np.where(alive, np.arange(P), int(np.flatnonzero(alive)[0]))
            M = int(np.clip(req[alive].max(), M_MIN, cfg.max_order))
            ker = solve_kernel(y[src], x[src], xr[src], M)
            kernels[k] = ker
            orders[k] = M
            drift = ker.drift()
            bb[:, k] = ker.b_bmd()
        elif not alive.any():
            break
        av[:, k] = _coeff_values(alpha_cf, ker, y, x, xr)
        bv[:, k] = _coeff_values(b_cf, ker, y, x, xr)
        xn = xi[:, k] + av[:, k] * dB[:, k] + bv[:, k] * dt
        Yn = Y[:, k] + drift[:, :N] * dt
        Xn = X[:, k] + drift[:, N:2 * N] * dt
        XRn = XR[:, k] + drift[:, 2 * N:] * dt
        if N:
            bad = alive & ~_valid(Yn, Xn, XRn, y_min)
            if bad.any():
                stop[bad] = k
                reason[bad] = DEGENERATE
                alive &= ~bad
        xi[:, k + 1] = np.where(alive, xn, xi[:, k])
        Y[:, k + 1] = np.where(alive[:, None], Yn, Y[:, k])
        X[:, k + 1] = np.where(alive[:, None], Xn, X[:, k])
        XR[:, k + 1] = np.where(alive[:, None], XRn, XR[:, k])
    # fill nodes past an early break
    last = np.minimum(stop, K)
    for p in range(P):
        j = last[p]
        xi[p, j + 1:] = xi[p, j]; Y[p, j + 1:] = Y[p, j]; X[p, j + 1:] = X[p, j]; XR[p, j + 1:] = XR[p, j]
    return xi, Y, X, XR, stop, reason, bb, av, bv, kernels, orders


def kle_tips(xi, kernels, dt, stop) -> np.ndarray:
    """Tip after m steps (column m-1) by backward composition; NaN past the stop."""
    P, K1 = xi.shape
    K = K1 - 1
    u = 0.5 * (xi[:, 1:] + xi[:, :-1])
    z = u.astype(complex)
    for m in range(K, 0, -1):
        act = stop >= m
        if not act.any():
            continue
        cols = slice(m - 1, K)
        new = kle_step_inverse(z[:, cols], u[:, m - 1], xi[:, m - 1], kernels[m - 1], dt)
        z[:, cols] = np.where(act[:, None], new, z[:, cols])
    k = np.arange(1, K + 1)[None, :]
    return np.where(k <= stop[:, None], z, np.nan + 0j)


def kle_flow(xi, kernels, dt, stop, z, threshold: float = 4.0):
    """Forward KL flow of query points (Q,) for P paths; returns (g, raw swallow times)."""
    P, K1 = xi.shape
    u = 0.5 * (xi[:, 1:] + xi[:, :-1])
    g = np.broadcast_to(np.asarray(z, complex), (P, len(z))).copy()
    sw = np.full(g.shape, NEVER)
    alive = np.ones(g.shape, bool)
    lim = threshold * math.sqrt(dt)
    for k in range(K1 - 1):
        act = alive & (k < stop)[:, None]
        if not act.any():
            break
        nxt = kle_step(g, u[:, k], xi[:, k], kernels[k], dt)
        g = np.where(act, nxt, g)
        near = act & (np.abs(g - xi[:, k + 1, None]) < lim)
        if near.any():
            tt = _refined_swallow((k + 1) * dt, dt, g, xi[:, k + 1, None])
            sw = np.where(near, tt, sw)
            alive &= ~near
    return g, sw


def phi_derivatives(xi, kernels, dt, stop, U, da, nodes, Y, X, XR, n_points: int = 32,
                    rho_max: float = 0.25):
    """Phi_t'(xi) and Phi_t''(xi) at the given nodes (array of node indices >= 1), for P paths.

    Phi_t = g_t^0 o g_t^{-1} is evaluated on the upper half of a circle of
    radius rho around xi(t); the reflection Phi(conj w) = conj Phi(w) closes it.
    """
    P, K1 = xi.shape
    nodes = np.asarray(nodes, int)
    L = n_points
    th = np.pi * (np.arange(L // 2) + 0.5) / (L // 2)
    # radius: a fraction of the distance to the slits, kept well above the step scale
    xin = xi[:, nodes]
    if Y.shape[2]:
        ys, xs, xrs = Y[:, nodes], X[:, nodes], XR[:, nodes]
        dx = np.maximum(np.maximum(xs - xin[..., None], xin[..., None] - xrs), 0.0)
        dist = np.sqrt(dx ** 2 + ys ** 2).min(axis=2)
    else:
        dist = np.full(xin.shape, np.inf)
    rho = np.minimum(0.4 * dist, rho_max)
    w = xin[..., None] + rho[..., None] * np.exp(1j * th)[None, None, :]      # (P, n, L/2)
    n = len(nodes)
    z = w.reshape(P, n * (L // 2)).copy()
    node_of = np.repeat(nodes, L // 2)[None, :]
    u = 0.5 * (xi[:, 1:] + xi[:, :-1])
    for m in range(int(nodes.max()), 0, -1):
        act = (node_of >= m) & (stop[:, None] >= m)
        new = kle_step_inverse(z, u[:, m - 1], xi[:, m - 1], kernels[m - 1], dt)
        z = np.where(act, new, z)
    for j in range(1, int(nodes.max()) + 1):
        act = (node_of >= j) & (stop[:, None] >= j)
        base = U[:, j - 1, None]
        v2 = 2 * da[:, j - 1, None]
        d = z - base
        z = np.where(act, base + _upper_sqrt(d * d + v2, d), z)
    vals = z.reshape(P, n, L // 2)
    e1 = np.exp(-1j * th)
    c1 = 2 * np.real(np.sum(vals * e1, axis=2)) / L / rho
    c2 = 2 * np.real(np.sum(vals * e1 ** 2, axis=2)) / L / rho ** 2
    ok = (nodes[None, :] <= stop[:, None]) & (rho > 5 * math.sqrt(dt))
    return np.where(ok, c1, np.nan), np.where(ok, 2 * c2, np.nan), rho


def simulate(cfg: SkleConfig, n_paths: int = 1, seed: int = 0, dB: np.ndarray | None = None,
             stream_offset: int = 0) -> Ensemble:
    """Run P independent SKLE paths.  Path p draws its noise from stream (seed, offset + p)."""
    K, dt = cfg.steps, cfg.dt
    if dB is None:
        dB = np.empty((n_paths, K))
        for p in range(n_paths):
            dB[p] = RngStream(seed, stream_offset + p).generator().standard_normal(K)
        dB *= math.sqrt(dt)
    else:
        dB = np.atleast_2d(np.asarray(dB, float))
        if dB.shape[1] != K:
            raise ValueError(f"noise has {dB.shape[1]} steps, config needs {K}")
        n_paths = dB.shape[0]
    alpha_cf, b_cf = parse_alpha(cfg.alpha), parse_b(cfg.b)
    probes = np.asarray(cfg.probes, complex)
    if np.any(probes.imag <= 0):
        raise GeometryError("probe points must lie in H")
    parts = []
    for lo in range(0, n_paths, cfg.chunk):
        sl = slice(lo, min(n_paths, lo + cfg.chunk))
        xi, Y, X, XR, stop, reason, bb, av, bv, kernels, orders = _simulate_chunk(cfg, dB[sl], alpha_cf, b_cf)
        tips = kle_tips(xi, kernels, dt, stop)
        U, da = zipper(tips, xi[:, 0])
        if probes.size:
            _, sw = kle_flow(xi, kernels, dt, stop, probes)
        else:
            sw = np.zeros((xi.shape[0], 0))
        phi2 = np.full((xi.shape[0], K), np.nan)
        if cfg.phi2_every:
            nodes = np.arange(cfg.phi2_every, K + 1, cfg.phi2_every)
            _, p2, _ = phi_derivatives(xi, kernels, dt, stop, U, da, nodes, Y, X, XR, cfg.phi_points)
            # step k uses the last computed node at or before its start (node 0: Phi = id)
            p2 = np.concatenate([np.zeros((xi.shape[0], 1)), p2], axis=1)
            idx = np.searchsorted(nodes, np.arange(K), side="right")
            phi2 = p2[:, idx]
        if cfg.s0.n == 0:
            phi2 = np.zeros_like(phi2)
        parts.append((xi, Y, X, XR, stop, reason, bb, av, bv, orders, tips, U, da, sw, phi2))
    cat = [np.concatenate([p[i] for p in parts]) for i in range(15) if i != 9]
    orders = np.max(np.stack([p[9] for p in parts]), axis=0)
    xi, Y, X, XR, stop, reason, bb, av, bv, tips, U, da, sw, phi2 = cat
    a = np.cumsum(da, axis=1)
    tidx = np.full(len(stop), -1)
    if cfg.capacity_target is not None:
        hit = a >= cfg.capacity_target
        first = np.where(hit.any(axis=1), hit.argmax(axis=1) + 1, -1)
        tidx = first
        reached = first > 0
        reason = reason.copy()
        reason[reached] = CAPACITY
    return Ensemble(cfg, dB, xi, Y, X, XR, stop, reason, bb, av, bv, orders, tips, U, da, sw, phi2, tidx)


# ------------------------------------------------------------------ single runs

@dataclass(frozen=True)
class DrivingRecord:
    time_grid: np.ndarray
    xi: np.ndarray
    s: np.ndarray              # (K+1, 3N)
    stopped_reason: str
    stop_index: int
    dB: np.ndarray

    def slits(self, k: int) -> SlitVector:
        return SlitVector.from_array(self.s[k])


class SkleRun:
    """One path of an ensemble with the derived quantities of the capacity clock."""

    def __init__(self, ens: Ensemble, p: int):
        self.ens, self.p = ens, p
        self.config = ens.config

    @property
    def dt(self) -> float:
        return self.config.dt

    @property
    def stop(self) -> int:
        return int(self.ens.stop[self.p])

    @property
    def record(self) -> DrivingRecord:
        e, p = self.ens, self.p
        t = np.arange(e.K + 1) * self.dt
        s = np.concatenate([e.Y[p], e.X[p], e.XR[p]], axis=1)
        return DrivingRecord(t, e.xi[p], s, str(e.reason[p]), self.stop, e.dB[p])

    @property
    def a_path(self) -> np.ndarray:
        return self.ens.a[self.p]

    @property
    def phi_prime(self) -> np.ndarray:
        return self.ens.phi1[self.p]

    @property
    def phi_adapted(self) -> np.ndarray:
        return self.ens.phi1_adapted[self.p]

    @property
    def phi_doubleprime(self) -> np.ndarray:
        return self.ens.phi2[self.p]

    @property
    def U_path(self) -> np.ndarray:
        """Attachment point per node (node 0: xi(0); node k: base of step k)."""
        return np.concatenate([[self.ens.xi[self.p, 0]], self.ens.U[self.p]])

    @property
    def tips(self) -> np.ndarray:
        return np.concatenate([[complex(self.ens.xi[self.p, 0])], self.ens.tips[self.p]])

    @property
    def hull_probe(self) -> HullProbe:
        return HullProbe(np.asarray(self.config.probes, complex), self.ens.probe_swallow[self.p])

    def to_csv(self, path) -> None:
        e, p, K = self.ens, self.p, self.ens.K
        N = self.config.s0.n
        head = ["t", "xi", "u", "a", "phi1", "phi2"] + [f"y{j+1}" for j in range(N)] \
            + [f"x{j+1}" for j in range(N)] + [f"xr{j+1}" for j in range(N)]
        phi1 = np.concatenate([[1.0], self.phi_prime])
        phi2 = np.concatenate([[0.0 if N == 0 else np.nan], self.phi_doubleprime])
        a, U = self.a_path, self.U_path
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(head)
            for k in range(min(K, self.stop) + 1):
                row = [k * self.dt, e.xi[p, k], U[k], a[k], phi1[k], phi2[k]]
                row += list(e.Y[p, k]) + list(e.X[p, k]) + list(e.XR[p, k])
                w.writerow([repr(float(v)) for v in row])

    def manifest(self) -> dict:
        e, p = self.ens, self.p
        return {"config": self.config.to_dict(), "stopped_reason": str(e.reason[p]), "stop_index": self.stop,
                "target_index": int(e.target_index[p]),
                "diagnostics": {"max_kernel_order": int(e.orders.max()) if e.orders.size else 0,
                                "final_capacity": float(self.a_path[min(self.stop, e.K)]),
                                "continuity_max_jump": continuity_diagnostic(self)}}


# ------------------------------------------------------------------ public operations

def solve_sde(s0: SlitVector, xi0: float, alpha, b, dt: float, T: float, rng=None,
              y_min_frac: float = 1e-3) -> DrivingRecord:
    """Euler-Maruyama path of (xi, s) for one run."""
    cfg = SkleConfig(s0, xi0, alpha, b, dt, T, y_min_frac)
    gen = as_generator(rng)
    dB = gen.standard_normal(cfg.steps) * math.sqrt(dt)
    xi, Y, X, XR, stop, reason, *_ = _simulate_chunk(cfg, dB[None, :], parse_alpha(alpha), parse_b(b))
    t = np.arange(cfg.steps + 1) * dt
    s = np.concatenate([Y[0], X[0], XR[0]], axis=1)
    return DrivingRecord(t, xi[0], s, str(reason[0]), int(stop[0]), dB)


def _record_kernels(rec: DrivingRecord, N: int):
    K = len(rec.time_grid) - 1
    if N == 0:
        return [None] * K
    y, x, xr = rec.s[:K, :N], rec.s[:K, N:2 * N] - rec.xi[:K, None], rec.s[:K, 2 * N:] - rec.xi[:K, None]
    ker = solve_kernel(y, x, xr, int(min(required_orders(y, x, xr).max(), 256)))
    return [ker.take(slice(k, k + 1)) for k in range(K)]


def kle_integrate(record: DrivingRecord, query) -> tuple[HullProbe, np.ndarray]:
    """Swallow times and final g values of query points under the KL flow of a recorded run."""
    q = np.atleast_1d(np.asarray(query, complex))
    if np.any(q.imag <= 0):
        raise GeometryError("query points must lie in H")
    N = record.s.shape[1] // 3
    kernels = _record_kernels(record, N)
    dt = float(record.time_grid[1] - record.time_grid[0])
    g, sw = kle_flow(record.xi[None, :], kernels, dt, np.array([record.stop_index]), q)
    return HullProbe(q, sw[0]), g[0]


def record_tips(record: DrivingRecord) -> np.ndarray:
    N = record.s.shape[1] // 3
    kernels = _record_kernels(record, N)
    dt = float(record.time_grid[1] - record.time_grid[0])
    return kle_tips(record.xi[None, :], kernels, dt, np.array([record.stop_index]))[0]


def build_phi(run: SkleRun, nodes, n_points: int = 32):
    """Phi_t'(xi(t)), Phi_t''(xi(t)) and the circle radius at the given nodes of a run."""
    e, p = run.ens, run.p
    rec = run.record
    N = run.config.s0.n
    kernels = _record_kernels(rec, N)
    nodes = np.atleast_1d(np.asarray(nodes, int))
    if np.any(nodes < 1):
        raise ValueError("nodes start at 1 (node 0 is the identity)")
    sl = slice(p, p + 1)
    return phi_derivatives(e.xi[sl], kernels, run.dt, e.stop[sl], e.U[sl], e.da[sl], nodes,
                           e.Y[sl], e.X[sl], e.XR[sl], n_points)


def capacity_clock(run: SkleRun) -> np.ndarray:
    """a(t) = 2 int Phi'^2 ds with Phi' constant on each step (equals the zipper capacity)."""
    phi = np.nan_to_num(run.phi_prime)
    return np.concatenate([[0.0], np.cumsum(2 * phi ** 2 * run.dt)])


@dataclass(frozen=True)
class Reparametrized:
    check_times: np.ndarray      # node k -> a_k / 2
    U_steps: np.ndarray          # driver on check-clock step k
    step_lengths: np.ndarray
    probe_swallow: np.ndarray    # F-check swallow times a(t_z)/2
    probes: np.ndarray
    node_values: np.ndarray      # driver at check-clock nodes, Phi_t(xi(t)) to first order


def reparametrize(run: SkleRun) -> Reparametrized:
    a = run.a_path
    n = min(run.stop, run.ens.K)
    t = np.arange(len(a)) * run.dt
    sw = run.ens.probe_swallow[run.p]
    fin = np.isfinite(sw)
    chk = np.full(sw.shape, NEVER)
    chk[fin] = np.interp(sw[fin], t, a) / 2
    xi = run.ens.xi[run.p, :n + 1]
    u = 0.5 * (xi[1:] + xi[:-1])
    U = run.ens.U[run.p, :n]
    nodes = np.concatenate([[xi[0]], U + run.phi_prime[:n] * (xi[1:] - u)])
    return Reparametrized(a[:n + 1] / 2, U, np.diff(a[:n + 1]) / 2, chk,
                          np.asarray(run.config.probes, complex), nodes)


def chordal_from_U(rep: Reparametrized, z=None, threshold: float = 4.0):
    """Chordal flow on the check clock driven by U; returns (g, swallow times)."""
    z = rep.probes if z is None else np.atleast_1d(np.asarray(z, complex))
    g = z.astype(complex).copy()
    sw = np.full(g.shape, NEVER)
    alive = np.ones(g.shape, bool)
    U, h = rep.U_steps, rep.step_lengths
    for k in range(len(U)):
        if h[k] <= 0:
            continue
        nxt = slit_map(g, U[k], h[k])
        g = np.where(alive, nxt, g)
        node = rep.node_values[k + 1]
        near = alive & (np.abs(g - node) < threshold * math.sqrt(h[k]))
        if near.any():
            sw = np.where(near, _refined_swallow(rep.check_times[k + 1], h[k], g, node), sw)
            alive &= ~near
    return g, sw


def pathwise_check(run: SkleRun) -> float:
    """Largest disagreement of probe swallow times: reparametrized KL hulls vs chordal flow driven by U."""
    rep = reparametrize(run)
    _, sw = chordal_from_U(rep)
    horizon = rep.check_times[-1]
    a = HullProbe(rep.probes, rep.probe_swallow)
    b = HullProbe(rep.probes, sw)
    return a.max_discrepancy(b, horizon)


def _increments(run: SkleRun):
    e, p = run.ens, run.p
    n = min(run.stop, e.K)
    phi1, phi2 = run.phi_adapted[:n], run.phi_doubleprime[:n]
    al, bb, bv, dB = e.alpha_v[p, :n], e.b_bmd[p, :n], e.b_v[p, :n], e.dB[p, :n]
    c2 = -3 + 0.5 * al ** 2
    second = np.where(np.abs(c2) < 1e-12, 0.0, c2 * np.nan_to_num(phi2, nan=np.nan) * run.dt)
    return phi1 * al * dB, phi1 * (bb + bv) * run.dt, second


def u_reconstruct_raw(run: SkleRun) -> np.ndarray:
    """U at step midpoints rebuilt from the semimartingale decomposition on the raw clock."""
    m, d1, d2 = _increments(run)
    inc = m + d1 + d2
    c = np.concatenate([[0.0], np.cumsum(inc)])
    return run.ens.xi[run.p, 0] + c[:-1] + 0.5 * inc


def u_reconstruct_check_clock(run: SkleRun) -> np.ndarray:
    """Same reconstruction on the capacity clock: dt_check = Phi'^2 dt, dB_check = Phi' dB."""
    e, p = run.ens, run.p
    n = min(run.stop, e.K)
    phi1, phi2 = run.phi_adapted[:n], run.phi_doubleprime[:n]
    al, bb, bv, dB = e.alpha_v[p, :n], e.b_bmd[p, :n], e.b_v[p, :n], e.dB[p, :n]
    dtc = phi1 ** 2 * run.dt
    dBc = phi1 * dB
    second = np.where(np.abs(al ** 2 - 6) < 1e-12, 0.0, 0.5 * phi2 / phi1 ** 2 * (al ** 2 - 6) * dtc)
    inc = (bv + bb) / phi1 * dtc + second + al * dBc
    c = np.concatenate([[0.0], np.cumsum(inc)])
    return e.xi[p, 0] + c[:-1] + 0.5 * inc


def u_decomposition_check(run: SkleRun) -> float:
    """Max |U - reconstruction| over the run (U from the zipper, at step midpoints)."""
    rec = u_reconstruct_check_clock(run)
    n = len(rec)
    if n == 0:
        return 0.0
    return float(np.nanmax(np.abs(run.ens.U[run.p, :n] - rec)))


def girsanov_log_weights(run: SkleRun) -> np.ndarray:
    """log W per node for constant alpha: W removes the drift of U / alpha on the capacity clock."""
    e, p = run.ens, run.p
    n = min(run.stop, e.K)
    al = e.alpha_v[p, :n]
    if np.any(al <= 0) or np.ptp(al) > 0:
        raise ValueError("Girsanov weights need a constant positive alpha")
    phi1, phi2 = run.phi_adapted[:n], run.phi_doubleprime[:n]
    bb, bv, dB = e.b_bmd[p, :n], e.b_v[p, :n], e.dB[p, :n]
    second = np.zeros(n) if abs(al[0] ** 2 - 6) < 1e-12 else 0.5 * phi2 / phi1 ** 2 * (al ** 2 - 6)
    theta = ((bb + bv) / phi1 + second) / al
    dtc = phi1 ** 2 * run.dt
    dBc = phi1 * dB
    lw = -np.cumsum(theta * dBc) - 0.5 * np.cumsum(theta ** 2 * dtc)
    return np.concatenate([[0.0], lw])


def girsanov_weight(run: SkleRun, alpha: float | None = None) -> np.ndarray:
    if alpha is not None and not np.allclose(run.ens.alpha_v[run.p, :max(1, run.stop)], alpha):
        raise ValueError("alpha does not match the run")
    return np.exp(girsanov_log_weights(run))


def continuity_diagnostic(run: SkleRun) -> float:
    """Largest jump of g_t^0 at the probe points between adjacent nodes (reported, not asserted)."""
    rep = reparametrize(run)
    if rep.probes.size == 0 or len(rep.U_steps) == 0:
        return 0.0
    g = rep.probes.astype(complex).copy()
    best = 0.0
    for k in range(len(rep.U_steps)):
        if rep.step_lengths[k] <= 0:
            continue
        nxt = slit_map(g, rep.U_steps[k], rep.step_lengths[k])
        best = max(best, float(np.max(np.abs(nxt - g))))
        g = nxt
    return best
