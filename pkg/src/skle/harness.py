"""Experiment presets and two-sample statistics.

Every preset builds two ensembles whose laws should agree (or, for the
controls, should not), evaluates pre-registered functionals on each path and
reports a Kolmogorov-Smirnov test per functional.  Paths stopped for geometric
reasons before the common truncation are discarded and counted.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from skle.annulus import psi_inverse, radial_tips_until
from skle.chordal import (AnalyticHull, batch_flow, batch_tips, batch_tips_until, brownian_drivers, graded_steps,
                          slit_map, zipper)
from skle.engine import SQRT6, SkleConfig, girsanov_log_weights, simulate
from skle.geometry import GeometryError, SlitVector

B_STREAMS = 1_000_000      # stream offset of the reference ensemble
C_STREAMS = 2_000_000      # stream offset of control ensembles


# ------------------------------------------------------------------ statistics

@dataclass(frozen=True)
class KSReport:
    statistic: float
    p_value: float
    n1: int
    n2: int
    functional: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def ks_two_sample(xs, ys, functional: str = "") -> KSReport:
    """Two-sample KS statistic with the asymptotic p-value."""
    xs, ys = np.asarray(xs, float).ravel(), np.asarray(ys, float).ravel()
    if xs.size == 0 or ys.size == 0:
        raise ValueError("empty sample")
    r = stats.ks_2samp(xs, ys, method="asymp")
    return KSReport(float(r.statistic), float(min(1.0, max(0.0, r.pvalue))), xs.size, ys.size, functional)


def effective_size(w) -> float:
    w = np.asarray(w, float)
    return float(w.sum() ** 2 / np.sum(w * w))


def weighted_ks(xs, wx, ys, wy=None, functional: str = "") -> KSReport:
    """KS distance between weighted empirical CDFs; p-value from the Kolmogorov law at effective sizes."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    wx = np.asarray(wx, float)
    wy = np.ones(ys.size) if wy is None else np.asarray(wy, float)
    if xs.size == 0 or ys.size == 0:
        raise ValueError("empty sample")
    if np.any(wx < 0) or np.any(wy < 0):
        raise ValueError("negative weight")
    grid = np.union1d(xs, ys)

    def cdf(v, w):
        o = np.argsort(v, kind="stable")
        c = np.cumsum(w[o]) / w.sum()
        idx = np.searchsorted(v[o], grid, side="right")
        return np.where(idx > 0, c[np.maximum(idx - 1, 0)], 0.0)

    d = float(np.max(np.abs(cdf(xs, wx) - cdf(ys, wy))))
    n1, n2 = effective_size(wx), effective_size(wy)
    en = math.sqrt(n1 * n2 / (n1 + n2))
    p = float(stats.kstwobign.sf(en * d)) if d > 0 else 1.0
    return KSReport(d, min(1.0, p), int(round(n1)), int(round(n2)), functional)


# ------------------------------------------------------------------ configs

PRESETS = ("thm42", "locality-sle6", "radial-compare", "girsanov-thm43")


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str
    n_paths: int = 2000
    dt: float = 1e-3
    capacity_target: float = 0.5      # half-plane capacity at which ensembles are compared
    seed: int = 0
    geometry: dict = field(default_factory=dict)
    functionals: tuple = ()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.n_paths < 100:
            raise ValueError("KS presets need at least 100 paths")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["functionals"] = list(self.functionals)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["functionals"] = tuple(d.get("functionals", ()))
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def param(self, key, default):
        return self.params.get(key, default)


def default_config(preset: str, **kw) -> ExperimentConfig:
    base = {
        "thm42": dict(geometry={"y": [1.0], "x": [-0.5], "xr": [0.5]},
                      functionals=("tip_re_at_cap", "probe_swallow_time"),
                      params={"xi0": 2.0, "probe": [2.5, 0.3], "eps": 0.05, "t_max": 0.3}),
        "locality-sle6": dict(dt=5e-4, functionals=("hcap_at_stop", "tip_re_at_stop"),
                              params={"center": 1.0, "radius": 0.5, "kappa": 6.0, "control_kappa": 2.0,
                                      "eta": 0.25, "grade_ratio": 0.01, "dt_min": 1e-6}),
        "radial-compare": dict(n_paths=500, functionals=("tip_arg_at_stop", "max_angle_dev"),
                               params={"kappa": 6.0, "r_stop": 0.5, "d_one": 0.25, "T": 2.0}),
        "girsanov-thm43": dict(n_paths=1000, geometry={"y": [1.0], "x": [-0.5], "xr": [0.5]},
                               functionals=("tip_re_at_cap",),
                               params={"xi0": 2.0, "alpha": 2.0, "b": "neg-bmd", "eps": 0.05, "t_max": 0.3,
                                       "phi2_every": 10}),
    }[preset]
    base.update(kw)
    return ExperimentConfig(preset=preset, **base)


@dataclass
class Result:
    """Outcome of one preset: KS reports, discard counts and the raw functional samples."""

    config: ExperimentConfig
    ks: list
    controls: list
    info: dict
    samples: dict              # name -> 1-d array
    traces: dict               # name -> (t, driver, tips)

    def summary(self) -> dict:
        return {"preset": self.config.preset, "config": self.config.to_dict(),
                "ks": [r.to_dict() for r in self.ks], "controls": [r.to_dict() for r in self.controls],
                "info": self.info}


# ------------------------------------------------------------------ geometry helpers

def _dist_to_slits(z, s: SlitVector) -> np.ndarray:
    z = np.asarray(z, complex)
    d = np.full(z.shape, np.inf)
    for j in range(s.n):
        dx = np.maximum(np.maximum(s.x[j] - z.real, z.real - s.xr[j]), 0.0)
        d = np.minimum(d, np.hypot(dx, z.imag - s.y[j]))
    return d


def _first_true(mask: np.ndarray, default: int) -> np.ndarray:
    """Column index of the first True per row (default when none)."""
    return np.where(mask.any(axis=1), mask.argmax(axis=1), default)


def real_crossing_steps(u: np.ndarray, dt, x: float, start: np.ndarray) -> np.ndarray:
    """Step (1-based) at which the real point x is swallowed, K + 1 when never.

    g_t(x) stays real; the point is swallowed when the frozen driver of a step
    reaches its image, i.e. the side of x relative to the driver changes.
    dt is a scalar or per-step lengths (P, K); NaN drivers end the flow.
    Near-touches between steps are missed, a fraction decaying only like
    dt^(1/2 - 2/kappa).
    """
    P, K = u.shape
    h = np.broadcast_to(np.asarray(dt, float), (P, K))
    g = np.full(P, float(x))
    side = np.sign(x - start)
    out = np.full(P, K + 1)
    alive = np.ones(P, bool)
    for k in range(K):
        alive &= np.isfinite(u[:, k])
        d = g - u[:, k]
        cross = alive & (np.sign(d) != side)
        out[cross] = k + 1
        alive &= ~cross
        g = np.where(alive, u[:, k] + side * np.sqrt(d * d + 4 * h[:, k]), g)
        if not alive.any():
            break
    return out


# ------------------------------------------------------------------ Theorem 4.2

def _skle_functionals(ens, s: SlitVector, target: float, eps: float):
    """tip_re at the capacity target, probe swallow time on the check clock, discard mask."""
    P, K = ens.n_paths, ens.K
    dt = ens.config.dt
    k_t = ens.target_index                     # node index, -1 when never reached
    ok = k_t > 0
    col = np.clip(k_t - 1, 0, K - 1)
    tip = ens.tips[np.arange(P), col]
    # discard on approach to the slits before the target
    node = np.arange(1, K + 1)[None, :]
    dist = np.where(node <= k_t[:, None], _dist_to_slits(ens.tips, s), np.inf)
    near = np.nanmin(np.where(np.isfinite(dist), dist, np.inf), axis=1) < eps
    keep = ok & ~near
    a = ens.a
    t = np.arange(K + 1) * dt
    tau = target / 2
    sw = ens.probe_swallow[:, 0]
    chk = np.array([np.interp(sw[p], t, a[p]) / 2 if np.isfinite(sw[p]) else np.inf for p in range(P)])
    return tip.real, np.minimum(chk, tau), keep, {"never_reached": int((~ok).sum()), "near_slit": int((ok & near).sum())}


def _sle_functionals(kappa, n, dt, tau, xi0, probe, s: SlitVector, eps, seed, offset):
    K = int(round(tau / dt))
    xi, _ = brownian_drivers(kappa, n, K * dt, dt, seed, start=xi0, stream_offset=offset)
    u = 0.5 * (xi[:, 1:] + xi[:, :-1])
    tips = batch_tips(u, dt)
    near = _dist_to_slits(tips, s).min(axis=1) < eps
    _, sw = batch_flow(u, xi, dt, [probe])
    return tips[:, -1].real, np.minimum(sw[:, 0], tau), ~near, tips, xi


def run_thm42(cfg: ExperimentConfig) -> Result:
    """SKLE_{sqrt6, -b_BMD} reparametrized by capacity versus chordal SLE_6."""
    s = SlitVector.from_dict(cfg.geometry)
    xi0 = float(cfg.param("xi0", 2.0))
    probe = complex(*cfg.param("probe", [2.5, 0.3]))
    eps = float(cfg.param("eps", 0.05))
    t_max = float(cfg.param("t_max", 0.3))
    tau = cfg.capacity_target / 2
    out_ks, ctl, info, samples = [], [], {}, {}

    def ensemble_a(b, offset):
        sc = SkleConfig(s, xi0, SQRT6, b, cfg.dt, t_max, probes=(probe,), capacity_target=cfg.capacity_target)
        ens = simulate(sc, cfg.n_paths, seed=cfg.seed, stream_offset=offset)
        tip, sw, keep, why = _skle_functionals(ens, s, cfg.capacity_target, eps)
        stopped = int(np.sum(ens.target_index < 0))
        if stopped > 0.2 * cfg.n_paths:
            raise GeometryError(f"{stopped} paths stopped before the capacity target; reduce the target")
        return ens, tip, sw, keep, why

    ens, tipA, swA, keepA, whyA = ensemble_a("neg-bmd", 0)
    tipB, swB, keepB, tipsB, xiB = _sle_functionals(6.0, cfg.n_paths, cfg.dt, tau, xi0, probe, s, eps,
                                                    cfg.seed, B_STREAMS)
    names = ("tip_re_at_cap", "probe_swallow_time")
    for name, a_, b_ in zip(names, (tipA, swA), (tipB, swB)):
        out_ks.append(ks_two_sample(a_[keepA], b_[keepB], name))
        samples[f"A_{name}"] = a_[keepA]
        samples[f"B_{name}"] = b_[keepB]
    info["discard_A"] = {**whyA, "fraction": float(1 - keepA.mean())}
    info["discard_B"] = {"near_slit": int((~keepB).sum()), "fraction": float(1 - keepB.mean())}
    info["b_bmd_start"] = float(ens.b_bmd[0, 0])
    info["max_kernel_order"] = int(ens.orders.max())
    if cfg.param("control", True):
        _, tipC, swC, keepC, whyC = ensemble_a("zero", C_STREAMS)
        for name, c_, b_ in zip(names, (tipC, swC), (tipB, swB)):
            ctl.append(ks_two_sample(c_[keepC], b_[keepB], f"control_b0:{name}"))
            samples[f"C_{name}"] = c_[keepC]
        info["discard_control"] = {**whyC, "fraction": float(1 - keepC.mean())}
    traces = {"A": _trace_tuple(ens.tips[0], ens.U[0], np.cumsum(ens.da[0]) / 2),
              "B": _trace_tuple(tipsB[0], 0.5 * (xiB[0, 1:] + xiB[0, :-1]), np.arange(1, tipsB.shape[1] + 1) * cfg.dt)}
    return Result(cfg, out_ks, ctl, info, samples, traces)


def _trace_tuple(tips, driver, t):
    ok = np.isfinite(tips)
    return np.asarray(t)[ok], np.asarray(driver)[ok], np.asarray(tips)[ok]


# ------------------------------------------------------------------ locality of SLE_6

def _entry_point(p, q, inside, iters: int = 40):
    """Point where the segment p -> q first meets the closed set ``inside`` (p out, q in)."""
    lo, hi = np.zeros(p.shape), np.ones(p.shape)
    d = q - p
    for _ in range(iters):
        m = 0.5 * (lo + hi)
        hit = inside(p + m * d)
        hi = np.where(hit, m, hi)
        lo = np.where(hit, lo, m)
    return p + hi * d


def _locality_pair(kappa, cfg, A: AnalyticHull, a_max, offset):
    """Stopped samples of both ensembles.

    Both stop when the trace, pulled back to the picture of ensemble A, enters
    the half-plane D = {Re z >= c - r - eta}.  The hull can only enclose part
    of D through the trace entering it, so the rule is a function of the
    pulled-back trace and locality applies to it.  D keeps a margin from A,
    where phi_A' vanishes at the feet, and its boundary meets the real line at
    a right angle (a thin region along the axis is entered far too late by a
    discrete trace).  The entry point is located on the last step segment in
    the pulled-back picture, so neither ensemble carries the overshoot of a
    node-based rule.  Many paths stop after a small capacity, so the time grid
    is graded: dt_k = clip(grade_ratio * t_k, dt_min, dt).
    """
    dt = cfg.dt
    ratio = float(cfg.param("grade_ratio", 0.0))
    if ratio > 0:
        dt_min = float(cfg.param("dt_min", 1e-6))
        hA = graded_steps(1.5 * a_max, dt, ratio, dt_min)
        hB = graded_steps(0.5 * a_max, dt, ratio, dt_min)
    else:
        K = int(round(a_max / 2 / dt))
        hA, hB = np.full(3 * K, dt), np.full(K, dt)
    c, r = A.center, A.size
    R = r + float(cfg.param("eta", 0.25))
    P = cfg.n_paths
    rows = np.arange(P)
    x0 = float(A.map(0.0).real)

    xd = c - R

    def in_d(z):
        return z.real >= xd

    # ensemble A: SLE from 0 mapped by phi_A; mapped hulls have smaller capacity,
    # so A runs on a longer raw horizon
    KA, K = hA.size, hB.size
    node = np.arange(1, KA + 1)[None, :]
    xi, _ = brownian_drivers(kappa, P, 0.0, hA, cfg.seed, start=0.0, stream_offset=offset)
    u = 0.5 * (xi[:, 1:] + xi[:, :-1])
    tips, stop = batch_tips_until(u, hA, lambda z, nodes, paths: in_d(z))
    hitA = stop <= KA
    j = np.minimum(stop, KA) - 1
    prev = np.where(j > 0, tips[rows, np.maximum(j - 1, 0)], 0.0)
    tips[hitA, j[hitA]] = _entry_point(prev[hitA], tips[hitA, j[hitA]], in_d)
    last = np.where(hitA, stop, KA)               # nodes used, the entry point included
    ok = node <= last[:, None]
    mapped = np.where(ok, A.map(np.where(ok & np.isfinite(tips), tips, 1j)), np.nan)
    U, da = zipper(mapped, x0)
    da = np.where(ok, da, 0.0)
    a = np.cumsum(da, axis=1)
    reach = a >= a_max
    k_cap = _first_true(reach, KA)                # column where the mapped capacity reaches a_max
    end = np.minimum(last, k_cap + 1)             # node (1-based) at min(sigma, tau)
    unresolved = ~hitA & ~reach.any(axis=1)
    capA = np.minimum(a[rows, last - 1], a_max)
    tipA = mapped[rows, end - 1]
    # ensemble B: SLE from phi_A(0) with the same rule on phi_A^{-1} of its trace
    xiB, _ = brownian_drivers(kappa, P, 0.0, hB, cfg.seed, start=x0, stream_offset=offset + B_STREAMS)
    uB = 0.5 * (xiB[:, 1:] + xiB[:, :-1])
    tB = np.concatenate([[0.0], np.cumsum(hB)])
    tipsB, stopB = batch_tips_until(uB, hB, lambda z, nodes, paths: in_d(A.inverse(z)))
    hitB = stopB <= K
    jB = np.minimum(stopB, K) - 1
    qB = tipsB[rows, jB]
    pB = np.where(jB > 0, tipsB[rows, np.maximum(jB - 1, 0)], x0)
    zB = qB.copy()
    zB[hitB] = A.map(_entry_point(A.inverse(pB[hitB]), A.inverse(qB[hitB]), in_d))
    # capacity of the hull grown up to the entry point: full steps plus the last partial one
    g = zB.copy()
    for k in range(K):
        act = hitB & (k < jB)
        if not act.any():
            break
        g[act] = slit_map(g[act], uB[act, k], hB[k])
    capB = np.where(hitB, 2 * tB[jB] + 0.5 * np.maximum(g.imag, 0.0) ** 2, a_max)
    capB = np.minimum(capB, a_max)
    tipB = np.where(hitB, zB, tipsB[:, K - 1])
    if hitB.any():
        tipsB[hitB, jB[hitB]] = zB[hitB]
    info = {"stopped_A": int(np.sum(hitA & (last < k_cap + 1))), "stopped_B": int(hitB.sum()),
            "unresolved_A": int(unresolved.sum())}
    keep = ~unresolved
    return (capA[keep], np.real(tipA)[keep]), (capB, np.real(tipB)), info, (mapped[0], U[0], a[0] / 2), (tipsB[0], uB[0], tB[1:])


def run_locality_sle6(cfg: ExperimentConfig) -> Result:
    """Chordal SLE_6 mapped by the canonical map of a half-disk versus SLE_6 from the image point."""
    A = AnalyticHull.half_disk(float(cfg.param("center", 1.0)), float(cfg.param("radius", 0.5)))
    if A.center - A.size <= 0:
        raise GeometryError("the half-disk must lie to the right of the start point")
    a_max = cfg.capacity_target
    names = ("hcap_at_stop", "tip_re_at_stop")
    kappa = float(cfg.param("kappa", 6.0))
    fa, fb, info, trA, trB = _locality_pair(kappa, cfg, A, a_max, 0)
    ks = [ks_two_sample(x, y, n) for x, y, n in zip(fa, fb, names)]
    samples = {f"A_{n}": x for n, x in zip(names, fa)} | {f"B_{n}": y for n, y in zip(names, fb)}
    ctl = []
    ck = cfg.param("control_kappa", 2.0)
    if ck:
        ca, cb, cinfo, _, _ = _locality_pair(float(ck), cfg, A, a_max, C_STREAMS)
        ctl = [ks_two_sample(x, y, f"control_kappa{ck:g}:{n}") for x, y, n in zip(ca, cb, names)]
        info["control"] = cinfo
        samples |= {f"CA_{n}": x for n, x in zip(names, ca)} | {f"CB_{n}": y for n, y in zip(names, cb)}
    traces = {"A": _trace_tuple(trA[0], trA[1], trA[2]),
              "B": _trace_tuple(*trB)}
    return Result(cfg, ks, ctl, info, samples, traces)


# ------------------------------------------------------------------ radial versus chordal

def run_radial_compare(cfg: ExperimentConfig) -> Result:
    """Radial SLE from -1 versus the psi^{-1} image of chordal SLE from 0, stopped geometrically."""
    kappa = float(cfg.param("kappa", 6.0))
    r_stop = float(cfg.param("r_stop", 0.5))
    d_one = float(cfg.param("d_one", 0.25))
    T = float(cfg.param("T", 2.0))
    dt = cfg.dt
    P = cfg.n_paths

    def stop_disk(w, nodes, paths):
        return (np.abs(w) < r_stop) | (np.abs(w - 1) < d_one)

    ang, _ = brownian_drivers(kappa, P, T, dt, cfg.seed, start=math.pi)
    rt, rstop = radial_tips_until(ang, dt, stop_disk)
    xi, _ = brownian_drivers(kappa, P, T, dt, cfg.seed, stream_offset=B_STREAMS)
    u = 0.5 * (xi[:, 1:] + xi[:, :-1])
    ct, cstop = batch_tips_until(u, dt, lambda z, n, p: stop_disk(psi_inverse(z), n, p))
    cw = psi_inverse(np.where(np.isfinite(ct), ct, 0j))
    cw = np.where(np.isfinite(ct), cw, np.nan)
    K = ang.shape[1] - 1

    def functionals(w, stop):
        ok = stop <= K
        idx = np.clip(stop - 1, 0, K - 1)
        end = w[np.arange(P), idx]
        dev = np.nanmax(np.abs(np.angle(-w)), axis=1)        # angular distance from -1
        return np.angle(-end)[ok], dev[ok], int((~ok).sum())

    ra, rd, rn = functionals(rt, rstop)
    ca, cd, cn = functionals(cw, cstop)
    names = ("tip_arg_at_stop", "max_angle_dev")
    ks = [ks_two_sample(ra, ca, names[0]), ks_two_sample(rd, cd, names[1])]
    samples = {"A_tip_arg_at_stop": ra, "B_tip_arg_at_stop": ca, "A_max_angle_dev": rd, "B_max_angle_dev": cd}
    info = {"unstopped_radial": rn, "unstopped_chordal": cn}
    k0, k1 = int(min(rstop[0], K)), int(min(cstop[0], K))
    traces = {"A": (np.arange(1, k0 + 1) * dt, ang[0, 1:k0 + 1], rt[0, :k0]),
              "B": (np.arange(1, k1 + 1) * dt, u[0, :k1], cw[0, :k1])}
    return Result(cfg, ks, [], info, samples, traces)


# ------------------------------------------------------------------ Theorem 4.3

def run_girsanov_thm43(cfg: ExperimentConfig) -> Result:
    """Weighted SKLE_{alpha, b} tips at the capacity target versus chordal SLE_{alpha^2}."""
    s = SlitVector.from_dict(cfg.geometry) if cfg.geometry else SlitVector.empty()
    xi0 = float(cfg.param("xi0", 2.0))
    alpha = float(cfg.param("alpha", 2.0))
    b = cfg.param("b", "neg-bmd")
    eps = float(cfg.param("eps", 0.05))
    t_max = float(cfg.param("t_max", 0.3))
    sc = SkleConfig(s, xi0, alpha, b, cfg.dt, t_max, capacity_target=cfg.capacity_target,
                    phi2_every=int(cfg.param("phi2_every", 10)))
    ens = simulate(sc, cfg.n_paths, seed=cfg.seed)
    P, K = ens.n_paths, ens.K
    k_t = ens.target_index
    keep = k_t > 0
    if s.n:
        node = np.arange(1, K + 1)[None, :]
        dist = np.where(node <= k_t[:, None], _dist_to_slits(ens.tips, s), np.inf)
        keep &= np.min(dist, axis=1) >= eps
    col = np.clip(k_t - 1, 0, K - 1)
    tip = ens.tips[np.arange(P), col].real
    w = np.ones(P)
    for p in np.flatnonzero(keep):
        lw = girsanov_log_weights(ens.run(p))
        w[p] = math.exp(lw[k_t[p]])
    if not np.all(np.isfinite(w[keep])):
        raise GeometryError("non-finite Girsanov weight")
    n_eff = effective_size(w[keep])
    if n_eff < 50:
        raise GeometryError(f"effective sample size {n_eff:.1f} below 50")
    tau = cfg.capacity_target / 2
    xi, _ = brownian_drivers(alpha ** 2, P, tau, cfg.dt, cfg.seed, start=xi0, stream_offset=B_STREAMS)
    tipsB = batch_tips(0.5 * (xi[:, 1:] + xi[:, :-1]), cfg.dt)
    keepB = _dist_to_slits(tipsB, s).min(axis=1) >= eps if s.n else np.ones(P, bool)
    ks = [weighted_ks(tip[keep], w[keep], tipsB[keepB, -1].real, functional="tip_re_at_cap")]
    wm = w[keep]
    info = {"n_eff": n_eff, "mean_weight": float(wm.mean()),
            "mean_weight_se": float(wm.std(ddof=1) / math.sqrt(wm.size)),
            "discard_fraction": float(1 - keep.mean())}
    samples = {"A_tip_re_at_cap": tip[keep], "A_weight": wm, "B_tip_re_at_cap": tipsB[keepB, -1].real}
    traces = {"A": _trace_tuple(ens.tips[0], ens.U[0], np.cumsum(ens.da[0]) / 2)}
    return Result(cfg, ks, [], info, samples, traces)


RUNNERS = {"thm42": run_thm42, "locality-sle6": run_locality_sle6,
           "radial-compare": run_radial_compare, "girsanov-thm43": run_girsanov_thm43}


def run_preset(cfg: ExperimentConfig) -> Result:
    return RUNNERS[cfg.preset](cfg)
