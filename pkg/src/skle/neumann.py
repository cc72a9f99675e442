"""Monte Carlo slit values of Im g through the excursion decomposition.

From each slit the darned process leaves along the exit law nu_i on a contour
around the slit and then moves as absorbing Brownian motion until it meets
the floor, the hull F or a slit.  With

    R_i   = mass of nu_i-started walkers returning to slit i,
    p_ij  = mass hitting slit j != i first,
    w_i   = int v d nu_i,  v = Im z - E[Im Z at the first hit of F u K],

the slit values solve v*_i (1 - R_i) = w_i + sum_j p_ij v*_j, i.e.
v* = M (w / (1 - R)) with Q_ij = p_ij / (1 - R_i) and M = sum_n Q^n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from skle.abm_mc import (ESCAPED, FLOOR, HULL, SLIT, STALLED, EstimateCI, ObstacleSet, Rect,
                         default_contour, harmonic_measure_eta, walk)
from skle.geometry import GeometryError, SlitVector
from skle.rng import as_generator

NEUMANN_TOL = 1e-12


class NeumannError(RuntimeError):
    pass


def neumann_sum(Q: np.ndarray, delta0: float, tol: float = NEUMANN_TOL, max_terms: int = 100_000):
    """sum_n Q^n truncated where the tail bound (1 - delta0)^(n+1) / delta0 drops below tol."""
    Q = np.asarray(Q, float)
    N = Q.shape[0]
    if N == 0:
        return np.zeros((0, 0)), 0
    if not 0 < delta0 <= 1:
        raise NeumannError(f"delta0 = {delta0} outside (0, 1]")
    if delta0 == 1:
        n = 0
    else:
        n = int(math.ceil(math.log(tol * delta0) / math.log(1 - delta0))) - 1
    n = max(0, min(n, max_terms))
    M = np.eye(N)
    P = np.eye(N)
    for _ in range(n):
        P = P @ Q
        M = M + P
        if np.abs(P).max() < tol * 1e-3:
            break
    return M, n


@dataclass(frozen=True)
class NeumannSystem:
    R_star: np.ndarray
    Q_star: np.ndarray
    M: np.ndarray
    boundary_integrals: np.ndarray
    delta0: float
    lam: np.ndarray
    v_star: np.ndarray
    v_star_se: np.ndarray
    n_walkers: int
    n_terms: int

    def check_bound(self) -> bool:
        """M 1 <= 1/delta0 componentwise."""
        if self.M.size == 0:
            return True
        return bool(np.all(self.M.sum(axis=1) <= 1.0 / self.delta0 * (1 + 1e-12)))

    def estimates(self) -> list[EstimateCI]:
        return [EstimateCI(float(v), float(e), self.n_walkers) for v, e in zip(self.v_star, self.v_star_se)]

    def to_dict(self) -> dict:
        return {"R_star": self.R_star.tolist(), "Q_star": self.Q_star.tolist(), "M": self.M.tolist(),
                "boundary_integrals": self.boundary_integrals.tolist(), "delta0": self.delta0,
                "v_star": self.v_star.tolist(), "v_star_se": self.v_star_se.tolist(), "n": self.n_walkers}


def _combine(R, P, w, delta):
    N = len(R)
    if np.any(R >= 1):
        raise NeumannError("return probability 1: slit isolated from the floor")
    Q = P / (1 - R)[:, None]
    np.fill_diagonal(Q, 0.0)
    lam = Q.sum(axis=1)
    return Q, lam


def neumann_series(s: SlitVector, F: ObstacleSet | None = None, contours: list[Rect] | None = None,
                   n: int = 200_000, rng=None, n_nu: int | None = None, method: str = "reversed",
                   batches: int = 20, shell: float | None = None) -> NeumannSystem:
    """Estimate R*, Q*, the boundary integrals and v*(c_j*) for D(s) minus F."""
    N = s.n
    if N == 0:
        z = np.zeros(0)
        return NeumannSystem(z, np.zeros((0, 0)), np.zeros((0, 0)), z, 1.0, z, z, z, 0, 0)
    gen = as_generator(rng)
    F = F or ObstacleSet()
    obs = F.with_slits(s)
    contours = contours or [default_contour(s, i, F=F) for i in range(N)]
    n_nu = n_nu or 10 * n
    per = max(1, n // (N * batches))
    # each batch draws its own exit-law sample so the standard errors include it
    Rb = np.zeros((batches, N))
    Pb = np.zeros((batches, N, N))
    wb = np.zeros((batches, N))
    db = np.zeros((batches, N))
    for b in range(batches):
        for i in range(N):
            nu = harmonic_measure_eta(i, s, F, contours[i], max(1, n_nu // (N * batches)), gen, method=method)
            pick = gen.choice(nu.points.size, size=per, p=nu.weights / nu.weights.sum())
            z0 = nu.points[pick]
            r = walk(z0, obs, gen, shell=shell)
            hit = (r.kind == SLIT) | (r.kind == HULL)
            v = z0.imag - np.where(hit, r.location.imag, 0.0)
            for j in range(N):
                Pb[b, i, j] = np.mean((r.kind == SLIT) & (r.index == j))
            Rb[b, i] = Pb[b, i, i]
            wb[b, i] = v.mean()
            db[b, i] = np.mean((r.kind == FLOOR) | (r.kind == ESCAPED) | (r.kind == STALLED))
    R, P, w, dl = Rb.mean(0), Pb.mean(0), wb.mean(0), db.mean(0)
    Q, lam = _combine(R, P, w, dl)
    delta0 = float(dl.min())
    if np.any(lam >= 1) or delta0 <= 0:
        raise NeumannError(f"row sums {lam} not below one (delta0={delta0})")
    M, nt = neumann_sum(Q, delta0)
    vstar = M @ (w / (1 - R))
    # batch-means standard error of the nonlinear estimate
    vb = np.empty((batches, N))
    for b in range(batches):
        Qb, _ = _combine(Rb[b], Pb[b], wb[b], db[b])
        vb[b] = np.linalg.solve(np.eye(N) - Qb, wb[b] / (1 - Rb[b]))
    se = vb.std(axis=0, ddof=1) / math.sqrt(batches)
    return NeumannSystem(R, Q, M, w, delta0, lam, vstar, se, per * N * batches, nt)


def v_star_at_slits(s: SlitVector, F: ObstacleSet | None = None, backend: str = "grid", n: int = 200_000,
                    rng=None, spec=None, levels: int = 3):
    """Slit values of the BMD extension of Im g; returns a list of EstimateCI."""
    if s.n == 0:
        return []
    if backend == "grid":
        from skle.fdgrid import GridSpec, v_star_grid
        return v_star_grid(s, F, spec or GridSpec(), levels).as_estimates()
    if backend == "mc":
        return neumann_series(s, F, n=n, rng=rng).estimates()
    raise ValueError(f"unknown backend {backend!r}")


def decomposition_check(s: SlitVector, F: ObstacleSet, z, v_star: np.ndarray, n: int = 100_000, rng=None):
    """Right side of the decomposition v*(z) = v(z) + sum_j P_z(first hit C_j) v*_j by Monte Carlo."""
    z = complex(z)
    if z.imag <= 0:
        raise GeometryError("z must lie in H")
    r = walk(np.full(n, z), F.with_slits(s), rng)
    slit = r.kind == SLIT
    hit = slit | (r.kind == HULL)
    vals = z.imag - np.where(hit, r.location.imag, 0.0)
    vs = np.asarray(v_star, float)
    vals = vals + np.where(slit, vs[np.maximum(r.index, 0)], 0.0)
    return EstimateCI.from_samples(vals)


def cap_d_mc(s: SlitVector, F: ObstacleSet, v_star: np.ndarray, R: float | None = None, n: int = 200_000,
             rng=None, m: int = 16) -> EstimateCI:
    """Capacity of F relative to D: (2R/pi) int E[Im Z_sigma 1_F + (y_j - v*_j) 1_{C_j}] sin(theta) d theta."""
    gen = as_generator(rng)
    rad = max(F.rad(), s.scale() if s.n else 0.0)
    R = 2.0 * rad if R is None else R
    x, wq = np.polynomial.legendre.leggauss(m)
    th = 0.5 * np.pi * (x + 1)
    wq = 0.5 * np.pi * wq
    per = max(2, n // m)
    starts = np.repeat(R * np.exp(1j * th), per)
    r = walk(starts, F.with_slits(s), gen)
    vs = np.asarray(v_star, float)
    slit = r.kind == SLIT
    val = np.where(r.kind == HULL, r.location.imag, 0.0)
    if s.n:
        val = val + np.where(slit, s.y[np.maximum(r.index, 0)] - vs[np.maximum(r.index, 0)], 0.0)
    h = val.reshape(m, per)
    c = (2 * R / np.pi) * wq * np.sin(th)
    return EstimateCI(float(c @ h.mean(1)), float(math.sqrt(np.sum(c * c * h.var(1, ddof=1) / per))), per * m)


def im_psi_mc(s: SlitVector, z, const, xi: float = 0.0, n: int = 100_000, rng=None) -> list[EstimateCI]:
    """Im Psi_s(z, xi) by walk-on-spheres, given the slit constants of the kernel.

    Im Psi = Im Psi^H + E_z[(c_j - Im Psi^H(Z)) 1{first hit on C_j}]; the
    floor carries zero data for the correction.
    """
    from skle.chordal import complex_poisson_H

    gen = as_generator(rng)
    c = np.asarray(const, float)
    out = []
    for zz in np.atleast_1d(np.asarray(z, complex)):
        base = float(complex_poisson_H(zz, xi).imag)
        if s.n == 0:
            out.append(EstimateCI(base, 0.0, 0))
            continue
        r = walk(np.full(n, zz), ObstacleSet(slits=s), gen)
        slit = r.kind == SLIT
        j = np.maximum(r.index, 0)
        vals = np.zeros(n)
        vals[slit] = c[j[slit]] - complex_poisson_H(r.location[slit], xi).imag
        est = EstimateCI.from_samples(vals)
        out.append(EstimateCI(base + est.value, est.std_error, n))
    return out
