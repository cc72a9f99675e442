"""Villat kernel, annulus Loewner flows, radial SLE and the disk/half-plane transform.

Annulus equations, with q = e^{s-P} and S_{P-s}(z, lam) = K_q(z / lam):

    d log g / ds = S_{P-s}(g, lam) - i Im S_{P-s}(e^{s-P}, lam)      (normalized)
    d log g / ds = S_{P-s}(g, lam)                                    (rotated)

The two are related by g -> e^{i theta} g, lam -> e^{i theta} lam with
theta' = Im S_{P-s}(e^{s-P}, lam).

K_q = (1 + z)/(1 - z) + R_q(z) where the n = 0 term is the radial Loewner
kernel and R_q, the paired n, -n terms, is smooth near the unit circle.
Traces use the exact radial step for the first part and an explicit step for R_q.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from skle.chordal import TraceSample
from skle.geometry import GeometryError
from skle.rng import as_generator

VILLAT_EPS = 1e-12
POLE_TOL = 1e-12


def villat_terms(q: float, eps: float = VILLAT_EPS) -> int:
    """Number of n, -n pairs so that the tail is below eps."""
    if not 0 < q < 1:
        raise GeometryError("modulus must lie in (0, 1)")
    return max(1, int(math.ceil(math.log(eps * (1 - q * q)) / (2 * math.log(q)))))


def villat_remainder(q: float, z, n_terms: int | None = None) -> np.ndarray:
    """R_q(z) = K_q(z) - (1+z)/(1-z): sum over n >= 1 of the paired terms.

    Each pair is 2a (z/(1 - a z) - 1/(z - a)) with a = q^{2n}; the two
    members tend to +1 and -1 separately.
    """
    z = np.asarray(z, complex)
    N = villat_terms(q) if n_terms is None else n_terms
    # smallest terms first for a stable sum
    a = q ** (2 * np.arange(N, 0, -1))
    zz = z[..., None]
    d1, d2 = 1 - a * zz, zz - a
    if np.any(np.abs(d1) < POLE_TOL) or np.any(np.abs(d2) < POLE_TOL):
        raise GeometryError("point at a pole of the Villat kernel")
    return np.sum(2 * a * (zz / d1 - 1 / d2), axis=-1)


def villat_kernel(q: float, z, zeta=1.0, n_terms: int | None = None) -> np.ndarray:
    """K_q(z / zeta) by symmetric partial sums (n = -N..N)."""
    w = np.asarray(z, complex) / zeta
    if np.any(np.abs(1 - w) < POLE_TOL):
        raise GeometryError("point at a pole of the Villat kernel")
    return (1 + w) / (1 - w) + villat_remainder(q, w, n_terms)


def villat_partial_sum(q: float, z, n_lo: int, n_hi: int) -> np.ndarray:
    """Plain sum over n_lo <= n <= n_hi of (1 + q^{2n} z)/(1 - q^{2n} z) (no pairing)."""
    z = np.asarray(z, complex)
    out = np.zeros(z.shape, complex)
    for n in range(n_lo, n_hi + 1):
        a = q ** (2 * n)
        out += (1 + a * z) / (1 - a * z)
    return out


# ------------------------------------------------------------------ annulus flows

@dataclass(frozen=True)
class AnnulusState:
    Q: float
    s: float
    lam: complex

    @property
    def P(self) -> float:
        return -math.log(self.Q)

    @property
    def q(self) -> float:
        return self.Q * math.exp(self.s)

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise GeometryError("modulus exhausted")
        if abs(abs(self.lam) - 1) > 1e-9:
            raise GeometryError("driver must lie on the unit circle")


def _rhs(Q, s, g, lam, normalized: bool):
    q = Q * math.exp(s)
    f = villat_kernel(q, g, lam)
    if normalized:
        f = f - 1j * villat_kernel(q, q, lam).imag
    return f


def _rk2(Q, s, z, lam, ds, normalized):
    k1 = _rhs(Q, s, z, lam, normalized)
    zh = z * np.exp(0.5 * ds * k1)
    k2 = _rhs(Q, s + 0.5 * ds, zh, lam, normalized)
    return z * np.exp(ds * k2)


def annulus_kl_step(state: AnnulusState, z, ds: float, normalized: bool = True) -> np.ndarray:
    """One explicit midpoint (RK2) step of the log-derivative equation, driver frozen."""
    z = np.asarray(z, complex)
    if ds == 0:
        return z.copy()
    return _rk2(state.Q, state.s, z, state.lam, ds, normalized)


def _angle_at(angles, k, frac):
    return angles[:, k] + frac * (angles[:, k + 1] - angles[:, k])


def _substeps(angles, substeps, max_turn):
    """Substeps per step: at least ``substeps``, and enough that the driver turns by at most max_turn."""
    jump = np.max(np.abs(np.diff(angles, axis=1)), axis=0)
    return np.maximum(substeps, np.ceil(jump / max_turn)).astype(int)


def _rk4_nodes(rhs, y, ds, subs):
    """Classical RK4 over len(subs) steps of ds, step k split into subs[k]; rhs(k, frac, y), frac in [0, 1]."""
    out = [y]
    for k, m in enumerate(subs):
        h = 1.0 / m
        for j in range(m):
            f0 = j * h
            k1 = rhs(k, f0, y)
            k2 = rhs(k, f0 + h / 2, [a + 0.5 * h * ds * b for a, b in zip(y, k1)])
            k3 = rhs(k, f0 + h / 2, [a + 0.5 * h * ds * b for a, b in zip(y, k2)])
            k4 = rhs(k, f0 + h, [a + h * ds * b for a, b in zip(y, k3)])
            y = [a + h * ds * (b1 + 2 * b2 + 2 * b3 + b4) / 6 for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
        out.append(y)
    return out


def annulus_flow(Q: float, angles, ds: float, z, normalized: bool = True, substeps: int = 4,
                 max_turn: float = 0.01) -> np.ndarray:
    """g_s(z) at every node for drivers lam = e^{i angle}, the angle linear between nodes.

    angles is (K+1,) or (D, K+1); returns (K+1, Q) or (D, K+1, Q).  RK4 in g, with
    each step split so the driver turns by at most max_turn per substep.
    """
    angles = np.asarray(angles, float)
    single = angles.ndim == 1
    angles = np.atleast_2d(angles)
    z = np.atleast_1d(np.asarray(z, complex))
    D, K1 = angles.shape
    if not 0 < Q * math.exp((K1 - 1) * ds) < 1:
        raise GeometryError("modulus exhausted before the horizon")

    def rhs(k, frac, y):
        lam = np.exp(1j * _angle_at(angles, k, frac))[:, None]
        return [y[0] * _rhs(Q, (k + frac) * ds, y[0], lam, normalized)]

    g0 = np.broadcast_to(z, (D, z.size)).astype(complex)
    out = np.stack([y[0] for y in _rk4_nodes(rhs, [g0], ds, _substeps(angles, substeps, max_turn))], axis=1)
    return out[0] if single else out


def _theta_rate(Q, s, lam):
    q = Q * math.exp(s)
    return villat_kernel(q, q, lam).imag


def rotation_angle(Q: float, angles, ds: float, substeps: int = 4, max_turn: float = 0.01) -> np.ndarray:
    """theta(s) = int_0^s Im S_{P-r}(e^{r-P}, lam(r)) dr on the nodes (same quadrature as the flows)."""
    angles = np.asarray(angles, float)
    single = angles.ndim == 1
    angles = np.atleast_2d(angles)

    def rhs(k, frac, y):
        return [_theta_rate(Q, (k + frac) * ds, np.exp(1j * _angle_at(angles, k, frac)))]

    th = np.stack([y[0] for y in _rk4_nodes(rhs, [np.zeros(angles.shape[0])], ds,
                                            _substeps(angles, substeps, max_turn))], axis=1)
    return th[0] if single else th


def rotated_flow(Q: float, angles, ds: float, z, substeps: int = 4, max_turn: float = 0.01):
    """Rotated equation driven by e^{i theta} lam, with theta integrated jointly; returns (g, theta)."""
    angles = np.atleast_2d(np.asarray(angles, float))
    z = np.atleast_1d(np.asarray(z, complex))
    D, K1 = angles.shape

    def rhs(k, frac, y):
        g, th = y
        lam = np.exp(1j * _angle_at(angles, k, frac))
        s = (k + frac) * ds
        mu = (np.exp(1j * th) * lam)[:, None]
        return [g * _rhs(Q, s, g, mu, False), _theta_rate(Q, s, lam)]

    g0 = np.broadcast_to(z, (D, z.size)).astype(complex)
    ys = _rk4_nodes(rhs, [g0, np.zeros(D)], ds, _substeps(angles, substeps, max_turn))
    return np.stack([y[0] for y in ys], axis=1), np.stack([y[1] for y in ys], axis=1)


def rotation_equivalence(Q: float, angles, ds: float, z, substeps: int = 4,
                         max_turn: float = 0.01) -> float:
    """Max |e^{i theta} g^norm_s(z) - g^rot_s(z)| where g^rot is driven by e^{i theta} lam."""
    angles = np.atleast_2d(np.asarray(angles, float))
    g1 = annulus_flow(Q, angles, ds, z, True, substeps, max_turn)
    g2, th = rotated_flow(Q, angles, ds, z, substeps, max_turn)
    return float(np.max(np.abs(np.exp(1j * th)[..., None] * g1 - g2)))


# ------------------------------------------------------------------ radial steps

def koebe(w):
    w = np.asarray(w, complex)
    return w / (1 - w) ** 2


def koebe_inverse(c):
    """Root of w / (1 - w)^2 = c inside the closed unit disk."""
    c = np.asarray(c, complex)
    small = np.abs(c) < 1e-300
    cs = np.where(small, 1.0, c)
    # roots of c w^2 - (2c + 1) w + c are reciprocal; take the small one without cancellation
    r = np.sqrt(4 * cs + 1)
    b = 2 * cs + 1
    r = np.where(np.abs(b + r) >= np.abs(b - r), r, -r)
    w = 2 * cs / (b + r)
    return np.where(small, 0.0, w)


def radial_step(z, lam, dt: float):
    """Exact radial Loewner map for a frozen driver: d log g/dt = (lam + g)/(lam - g) over dt.

    With w = -z/lam the flow reads koebe(w_t) = e^t koebe(w).
    """
    w = -np.asarray(z, complex) / lam
    return -lam * koebe_inverse(math.exp(dt) * koebe(w))


def radial_step_inverse(z, lam, dt: float):
    w = -np.asarray(z, complex) / lam
    return -lam * koebe_inverse(math.exp(-dt) * koebe(w))


def radial_tips(angles: np.ndarray, dt: float, upto: int | None = None) -> np.ndarray:
    """Radial Loewner tips (P, K) for drivers e^{i angle} given at nodes (P, K+1)."""
    angles = np.atleast_2d(angles)
    lam = np.exp(0.5j * (angles[:, 1:] + angles[:, :-1]))
    K = lam.shape[1] if upto is None else int(upto)
    z = lam[:, :K].copy()
    for m in range(K, 0, -1):
        z[:, m - 1:] = radial_step_inverse(z[:, m - 1:], lam[:, m - 1:m], dt)
    return z


def radial_tips_until(angles: np.ndarray, dt: float, stop_fn, block: int = 50):
    """Block-wise radial tips abandoning stopped paths (same contract as the chordal version)."""
    angles = np.atleast_2d(angles)
    lam = np.exp(0.5j * (angles[:, 1:] + angles[:, :-1]))
    P, K = lam.shape
    out = np.full((P, K), np.nan + 0j)
    stop = np.full(P, K + 1)
    alive = np.arange(P)
    for k0 in range(0, K, block):
        if alive.size == 0:
            break
        k1 = min(K, k0 + block)
        z = lam[alive, k0:k1].copy()
        for m in range(k1, 0, -1):
            lo = max(m - 1 - k0, 0)
            z[:, lo:] = radial_step_inverse(z[:, lo:], lam[alive, m - 1:m], dt)
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


# ------------------------------------------------------------------ annulus SLE

def _split_step_inverse(z, Q, s, lam, ds):
    # undo the smooth part (one fixed-point pass), then the exact radial part
    q = Q * math.exp(s + 0.5 * ds)
    w = z * np.exp(-ds * villat_remainder(q, z / lam))
    w = z * np.exp(-ds * villat_remainder(q, w / lam))
    return radial_step_inverse(w, lam, ds)


def annulus_sle_trace(Q: float, kappa: float, ds: float, T: float, rng=None, angles=None) -> list[TraceSample]:
    """Annulus SLE_kappa in A_Q (rotated equation) from lam(0) = 1; tips by backward composition."""
    if not 0 < Q < 1:
        raise GeometryError("Q must lie in (0, 1)")
    P = -math.log(Q)
    if T >= P:
        raise GeometryError("horizon must be below -log Q (modulus exhaustion)")
    K = max(1, int(math.ceil(T / ds - 1e-9)))
    if angles is None:
        gen = as_generator(rng)
        angles = np.concatenate([[0.0], np.cumsum(gen.standard_normal(K) * math.sqrt(kappa * ds))])
    angles = np.asarray(angles, float)
    lam = np.exp(0.5j * (angles[1:] + angles[:-1]))
    z = lam.copy()
    # step m's own map sends the tip to lam_m; earlier steps are undone in full
    for m in range(K, 0, -1):
        z[m - 1:] = _split_step_inverse(z[m - 1:], Q, (m - 1) * ds, lam[m - 1], ds)
    out = [TraceSample(0.0, 0.0, complex(np.exp(1j * angles[0])))]
    for k in range(K):
        out.append(TraceSample((k + 1) * ds, float(angles[k + 1]), complex(z[k])))
    return out


def write_annulus_csv(samples: list[TraceSample], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "lambda_re", "lambda_im", "tip_re", "tip_im"])
        for smp in samples:
            lam = complex(math.cos(smp.driver), math.sin(smp.driver))
            w.writerow([repr(float(x)) for x in (smp.t, lam.real, lam.imag, smp.tip.real, smp.tip.imag)])


# ------------------------------------------------------------------ disk and half-plane

def psi(z):
    """Disk to half-plane: i (1 + z)/(1 - z)."""
    z = np.asarray(z, complex)
    if np.any(np.abs(1 - z) < POLE_TOL):
        raise GeometryError("z = 1 maps to infinity")
    return 1j * (1 + z) / (1 - z)


def psi_inverse(w):
    w = np.asarray(w, complex)
    if np.any(np.abs(w + 1j) < POLE_TOL):
        raise GeometryError("w = -i has no preimage")
    return (w - 1j) / (w + 1j)


def psi_transform(z, direction: str = "disk->H"):
    if direction in ("disk->H", "forward"):
        return psi(z)
    if direction in ("H->disk", "inverse"):
        return psi_inverse(z)
    raise ValueError(f"unknown direction {direction!r}")


def modified_canonical_map(A, z):
    """psi^{-1} o phi_{psi(A)} o psi for a disk hull A given by its half-plane image psi(A).

    ``A`` is an AnalyticHull in H (the image psi(A)); points of A are rejected.
    """
    w = psi(z)
    # the map extends continuously to the boundary of the hull; only interior points are rejected
    inside = A.contains(w) & ~np.isclose(np.abs(w - A.center), A.size, rtol=1e-12, atol=0) \
        if A.kind == "half_disk" else A.contains(w)
    if np.any(inside):
        raise GeometryError("point inside the hull")
    return psi_inverse(A.map(w))


def circular_slit_annulus_step(*args, **kwargs):
    raise NotImplementedError("the circularly slit annulus equation is left open")


def circular_slit_disk_step(*args, **kwargs):
    raise NotImplementedError("the circularly slit disk equation is left open")
