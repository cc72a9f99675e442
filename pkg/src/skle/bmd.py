"""BMD complex Poisson kernel of a standard slit domain.

The kernel is split as Psi_s(z, xi) = -1/(pi (z - xi)) + h(z).  The correction
h is real on the real axis, so it is written as a sum over slits and their
mirror images of Laurent series in the exterior Joukowski variable of each
segment:

    h(z) = sum_j i sum_k beta_jk (tau_j(z)^k - taubar_j(z)^k)

where tau_j maps the exterior of slit j onto the punctured unit disk and
taubar_j does the same for the mirrored slit.  There is no logarithmic term,
so the conjugate Re Psi is single valued and Im Psi has zero flux around every
slit.  The real coefficients beta and the slit constants are fixed by asking
Im Psi to be constant on every slit, collocated at Chebyshev nodes.

Everything is batched: arrays of shape (P, N) describe P configurations with
N slits each, always in the frame where the boundary point xi is 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from skle.geometry import GeometryError, SlitVector, shift_slits

TOL = 1e-13
M_MIN, M_MAX = 12, 400


def _tau(w):
    """Exterior Joukowski inverse 1/zeta for w = (z - mid)/halflength; |tau| <= 1."""
    s = np.sqrt(w - 1) * np.sqrt(w + 1)
    return 1.0 / (w + s)


def _bernstein_rho(w):
    w = np.asarray(w, complex)
    return np.abs(w + np.sqrt(w - 1) * np.sqrt(w + 1))


def required_orders(y, x, xr, xi=0.0, tol: float = TOL) -> np.ndarray:
    """Series length per configuration, from the Bernstein ellipse of the nearest singularity.

    Returns an int array of shape (P,); configurations needing more than
    M_MAX terms get M_MAX + 1.
    """
    y, x, xr = (np.atleast_2d(np.asarray(a, float)) for a in (y, x, xr))
    mid = 0.5 * (x + xr)
    r = 0.5 * (xr - x)
    rho = np.full(y.shape, np.inf)
    # poles of the half-plane kernel data at xi -+ i y
    for sgn in (1, -1):
        w = (xi - mid + sgn * 1j * y) / r
        rho = np.minimum(rho, _bernstein_rho(w))
    N = y.shape[1]
    for j in range(N):
        for l in range(N):
            for mirrored in (False, True):
                if l == j and not mirrored:
                    continue
                yy = -y[:, l] if mirrored else y[:, l]
                for e in (x[:, l], xr[:, l]):
                    w = (e - mid[:, j] + 1j * (yy - y[:, j])) / r[:, j]
                    rho[:, j] = np.minimum(rho[:, j], _bernstein_rho(w))
    rho = rho.min(axis=1) if N else np.full(y.shape[0], np.inf)
    with np.errstate(divide="ignore"):
        m = np.ceil(math.log(1 / tol) / np.log(np.where(rho > 1, rho, np.nan))) + 4
    m = np.where(np.isfinite(m), m, M_MAX + 1)
    return np.clip(m, M_MIN, M_MAX + 1).astype(int)


def choose_order(y, x, xr, xi=0.0, tol: float = TOL) -> int:
    """Common series length for a batch of configurations."""
    return int(min(required_orders(y, x, xr, xi, tol).max(), M_MAX))


@dataclass
class SlitKernel:
    """Solved correction for a batch of configurations (xi = 0 frame)."""

    y: np.ndarray      # (P, N)
    x: np.ndarray
    xr: np.ndarray
    beta: np.ndarray   # (P, N, M)
    const: np.ndarray  # (P, N) value of Im Psi on each slit

    @property
    def mid(self):
        return 0.5 * (self.x + self.xr) + 1j * self.y

    @property
    def half(self):
        return 0.5 * (self.xr - self.x)

    @property
    def order(self) -> int:
        return self.beta.shape[2]

    @property
    def n_slits(self) -> int:
        return self.y.shape[1]

    def take(self, idx) -> "SlitKernel":
        """Sub-batch of configurations."""
        return SlitKernel(self.y[idx], self.x[idx], self.xr[idx], self.beta[idx], self.const[idx])

    def h(self, z) -> np.ndarray:
        """Correction h(z) for z of shape (P, K) (or (P,))."""
        z = np.asarray(z, complex)
        squeeze = z.ndim == 1
        if squeeze:
            z = z[:, None]
        out = np.zeros(z.shape, complex)
        M = self.order
        if self.n_slits == 0 or M == 0:
            return out[:, 0] if squeeze else out
        mid, r = self.mid, self.half
        for j in range(self.n_slits):
            b = self.beta[:, j, :]
            for m, sign in ((mid[:, j], 1.0), (np.conj(mid[:, j]), -1.0)):
                t = _tau((z - m[:, None]) / r[:, j, None])
                # Horner: sum_k b_k t^k = t (b_1 + t (b_2 + ...))
                acc = np.zeros(z.shape, complex)
                for k in range(M - 1, -1, -1):
                    acc = (acc + b[:, k, None]) * t
                out += sign * 1j * acc
        return out[:, 0] if squeeze else out

    def psi(self, z) -> np.ndarray:
        """Psi_s(z, 0)."""
        z = np.asarray(z, complex)
        return -1.0 / (np.pi * z) + self.h(z)

    def endpoint_values(self):
        """Psi_s(z_j, 0) and Psi_s(z_j', 0), each of shape (P, N)."""
        k = np.arange(1, self.order + 1)
        out = []
        for pts, exact in ((self.x + 1j * self.y, -1.0), (self.xr + 1j * self.y, 1.0)):
            vals = -1.0 / (np.pi * pts) + self.h(pts)
            for j in range(self.n_slits):
                # swap the branch-formula self term for the exact value tau = -+1
                t = _tau((pts[:, j] - self.mid[:, j]) / self.half[:, j])
                b = self.beta[:, j, :]
                vals[:, j] += 1j * np.sum(b * (exact ** k - t[:, None] ** k), axis=-1)
            out.append(vals)
        return out[0], out[1]

    def drift(self) -> np.ndarray:
        """The 3N drift coefficients b_j of the slit endpoints, shape (P, 3N)."""
        pl, pr = self.endpoint_values()
        return np.concatenate([-2 * np.pi * self.const, -2 * np.pi * pl.real, -2 * np.pi * pr.real], axis=1)

    def b_bmd(self) -> np.ndarray:
        """2 pi lim_{z->0} (Psi_s(z,0) + 1/(pi z)) = 2 pi h(0)."""
        return 2 * np.pi * self.h(np.zeros(self.y.shape[0], complex)).real


def solve_kernel(y, x, xr, order: int | None = None) -> SlitKernel:
    """Solve the collocation system for P configurations at once (xi = 0)."""
    y, x, xr = (np.atleast_2d(np.asarray(a, float)) for a in (y, x, xr))
    P, N = y.shape
    if N == 0:
        return SlitKernel(y, x, xr, np.zeros((P, 0, 0)), np.zeros((P, 0)))
    if np.any(y <= 0) or np.any(xr <= x):
        raise GeometryError("invalid slit configuration")
    M = choose_order(y, x, xr) if order is None else int(order)
    theta = np.pi * (np.arange(M + 1) + 0.5) / (M + 1)
    k = np.arange(1, M + 1)
    mid = 0.5 * (x + xr) + 1j * y
    r = 0.5 * (xr - x)
    nrow = N * (M + 1)
    A = np.zeros((P, nrow, N * M + N))
    rhs = np.zeros((P, nrow))
    cos_kt = np.cos(np.outer(theta, k))  # (M+1, M)
    for j in range(N):
        rows = slice(j * (M + 1), (j + 1) * (M + 1))
        zp = mid[:, j, None].real + r[:, j, None] * np.cos(theta)[None, :] + 1j * y[:, j, None]  # (P, M+1)
        rhs[:, rows] = -(1 / np.pi) * zp.imag / np.abs(zp) ** 2
        A[:, rows, N * M + j] = -1.0
        for l in range(N):
            cols = slice(l * M, (l + 1) * M)
            tb = _tau((zp - np.conj(mid[:, l, None])) / r[:, l, None])
            blk = -np.real(tb[..., None] ** k)
            if l == j:
                blk = blk + cos_kt[None]
            else:
                t = _tau((zp - mid[:, l, None]) / r[:, l, None])
                blk = blk + np.real(t[..., None] ** k)
            A[:, rows, cols] = blk
    sol = np.linalg.solve(A, rhs[..., None])[..., 0]
    beta = sol[:, :N * M].reshape(P, N, M)
    const = sol[:, N * M:]
    return SlitKernel(y, x, xr, beta, const)


def kernel_for(s: SlitVector, xi: float = 0.0, order: int | None = None) -> SlitKernel:
    """Solved kernel of a single configuration, in the frame centred at xi."""
    t = shift_slits(s, xi)
    return solve_kernel(t.y[None], t.x[None], t.xr[None], order)


def bmd_complex_poisson(s: SlitVector, z, xi: float = 0.0, order: int | None = None):
    """Psi_s(z, xi) for z in the slit domain (spectral backend)."""
    z = np.atleast_1d(np.asarray(z, complex))
    if np.any(z.imag <= 0):
        raise GeometryError("z must lie in H")
    if s.n == 0:
        return -1.0 / (np.pi * (z - xi))
    ker = kernel_for(s, xi, order)
    return ker.psi((z - xi)[None, :])[0]


@dataclass(frozen=True)
class KernelValue:
    value: float | np.ndarray
    error: float
    order: int


def _with_error(s: SlitVector, fn) -> KernelValue:
    ker = kernel_for(s)
    M = ker.order
    v = fn(ker)
    v2 = fn(kernel_for(s, order=min(M_MAX, M + max(8, M // 2))))
    return KernelValue(v, float(np.max(np.abs(np.asarray(v) - np.asarray(v2)))), M)


def drift_b_j(s: SlitVector, with_error: bool = False):
    """(SDE) drift of the 3N slit coordinates at xi = 0: -2pi (Im Psi(z_j), Re Psi(z_j), Re Psi(z_j'))."""
    if s.n == 0:
        return KernelValue(np.zeros(0), 0.0, 0) if with_error else np.zeros(0)
    if min(s.half_lengths) <= 0:
        raise GeometryError("degenerate slit")
    kv = _with_error(s, lambda k: k.drift()[0])
    return kv if with_error else kv.value


def b_bmd(s: SlitVector, with_error: bool = False):
    """BMD domain constant 2 pi lim_{z->0}(Psi_s(z,0) + 1/(pi z))."""
    if s.n == 0:
        return KernelValue(0.0, 0.0, 0) if with_error else 0.0
    kv = _with_error(s, lambda k: float(k.b_bmd()[0]))
    return kv if with_error else kv.value


def slit_constants(s: SlitVector, xi: float = 0.0) -> np.ndarray:
    """Value of Im Psi_s(., xi) on each slit."""
    if s.n == 0:
        return np.zeros(0)
    return kernel_for(s, xi).const[0]
