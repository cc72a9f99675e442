"""Finite-volume Laplace solver with slits as floating conductors.

The domain is a box [-L, L] x [0, L] covered by a tensor grid that is uniform
(step h) around the geometry and geometrically graded outwards.  Slit
endpoints, slit heights and hull vertices are inserted as grid lines.  Every
slit is one unknown (its constant value) and its equation is zero net flux,
which is exactly the darning condition.  The node-centred five-point stencil
is symmetric on the graded grid, so the reduced system is symmetric too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from skle.abm_mc import EstimateCI, ObstacleSet
from skle.chordal import complex_poisson_H
from skle.geometry import GeometryError, SlitVector


@dataclass(frozen=True)
class GridSpec:
    h: float = 1.0 / 64
    box_scale: float = 100.0   # half-width of the box in units of the geometry scale
    core_margin: float = 1.0   # uniform region extends this far beyond the geometry
    ratio: float = 1.15        # growth factor of the graded spacing

    def refined(self) -> "GridSpec":
        return GridSpec(self.h / 2, self.box_scale, self.core_margin, self.ratio)


class SolveError(RuntimeError):
    pass


def _axis(lo, hi, h, L, breaks, ratio, floor=False):
    core = np.arange(math.floor(lo / h), math.ceil(hi / h) + 1) * h
    br = np.asarray(sorted(set(float(b) for b in breaks if lo - 1e-12 <= b <= hi + 1e-12)))
    if br.size:
        keep = np.min(np.abs(core[:, None] - br[None, :]), axis=1) > 0.25 * h
        core = np.sort(np.concatenate([core[keep], br]))
    if floor:
        core = core[core > 0.25 * h]
        core = np.concatenate([[0.0], core])
    out_hi, step, cur = [], h, core[-1]
    while cur < L:
        step *= ratio
        cur = min(cur + step, L)
        if L - cur < 0.5 * step:
            cur = L
        out_hi.append(cur)
    parts = [core, np.array(out_hi)]
    if not floor:
        out_lo, step, cur = [], h, core[0]
        while cur > -L:
            step *= ratio
            cur = max(cur - step, -L)
            if cur + L < 0.5 * step:
                cur = -L
            out_lo.append(cur)
        parts.insert(0, np.array(out_lo[::-1]))
    return np.unique(np.concatenate(parts))


def _geometry_points(s: SlitVector, F: ObstacleSet | None, extra=()):
    pts = list(s.left) + list(s.right) if s.n else []
    if F is not None:
        for a, b in F.segments:
            pts += [a, b]
        for c, r in F.disks:
            pts += [c - r, c + r, c + 1j * r]
    pts += [complex(p) for p in extra]
    return np.asarray(pts, complex)


def build_grid(s: SlitVector, F: ObstacleSet | None = None, spec: GridSpec = GridSpec(), extra=()):
    pts = _geometry_points(s, F, extra)
    if pts.size == 0:
        pts = np.array([0j, 1j])
    scale = max(float(np.abs(pts).max()), 1.0)
    L = spec.box_scale * scale
    m = spec.core_margin
    xb = list(pts.real)
    yb = [p.imag for p in pts if p.imag > 0]
    xs = _axis(pts.real.min() - m, pts.real.max() + m, spec.h, L, xb, spec.ratio)
    ys = _axis(0.0, pts.imag.max() + m, spec.h, L, yb, spec.ratio, floor=True)
    return xs, ys


def _hull_mask(X, Y, F: ObstacleSet | None, tol):
    mask = np.zeros(X.shape, bool)
    if F is None:
        return mask
    Z = X + 1j * Y
    for a, b in F.segments:
        ab = b - a
        L2 = abs(ab) ** 2 or 1.0
        rel = Z - a
        t = np.clip((rel.real * ab.real + rel.imag * ab.imag) / L2, 0, 1)
        mask |= np.abs(Z - (a + t * ab)) <= tol
    for c, r in F.disks:
        mask |= np.abs(Z - c) <= r + tol
    return mask


@dataclass
class KernelField:
    """Grid solution; ``values`` has shape (len(y), len(x))."""

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    slit_values: np.ndarray
    flux: np.ndarray
    flux_scale: np.ndarray
    h: float
    meta: dict = field(default_factory=dict)

    @property
    def relative_flux(self) -> np.ndarray:
        return np.abs(self.flux) / np.maximum(self.flux_scale, 1e-300)

    def at(self, z) -> np.ndarray:
        """Bilinear interpolation."""
        z = np.atleast_1d(np.asarray(z, complex))
        i = np.clip(np.searchsorted(self.x, z.real) - 1, 0, len(self.x) - 2)
        j = np.clip(np.searchsorted(self.y, z.imag) - 1, 0, len(self.y) - 2)
        tx = (z.real - self.x[i]) / (self.x[i + 1] - self.x[i])
        ty = (z.imag - self.y[j]) / (self.y[j + 1] - self.y[j])
        v = self.values
        return ((1 - tx) * (1 - ty) * v[j, i] + tx * (1 - ty) * v[j, i + 1]
                + (1 - tx) * ty * v[j + 1, i] + tx * ty * v[j + 1, i + 1])


def _laplacian(xs, ys):
    nx, ny = len(xs), len(ys)
    dx, dy = np.diff(xs), np.diff(ys)
    # dual cell widths
    cx = np.empty(nx); cx[1:-1] = 0.5 * (dx[:-1] + dx[1:]); cx[0] = 0.5 * dx[0]; cx[-1] = 0.5 * dx[-1]
    cy = np.empty(ny); cy[1:-1] = 0.5 * (dy[:-1] + dy[1:]); cy[0] = 0.5 * dy[0]; cy[-1] = 0.5 * dy[-1]
    idx = np.arange(nx * ny).reshape(ny, nx)
    wh = cy[:, None] / dx[None, :]          # horizontal edges (ny, nx-1)
    wv = cx[None, :] / dy[:, None]          # vertical edges (ny-1, nx)
    p = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    q = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    w = np.concatenate([wh.ravel(), wv.ravel()])
    n = nx * ny
    off = sp.coo_matrix((-w, (p, q)), shape=(n, n))
    deg = np.bincount(p, w, n) + np.bincount(q, w, n)
    return (off + off.T + sp.diags(deg)).tocsr(), (p, q, w)


def solve_bmd_harmonic(s: SlitVector, F: ObstacleSet | None = None,
                       dirichlet: Callable | None = None,
                       slit_offset: Callable | None = None,
                       spec: GridSpec = GridSpec(), extra=(), flux_tol: float = 1e-6) -> KernelField:
    """Harmonic u on the box minus slits and hull.

    u = dirichlet(z) on the floor, the box and the hull (default 0); on slit j, u = c_j + slit_offset(z) with c_j
    unknown and zero net flux through the slit.
    """
    if dirichlet is None:
        dirichlet = _default_dirichlet
    xs, ys = build_grid(s, F, spec, extra)
    nx, ny = len(xs), len(ys)
    X, Y = np.meshgrid(xs, ys)
    Z = X + 1j * Y
    Lap, (ep, eq, ew) = _laplacian(xs, ys)
    n = nx * ny
    fixed = np.zeros((ny, nx), bool)
    fixed[0, :] = fixed[-1, :] = True
    fixed[:, 0] = fixed[:, -1] = True
    hull = _hull_mask(X, Y, F, 0.5 * spec.h * (1 + 1e-9))
    group = np.full((ny, nx), -1)
    for j in range(s.n):
        row = np.flatnonzero(np.isclose(ys, s.y[j], rtol=0, atol=1e-12))
        if row.size != 1:
            raise GeometryError("slit height is not a grid line")
        cols = np.flatnonzero((xs >= s.x[j] - 1e-12) & (xs <= s.xr[j] + 1e-12))
        if cols.size < 4:
            raise GeometryError("slit shorter than four grid cells")
        if np.any(hull[row[0], cols]):
            raise GeometryError("hull touches a slit")
        group[row[0], cols] = j
    fixed |= hull
    free = (~fixed) & (group < 0)
    nfree = int(free.sum())
    col = np.full((ny, nx), -1)
    col[free] = np.arange(nfree)
    col[group >= 0] = nfree + group[group >= 0]
    nunk = nfree + s.n
    rows = np.flatnonzero(col.ravel() >= 0)
    T = sp.csr_matrix((np.ones(rows.size), (rows, col.ravel()[rows])), shape=(n, nunk))
    d = np.zeros((ny, nx))
    d[fixed] = dirichlet(Z[fixed])
    if slit_offset is not None and s.n:
        gm = group >= 0
        d[gm] = slit_offset(Z[gm])
    d = d.ravel()
    A = (T.T @ Lap @ T).tocsc()
    rhs = -(T.T @ (Lap @ d))
    try:
        c = spla.spsolve(A, rhs)
    except Exception as exc:  # pragma: no cover - scipy raises several types
        raise SolveError(f"sparse solve failed: {exc}") from exc
    if not np.all(np.isfinite(c)):
        raise SolveError("non-finite solution")
    u = T @ c + d
    res = Lap @ u
    flux, scale = np.zeros(s.n), np.zeros(s.n)
    gflat = group.ravel()
    for j in range(s.n):
        on = gflat == j
        flux[j] = res[on].sum()
        # total absolute edge current leaving the slit
        a, b = on[ep], on[eq]
        cross = a ^ b
        scale[j] = np.sum(np.abs(ew[cross] * (u[ep[cross]] - u[eq[cross]])))
    resid = np.linalg.norm(A @ c - rhs) / max(np.linalg.norm(rhs), 1e-300)
    fieldv = KernelField(xs, ys, u.reshape(ny, nx), c[nfree:].copy(), flux, scale, spec.h,
                         {"unknowns": nunk, "residual": float(resid)})
    bad = fieldv.relative_flux > flux_tol
    if np.any(bad):
        raise SolveError(f"flux residual {fieldv.relative_flux.max():.3g} above tolerance")
    return fieldv


def _default_dirichlet(z):
    return np.zeros(z.shape)


def v_star_field(s: SlitVector, F: ObstacleSet | None = None, spec: GridSpec = GridSpec()) -> KernelField:
    """Grid v* = Im g for D minus F: Im z far away, 0 on the floor and F, floating on slits."""
    xs, ys = build_grid(s, F, spec)
    top, xmax = ys[-1], xs[-1]

    def data(z):
        on_box = (np.abs(z.imag - top) < 1e-9) | (np.abs(np.abs(z.real) - xmax) < 1e-9)
        return np.where(on_box, z.imag, 0.0)

    return solve_bmd_harmonic(s, F, data, None, spec)


@dataclass(frozen=True)
class GridValue:
    value: np.ndarray
    error: np.ndarray
    order: float
    levels: tuple

    def as_estimates(self) -> list[EstimateCI]:
        return [EstimateCI(float(v), float(e), 1) for v, e in zip(self.value, self.error)]


def richardson(f, spec: GridSpec = GridSpec(), levels: int = 3) -> GridValue:
    """Evaluate f(spec) on successively halved grids and extrapolate.

    The observed order comes from the last three levels; the error estimate is
    the size of the last correction (at least the last difference when the
    order is not measurable).
    """
    vals, specs = [], [spec]
    for _ in range(levels - 1):
        specs.append(specs[-1].refined())
    for sp_ in specs:
        vals.append(np.atleast_1d(np.asarray(f(sp_), float)))
    v = np.array(vals)
    if levels >= 3:
        d1, d2 = v[-2] - v[-3], v[-1] - v[-2]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.abs(d1) / np.abs(d2)
        r = float(np.nanmedian(ratio)) if np.any(np.isfinite(ratio)) else 2.0
        p = math.log2(r) if r > 1.05 else 0.0
        if p > 0.3:
            corr = d2 / (2 ** p - 1)
            return GridValue(v[-1] + corr, np.maximum(np.abs(corr), 1e-15), p, tuple(specs))
        return GridValue(v[-1], np.abs(d2), p, tuple(specs))
    d = v[-1] - v[-2]
    return GridValue(v[-1], np.abs(d), float("nan"), tuple(specs))


def v_star_grid(s: SlitVector, F: ObstacleSet | None = None, spec: GridSpec = GridSpec(),
                levels: int = 3) -> GridValue:
    """Slit values v*(c_j*) with a Richardson error estimate."""
    return richardson(lambda sp_: v_star_field(s, F, sp_).slit_values, spec, levels)


def cap_d_grid(s: SlitVector, F: ObstacleSet, spec: GridSpec = GridSpec(), R: float | None = None,
               m: int = 64) -> float:
    """Capacity of F relative to D from the grid v*: (2R/pi) int (Im z - v*) sin(theta) d theta."""
    fld = v_star_field(s, F, spec)
    rad = max(F.rad(), s.scale() if s.n else 0.0)
    R = 2.0 * rad if R is None else R
    x, w = np.polynomial.legendre.leggauss(m)
    th = 0.5 * np.pi * (x + 1)
    z = R * np.exp(1j * th)
    f = z.imag - fld.at(z)
    return float((2 * R / np.pi) * np.sum(0.5 * np.pi * w * f * np.sin(th)))


# -------------------------------------------------------------- kernel correction

def kernel_field(s: SlitVector, xi: float = 0.0, spec: GridSpec = GridSpec()) -> KernelField:
    """Im h on the grid, where Psi_s(z, xi) = Psi^H(z, xi) + h(z).

    Im h is zero on the floor and far away; on slit j it equals
    c_j - Im Psi^H, with zero net flux.
    """
    if s.n == 0:
        raise GeometryError("no slits: the correction vanishes identically")

    def offset(z):
        return -complex_poisson_H(z, xi).imag

    return solve_bmd_harmonic(s, None, lambda z: np.zeros(z.shape), offset, spec, extra=(xi,))


def grid_slit_constants(s: SlitVector, xi: float = 0.0, spec: GridSpec = GridSpec(), levels: int = 3) -> GridValue:
    """Value of Im Psi_s(., xi) on each slit from the grid backend."""
    return richardson(lambda sp_: kernel_field(s, xi, sp_).slit_values, spec, levels)


def grid_psi(fld: KernelField, z, xi: float = 0.0) -> np.ndarray:
    """Psi_s(z, xi) from a solved correction field.

    Im h is interpolated; Re h is recovered from the Cauchy-Riemann relation
    d(Re h)/dx = d(Im h)/dy, integrated along the horizontal line from z to the
    right edge of the box, where the correction is pinned to zero.
    """
    z = np.atleast_1d(np.asarray(z, complex))
    cell = max(fld.h, 1e-12)
    for zz in z:
        if zz.imag <= cell or abs(zz - xi) <= cell:
            raise GeometryError("z within one grid cell of the boundary point or the floor")
    xs, ys, v = fld.x, fld.y, fld.values
    dvdy = np.gradient(v, ys, axis=0)
    out = np.empty(z.shape, complex)
    for k, zz in enumerate(z):
        j = int(np.clip(np.searchsorted(ys, zz.imag) - 1, 0, len(ys) - 2))
        ty = (zz.imag - ys[j]) / (ys[j + 1] - ys[j])
        row = (1 - ty) * dvdy[j] + ty * dvdy[j + 1]
        sel = xs > zz.real
        xx = np.concatenate([[zz.real], xs[sel]])
        rr = np.concatenate([[np.interp(zz.real, xs, row)], row[sel]])
        re_h = -np.trapezoid(rr, xx)
        out[k] = complex_poisson_H(zz, xi) + re_h + 1j * fld.at(zz)[0]
    return out
