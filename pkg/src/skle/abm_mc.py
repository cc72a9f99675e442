"""Monte Carlo for absorbing Brownian motion on H via walk-on-spheres.

Walkers are advanced together as numpy arrays.  Each step jumps to a uniform
point on the largest circle avoiding every obstacle (floor, slits, hull
segments, disks, optional enclosing rectangle); a walker is captured once its
distance to an obstacle falls below the shell width.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from skle.geometry import GeometryError, SlitVector
from skle.rng import as_generator

FLOOR, SLIT, HULL, CONTOUR, ESCAPED, STALLED = range(6)
KIND_NAMES = {FLOOR: "floor", SLIT: "slit", HULL: "hull", CONTOUR: "contour",
              ESCAPED: "escaped", STALLED: "stalled"}


@dataclass(frozen=True)
class EstimateCI:
    value: float
    std_error: float
    n_samples: int
    bias_bound: float = 0.0

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "n": self.n_samples,
                "bias_bound": self.bias_bound}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def agrees(self, other: float | "EstimateCI", n_sigma: float = 3.0) -> bool:
        if isinstance(other, EstimateCI):
            se = math.hypot(self.std_error, other.std_error)
            bias = self.bias_bound + other.bias_bound
            other = other.value
        else:
            se, bias = self.std_error, self.bias_bound
        return abs(self.value - other) <= n_sigma * se + bias

    @classmethod
    def from_samples(cls, x, bias_bound: float = 0.0) -> "EstimateCI":
        x = np.asarray(x, dtype=float)
        n = len(x)
        se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        return cls(float(x.mean()), se, n, bias_bound)


@dataclass(frozen=True)
class ObstacleSet:
    """Obstacles for the walkers.  The real axis is always absorbing.

    ``segments`` and ``disks`` form the hull; ``slits`` are tagged separately so
    hits can be attributed to a slit index.  ``enclosure`` is an optional
    rectangle (x0, x1, y0, y1) whose boundary is absorbing from the inside.
    """

    slits: SlitVector = field(default_factory=SlitVector.empty)
    segments: tuple = ()
    disks: tuple = ()
    enclosure: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple((complex(a), complex(b)) for a, b in self.segments))
        object.__setattr__(self, "disks", tuple((complex(c), float(r)) for c, r in self.disks))

    @classmethod
    def polyline(cls, pts, slits: SlitVector | None = None) -> "ObstacleSet":
        pts = np.asarray(pts, dtype=complex)
        segs = list(zip(pts[:-1], pts[1:])) if len(pts) > 1 else [(pts[0], pts[0])]
        return cls(slits=slits if slits is not None else SlitVector.empty(), segments=segs)

    @property
    def has_hull(self) -> bool:
        return bool(self.segments or self.disks)

    def with_slits(self, s: SlitVector) -> "ObstacleSet":
        return ObstacleSet(s, self.segments, self.disks, self.enclosure)

    def hull_only(self) -> "ObstacleSet":
        return ObstacleSet(SlitVector.empty(), self.segments, self.disks, self.enclosure)

    def shifted(self, dx: float) -> "ObstacleSet":
        s = self.slits
        s2 = SlitVector(s.y, s.x + dx, s.xr + dx) if s.n else s
        segs = [(a + dx, b + dx) for a, b in self.segments]
        disks = [(c + dx, r) for c, r in self.disks]
        enc = None if self.enclosure is None else (self.enclosure[0] + dx, self.enclosure[1] + dx,
                                                   self.enclosure[2], self.enclosure[3])
        return ObstacleSet(s2, segs, disks, enc)

    def rad(self) -> float:
        pts = [abs(a) for seg in self.segments for a in seg]
        pts += [abs(c) + r for c, r in self.disks]
        if self.slits.n:
            pts += list(np.abs(self.slits.left)) + list(np.abs(self.slits.right))
        return max(pts) if pts else 0.0

    def _seg_arrays(self):
        a, b, lab, idx = [], [], [], []
        for j in range(self.slits.n):
            a.append(self.slits.left[j]); b.append(self.slits.right[j]); lab.append(SLIT); idx.append(j)
        for p, q in self.segments:
            a.append(p); b.append(q); lab.append(HULL); idx.append(-1)
        return (np.array(a, complex), np.array(b, complex), np.array(lab, int), np.array(idx, int))

    def distance(self, z: np.ndarray):
        """Distance to the nearest obstacle, its kind, slit index and the nearest point."""
        z = np.asarray(z, dtype=complex)
        best = z.imag.copy()
        kind = np.full(z.shape, FLOOR)
        which = np.full(z.shape, -1)
        near = z.real.astype(complex)
        a, b, lab, idx = self._seg_arrays()
        if len(a):
            ab = b - a
            L2 = np.abs(ab) ** 2
            L2 = np.where(L2 == 0, 1.0, L2)
            rel = z[:, None] - a[None, :]
            t = np.clip((rel.real * ab.real + rel.imag * ab.imag) / L2, 0.0, 1.0)
            proj = a[None, :] + t * ab[None, :]
            d = np.abs(z[:, None] - proj)
            j = d.argmin(axis=1)
            dj = d[np.arange(len(z)), j]
            better = dj < best
            best = np.where(better, dj, best)
            kind = np.where(better, lab[j], kind)
            which = np.where(better, idx[j], which)
            near = np.where(better, proj[np.arange(len(z)), j], near)
        for c, r in self.disks:
            w = z - c
            aw = np.abs(w)
            d = aw - r
            better = d < best
            best = np.where(better, d, best)
            kind = np.where(better, HULL, kind)
            which = np.where(better, -1, which)
            near = np.where(better, c + r * w / np.where(aw == 0, 1, aw), near)
        if self.enclosure is not None:
            x0, x1, y0, y1 = self.enclosure
            dists = np.stack([z.real - x0, x1 - z.real, z.imag - y0, y1 - z.imag])
            k = dists.argmin(axis=0)
            d = dists[k, np.arange(len(z))]
            better = d < best
            cand = np.select([k == 0, k == 1, k == 2], [x0 + 1j * z.imag, x1 + 1j * z.imag, z.real + 1j * y0],
                             z.real + 1j * y1)
            best = np.where(better, d, best)
            kind = np.where(better, CONTOUR, kind)
            which = np.where(better, -1, which)
            near = np.where(better, cand, near)
        return best, kind, which, near

    def inside(self, z, tol: float = 0.0) -> np.ndarray:
        """Points on or within ``tol`` of an obstacle (the floor excluded)."""
        d, kind, _, _ = self.distance(np.atleast_1d(np.asarray(z, complex)))
        return (d <= tol) & (kind != FLOOR)


@dataclass(frozen=True)
class HitRecord:
    kind: str
    location: complex
    index: int = -1


@dataclass(frozen=True)
class WalkResult:
    kind: np.ndarray
    index: np.ndarray
    location: np.ndarray
    steps: np.ndarray

    def fraction(self, kind: int) -> float:
        return float(np.mean(self.kind == kind))


def default_shell(obstacles: ObstacleSet, z0) -> float:
    scale = max(obstacles.rad(), float(np.max(np.abs(np.atleast_1d(z0)))), 1e-12)
    return 1e-6 * scale


def walk(z0, obstacles: ObstacleSet, rng=None, shell: float | None = None,
         escape_radius: float | None = None, max_steps: int = 100_000,
         batch: int = 50_000) -> WalkResult:
    """Run one walker per starting point until capture, escape, or the step cap."""
    gen = as_generator(rng)
    z0 = np.atleast_1d(np.asarray(z0, dtype=complex))
    if np.any(z0.imag <= 0):
        raise GeometryError("walkers must start in H")
    d0, _, _, _ = obstacles.distance(z0)
    eps = default_shell(obstacles, z0) if shell is None else shell
    if np.any(d0 < 0) or np.any(obstacles.inside(z0, 0.0)):
        raise GeometryError("starting point inside an obstacle")
    R = escape_radius if escape_radius is not None else 1e4 * max(obstacles.rad(), float(np.abs(z0).max()))
    n = len(z0)
    kind = np.full(n, STALLED)
    which = np.full(n, -1)
    loc = z0.copy()
    nsteps = np.zeros(n, int)
    for lo in range(0, n, batch):
        sl = slice(lo, min(n, lo + batch))
        z = z0[sl].copy()
        act = np.arange(sl.start, sl.stop)
        for step in range(max_steps):
            if act.size == 0:
                break
            d, k, w, near = obstacles.distance(z)
            cap = d < eps
            esc = np.abs(z) > R
            done = cap | esc
            if done.any():
                ids = act[done]
                kind[ids] = np.where(cap[done], k[done], ESCAPED)
                which[ids] = np.where(cap[done], w[done], -1)
                loc[ids] = np.where(cap[done], near[done], z[done])
                nsteps[ids] = step
                keep = ~done
                z, d, act = z[keep], d[keep], act[keep]
                if act.size == 0:
                    break
            z = z + d * np.exp(2j * np.pi * gen.random(act.size))
        if act.size:
            loc[act] = z
            nsteps[act] = max_steps
    return WalkResult(kind, which, loc, nsteps)


def sample_hit(z, obstacles: ObstacleSet, rng=None, **kw) -> HitRecord:
    r = walk([z], obstacles, rng, **kw)
    return HitRecord(KIND_NAMES[int(r.kind[0])], complex(r.location[0]), int(r.index[0]))


def _bias(obstacles, z0, shell, R):
    rad = max(obstacles.rad(), float(np.abs(np.atleast_1d(z0)).max()))
    eps = default_shell(obstacles, z0) if shell is None else shell
    Rr = R if R is not None else 1e4 * rad
    return eps + rad * rad / Rr


def im_g0(z, F: ObstacleSet, n: int = 100_000, rng=None, shell=None, escape_radius=None) -> EstimateCI:
    """Im of the canonical map of H minus the hull F, at z: Im z - E_z[Im Z_sigma_F]."""
    z = complex(z)
    if not F.has_hull and F.slits.n == 0:
        return EstimateCI(z.imag, 0.0, n)
    r = walk(np.full(n, z), F, rng, shell, escape_radius)
    hit = (r.kind == HULL) | (r.kind == SLIT)
    vals = z.imag - np.where(hit, r.location.imag, 0.0)
    est = EstimateCI.from_samples(vals, _bias(F, z, shell, escape_radius))
    if not (-3 * est.std_error - est.bias_bound <= est.value <= z.imag + 3 * est.std_error + est.bias_bound):
        raise AssertionError("optional-sampling bound violated")
    return EstimateCI(min(max(est.value, 0.0), z.imag), est.std_error, n, est.bias_bound)


def hcap_mc(F: ObstacleSet, R: float | None = None, n: int = 200_000, rng=None,
            m: int = 16, shell=None, escape_radius=None) -> EstimateCI:
    """Half-plane capacity from hitting heights of walkers started on a semicircle.

    hcap = (2R/pi) int_0^pi E_{Re^{i theta}}[Im Z_sigma] sin(theta) d theta.
    """
    rad = F.rad()
    R = 2.0 * rad if R is None else R
    if rad >= R:
        raise GeometryError("hull not enclosed by radius R")
    gen = as_generator(rng)
    x, w = np.polynomial.legendre.leggauss(m)
    theta = 0.5 * np.pi * (x + 1)
    w = 0.5 * np.pi * w
    per = max(2, n // m)
    starts = np.repeat(R * np.exp(1j * theta), per)
    r = walk(starts, F, gen, shell, escape_radius)
    hit = (r.kind == HULL) | (r.kind == SLIT)
    h = np.where(hit, r.location.imag, 0.0).reshape(m, per)
    means, var = h.mean(axis=1), h.var(axis=1, ddof=1) / per
    c = (2 * R / np.pi) * w * np.sin(theta)
    value = float(c @ means)
    se = float(math.sqrt(np.sum(c * c * var)))
    bias = (2 * R / np.pi) * math.pi * _bias(F, starts[:1], shell, escape_radius)
    return EstimateCI(value, se, per * m, bias)


def slit_hit_probs(z, s: SlitVector, F: ObstacleSet | None = None, n: int = 100_000, rng=None,
                   **kw) -> list[EstimateCI]:
    """P_z(first obstacle hit is slit j, before the hull) for each slit j."""
    if s.n == 0:
        return []
    obs = (F or ObstacleSet()).with_slits(s)
    r = walk(np.full(n, complex(z)), obs, rng, **kw)
    out = []
    for j in range(s.n):
        p = float(np.mean((r.kind == SLIT) & (r.index == j)))
        out.append(EstimateCI(p, math.sqrt(max(p * (1 - p), 1.0 / n) / n), n))
    return out


# ----------------------------------------------------------- exit measure on a contour

@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def perimeter(self) -> float:
        return 2 * ((self.x1 - self.x0) + (self.y1 - self.y0))

    def point(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Arclength-parametrized boundary point for u in [0,1) and inward normal."""
        w, h = self.x1 - self.x0, self.y1 - self.y0
        L = u * self.perimeter
        z = np.empty(len(u), complex)
        nrm = np.empty(len(u), complex)
        bottom = L < w
        right = (L >= w) & (L < w + h)
        top = (L >= w + h) & (L < 2 * w + h)
        left = L >= 2 * w + h
        z[bottom] = self.x0 + L[bottom] + 1j * self.y0; nrm[bottom] = 1j
        z[right] = self.x1 + 1j * (self.y0 + L[right] - w); nrm[right] = -1
        z[top] = self.x1 - (L[top] - w - h) + 1j * self.y1; nrm[top] = -1j
        z[left] = self.x0 + 1j * (self.y1 - (L[left] - 2 * w - h)); nrm[left] = 1
        return z, nrm

    def arclength(self, z: np.ndarray) -> np.ndarray:
        """Inverse of ``point`` (position along the perimeter in [0,1))."""
        z = np.asarray(z, complex)
        w, h = self.x1 - self.x0, self.y1 - self.y0
        d = np.stack([np.abs(z.imag - self.y0), np.abs(z.real - self.x1),
                      np.abs(z.imag - self.y1), np.abs(z.real - self.x0)])
        side = d.argmin(axis=0)
        L = np.select([side == 0, side == 1, side == 2],
                      [z.real - self.x0, w + z.imag - self.y0, w + h + self.x1 - z.real],
                      2 * w + h + self.y1 - z.imag)
        return L / self.perimeter

    def as_tuple(self):
        return (self.x0, self.x1, self.y0, self.y1)


def default_contour(s: SlitVector, i: int, margin: float | None = None, F: ObstacleSet | None = None) -> Rect:
    """Rectangle around slit i, under half the distance to the floor, other slits and the hull."""
    y, x, xr = s.y[i], s.x[i], s.xr[i]
    m = 0.5 * y if margin is None else margin
    for j in range(s.n):
        if j == i:
            continue
        # box distance between slits
        dx = max(s.x[j] - xr, x - s.xr[j], 0.0)
        dy = abs(s.y[j] - y)
        m = min(m, 0.45 * max(dx, dy))
    if F is not None and F.has_hull:
        pts = []
        for a, b in F.segments:
            pts.append(a + (b - a) * np.linspace(0, 1, 257))
        pts = np.concatenate(pts) if pts else np.zeros(0, complex)
        if pts.size:
            dx = np.maximum(np.maximum(x - pts.real, pts.real - xr), 0.0)
            dy = np.abs(pts.imag - y)
            m = min(m, 0.45 * float(np.max(np.stack([dx, dy]), axis=0).min()))
        for c, r in F.disks:
            dx = max(x - c.real, c.real - xr, 0.0)
            dy = abs(c.imag - y)
            m = min(m, 0.45 * (math.hypot(dx, dy) - r))
    if m <= 0:
        raise GeometryError("no room for a contour around the slit")
    return Rect(x - m, xr + m, y - m, y + m)


def validate_contour(rect: Rect, i: int, s: SlitVector, F: ObstacleSet | None) -> None:
    if rect.y0 <= 0:
        raise GeometryError("contour touches the real axis")
    if not (rect.x0 < s.x[i] and s.xr[i] < rect.x1 and rect.y0 < s.y[i] < rect.y1):
        raise GeometryError("contour does not enclose its slit")
    for j in range(s.n):
        if j != i and not (s.xr[j] < rect.x0 or s.x[j] > rect.x1 or s.y[j] < rect.y0 or s.y[j] > rect.y1):
            raise GeometryError(f"contour meets slit {j}")
    if F is not None and F.has_hull:
        pts = [p for seg in F.segments for p in seg]
        for a, b in F.segments:
            pts += list(a + (b - a) * np.linspace(0, 1, 64))
        for c, r in F.disks:
            if (max(rect.x0 - c.real, 0, c.real - rect.x1) ** 2 + max(rect.y0 - c.imag, 0, c.imag - rect.y1) ** 2
                    <= r * r):
                raise GeometryError("contour meets the hull")
        pts = np.array(pts)
        if pts.size and np.any((pts.real >= rect.x0) & (pts.real <= rect.x1) & (pts.imag >= rect.y0)
                               & (pts.imag <= rect.y1)):
            raise GeometryError("contour meets the hull")


@dataclass(frozen=True)
class ContourMeasure:
    """Weighted samples of a probability measure on a rectangle boundary."""

    points: np.ndarray
    weights: np.ndarray
    contour: Rect
    n_launched: int

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def integrate(self, f_values) -> float:
        return float(np.dot(self.weights, f_values))

    def cdf(self, grid) -> np.ndarray:
        pos = self.contour.arclength(self.points)
        order = np.argsort(pos)
        cw = np.cumsum(self.weights[order])
        return np.interp(grid, pos[order], cw, left=0.0, right=1.0)

    def effective_size(self) -> float:
        return float(self.weights.sum() ** 2 / np.sum(self.weights ** 2))


def harmonic_measure_eta(i: int, s: SlitVector, F: ObstacleSet | None = None, contour: Rect | None = None,
                         n: int = 200_000, rng=None, method: str = "reversed",
                         offset: float | None = None) -> ContourMeasure:
    """Exit law on the contour around slit i for the darned process leaving the slit.

    ``reversed``: launch from points just inside the contour (uniform in
    arclength) and keep those that reach the slit before the contour; the
    accepted launch points sample the normalized flux of the condenser
    potential, which is the exit law from the darned point.
    ``uniform``: launch from uniform points on the slit and record where they
    first reach the contour.
    """
    gen = as_generator(rng)
    rect = contour or default_contour(s, i)
    validate_contour(rect, i, s, F)
    one = SlitVector([s.y[i]], [s.x[i]], [s.xr[i]])
    inner = ObstacleSet(slits=one, enclosure=rect.as_tuple())
    size = min(rect.x1 - rect.x0, rect.y1 - rect.y0)
    shell = 1e-6 * size
    if method == "reversed":
        delta = 0.02 * size if offset is None else offset
        u = gen.random(n)
        pts, nrm = rect.point(u)
        r = walk(pts + delta * nrm, inner, gen, shell=shell)
        ok = r.kind == SLIT
        keep = pts[ok]
        if keep.size == 0:
            raise RuntimeError("no launches reached the slit; increase n")
        return ContourMeasure(keep, np.full(keep.size, 1.0 / keep.size), rect, n)
    if method == "uniform":
        delta = 0.005 * size if offset is None else offset
        xs = s.x[i] + (s.xr[i] - s.x[i]) * gen.random(n)
        side = np.where(gen.random(n) < 0.5, 1.0, -1.0)
        r = walk(xs + 1j * (s.y[i] + side * delta), inner, gen, shell=shell)
        ok = r.kind == CONTOUR
        keep = r.location[ok]
        if keep.size == 0:
            raise RuntimeError("no launches reached the contour; increase n")
        return ContourMeasure(keep, np.full(keep.size, 1.0 / keep.size), rect, n)
    raise ValueError(f"unknown method {method!r}")
