"""Plane geometry shared by every solver: slit vectors, hull probes, coefficient functions.

Points of the plane are plain Python/numpy complex numbers.  A standard slit
domain is the upper half-plane minus N horizontal segments; its state is the
3N-vector ``(y, x, xr)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

#: minimal separation enforced between slits sharing a height
SLIT_GAP = 1e-9

#: sentinel for "never swallowed"; written as ``inf`` in CSV output
NEVER = math.inf


class GeometryError(ValueError):
    """Raised when an input violates the geometric preconditions of an operation."""


def as_point(z) -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise GeometryError(f"non-finite point {z!r}")
    return z


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SlitVector:
    """Element of the slit space: heights ``y``, left ends ``x``, right ends ``xr``."""

    y: np.ndarray
    x: np.ndarray
    xr: np.ndarray
    gap: float = field(default=SLIT_GAP, repr=False)

    def __post_init__(self):
        y, x, xr = _frozen(self.y), _frozen(self.x), _frozen(self.xr)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xr", xr)
        if not (len(y) == len(x) == len(xr)):
            raise GeometryError("y, x, xr must have equal length")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x)) and np.all(np.isfinite(xr))):
            raise GeometryError("slit coordinates must be finite")
        if np.any(y <= 0):
            raise GeometryError("slit heights must be positive")
        if np.any(x >= xr):
            raise GeometryError("left endpoints must lie strictly left of right endpoints")
        n = len(y)
        for j in range(n):
            for k in range(j + 1, n):
                if y[j] == y[k]:
                    sep = max(x[k] - xr[j], x[j] - xr[k])
                    if sep <= self.gap:
                        raise GeometryError(f"slits {j} and {k} overlap at height {y[j]}")

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def left(self) -> np.ndarray:
        return self.x + 1j * self.y

    @property
    def right(self) -> np.ndarray:
        return self.xr + 1j * self.y

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.x + self.xr) + 1j * self.y

    @property
    def half_lengths(self) -> np.ndarray:
        return 0.5 * (self.xr - self.x)

    @classmethod
    def empty(cls) -> "SlitVector":
        return cls([], [], [])

    @classmethod
    def from_array(cls, v: Sequence[float]) -> "SlitVector":
        v = np.asarray(v, dtype=float)
        n = len(v) // 3
        return cls(v[:n], v[n:2 * n], v[2 * n:])

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.y, self.x, self.xr])

    def to_dict(self) -> dict:
        return {"y": self.y.tolist(), "x": self.x.tolist(), "xr": self.xr.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "SlitVector":
        return cls(d["y"], d["x"], d["xr"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SlitVector":
        return cls.from_dict(json.loads(text))

    def scale(self) -> float:
        """Characteristic size of the configuration (max modulus of an endpoint)."""
        if self.n == 0:
            return 1.0
        return float(max(np.abs(self.left).max(), np.abs(self.right).max()))

    def min_gap(self) -> float:
        """Smallest horizontal gap between two slits at equal height (inf if none)."""
        best = math.inf
        for j in range(self.n):
            for k in range(j + 1, self.n):
                if self.y[j] == self.y[k]:
                    best = min(best, max(self.x[k] - self.xr[j], self.x[j] - self.xr[k]))
        return best

    def __eq__(self, other):
        if not isinstance(other, SlitVector):
            return NotImplemented
        return (np.array_equal(self.y, other.y) and np.array_equal(self.x, other.x)
                and np.array_equal(self.xr, other.xr))

    def __repr__(self):
        return f"SlitVector(y={self.y.tolist()}, x={self.x.tolist()}, xr={self.xr.tolist()})"


def shift_slits(s: SlitVector, xi: float) -> SlitVector:
    """Translate horizontally by ``-xi`` (the 3N-vector ``s - xi_hat``)."""
    return SlitVector(s.y, s.x - xi, s.xr - xi, gap=s.gap)


def scale_slits(s: SlitVector, c: float) -> SlitVector:
    if not c > 0:
        raise GeometryError("scale factor must be positive")
    return SlitVector(c * s.y, c * s.x, c * s.xr, gap=s.gap)


def radius(points: Iterable[complex]) -> float:
    """sup of |z| over a nonempty finite set."""
    pts = np.asarray(list(points), dtype=complex)
    if pts.size == 0:
        raise GeometryError("radius of an empty set")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("non-finite point")
    return float(np.abs(pts).max())


@dataclass(frozen=True)
class CoefficientFunction:
    """A homogeneous function on slit space, used as alpha (degree 0) or b (degree -1)."""

    evaluator: Callable[[SlitVector], float]
    homogeneity_degree: int
    lipschitz_probe_radius: float = 1e-3
    name: str = "custom"

    def __post_init__(self):
        if self.homogeneity_degree not in (0, -1):
            raise GeometryError("homogeneity degree must be 0 or -1")

    def __call__(self, s: SlitVector) -> float:
        return float(self.evaluator(s))

    def check_homogeneity(self, s: SlitVector, c: float = 2.0, rtol: float = 1e-8) -> bool:
        lhs = self(scale_slits(s, c))
        rhs = c ** self.homogeneity_degree * self(s)
        return abs(lhs - rhs) <= rtol * max(abs(lhs), abs(rhs), 1e-300)

    def lipschitz_ratio(self, s: SlitVector, rng: np.random.Generator, n_probes: int = 8) -> float:
        """Largest |f(s1)-f(s2)|/|s1-s2| over random pairs within the probe radius."""
        base = s.to_array()
        best = 0.0
        for _ in range(n_probes):
            d1 = rng.uniform(-1, 1, base.shape) * self.lipschitz_probe_radius
            d2 = rng.uniform(-1, 1, base.shape) * self.lipschitz_probe_radius
            s1, s2 = SlitVector.from_array(base + d1), SlitVector.from_array(base + d2)
            dist = np.linalg.norm(d1 - d2)
            if dist > 0:
                best = max(best, abs(self(s1) - self(s2)) / dist)
        return best

    @classmethod
    def constant(cls, value: float, degree: int = 0) -> "CoefficientFunction":
        if degree != 0 and value != 0:
            raise GeometryError("a nonzero constant is homogeneous of degree 0 only")
        return cls(lambda s: value, degree, name=f"const:{value}")


@dataclass(frozen=True)
class HullProbe:
    """Swallow times of a finite set of query points; ``NEVER`` marks survivors."""

    query_points: np.ndarray
    swallow_times: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.query_points, dtype=complex).reshape(-1)
        t = np.asarray(self.swallow_times, dtype=float).reshape(-1)
        if q.shape != t.shape:
            raise GeometryError("one swallow time per query point")
        if np.any(t < 0) or np.any(np.isnan(t)):
            raise GeometryError("swallow times must be nonnegative")
        object.__setattr__(self, "query_points", q)
        object.__setattr__(self, "swallow_times", t)

    def hull_at(self, t: float) -> np.ndarray:
        """Query points inside the hull at time t."""
        return self.query_points[self.swallow_times <= t]

    def max_discrepancy(self, other: "HullProbe", horizon: float | None = None) -> float:
        """Largest difference in swallow times, with times beyond ``horizon`` treated as never."""
        a, b = self.swallow_times.copy(), other.swallow_times.copy()
        if horizon is not None:
            a[a > horizon] = NEVER
            b[b > horizon] = NEVER
        both_never = np.isinf(a) & np.isinf(b)
        with np.errstate(invalid="ignore"):
            diff = np.where(both_never, 0.0, np.abs(a - b))
        return float(diff.max()) if diff.size else 0.0
