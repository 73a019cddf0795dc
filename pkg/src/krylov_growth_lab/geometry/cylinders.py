"""
cylinders.py

Parabolic and oblique cylinders, measures normalized by |Q_1|, and the
shrink-factor arithmetic of the covering argument.

Conventions
-----------
- Q_r(x0, t0) = B_r(x0) x (t0 - r^2, t0]; the open top is not part of the
  parabolic boundary.
- Measures are normalized by |Q_1|, so the unit cylinder has measure 1.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from krylov_growth_lab.errors import DomainViolation, GeometryViolation

logger = logging.getLogger(__name__)

GEOMETRY_TOL = 1e-12


def _vector(x) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1 or arr.shape[0] not in (1, 2):
        raise DomainViolation(f"space points must have length 1 or 2, got shape {arr.shape}")
    return arr


def ball_volume(N: int, radius: float = 1.0) -> float:
    """Lebesgue measure of B_radius in R^N, N in {1, 2}."""
    if N == 1:
        return 2.0 * radius
    if N == 2:
        return math.pi * radius ** 2
    raise DomainViolation(f"N must be 1 or 2, got {N}")


@dataclass(frozen=True)
class SpaceTimePoint:
    x: Tuple[float, ...]
    t: float

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in _vector(self.x)))

    @property
    def N(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class ParabolicCylinder:
    """Q_r(x0, t0) = B_r(x0) x (t0 - r^2, t0]."""

    center: Tuple[float, ...]
    top_time: float
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in _vector(self.center)))
        if not self.radius > 0:
            raise DomainViolation(f"cylinder radius must be positive, got {self.radius}")

    @classmethod
    def unit(cls, N: int) -> "ParabolicCylinder":
        return cls(center=(0.0,) * N, top_time=0.0, radius=1.0)

    @property
    def N(self) -> int:
        return len(self.center)

    @property
    def bottom_time(self) -> float:
        return self.top_time - self.radius ** 2

    def contains(self, x, t: float) -> bool:
        offset = _vector(x) - np.asarray(self.center)
        return bool(np.linalg.norm(offset) < self.radius and self.bottom_time < t <= self.top_time)

    def on_parabolic_boundary(self, x, t: float, tol: float = GEOMETRY_TOL) -> bool:
        """Bottom disc or lateral wall; the open top (t = top_time, |x| < r) is excluded."""
        dist = float(np.linalg.norm(_vector(x) - np.asarray(self.center)))
        on_bottom = abs(t - self.bottom_time) <= tol and dist <= self.radius + tol
        on_wall = abs(dist - self.radius) <= tol and self.bottom_time - tol <= t < self.top_time
        return on_bottom or on_wall

    def inside(self, outer: "ParabolicCylinder", tol: float = GEOMETRY_TOL) -> bool:
        """True iff this cylinder is contained in `outer`."""
        dist = float(np.linalg.norm(np.asarray(self.center) - np.asarray(outer.center)))
        return (
            dist + self.radius <= outer.radius + tol
            and self.bottom_time >= outer.bottom_time - tol
            and self.top_time <= outer.top_time + tol
        )

    def measure(self) -> float:
        return cylinder_measure(self, self.N)


@dataclass(frozen=True)
class ObliqueCylinder:
    """
    Cylinder whose ball cross-section moves linearly from B_R(x1) at t1
    to B_R(x2) at t2.
    """

    base_center: Tuple[float, ...]
    base_time: float
    top_center: Tuple[float, ...]
    top_time: float
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "base_center", tuple(float(v) for v in _vector(self.base_center)))
        object.__setattr__(self, "top_center", tuple(float(v) for v in _vector(self.top_center)))
        if len(self.base_center) != len(self.top_center):
            raise DomainViolation("base and top centers must have the same dimension")
        if not self.radius > 0:
            raise DomainViolation(f"cylinder radius must be positive, got {self.radius}")
        if not self.height > 0:
            raise DomainViolation(f"oblique cylinder needs t2 > t1, got h = {self.height}")

    @property
    def height(self) -> float:
        return self.top_time - self.base_time

    @property
    def drift(self) -> float:
        return float(np.linalg.norm(np.asarray(self.top_center) - np.asarray(self.base_center)))

    @property
    def drift_ratio(self) -> float:
        """d / R."""
        return self.drift / self.radius

    @property
    def aspect_ratio(self) -> float:
        """h / R^2."""
        return self.height / self.radius ** 2

    def center_at(self, s: float) -> np.ndarray:
        frac = (s - self.base_time) / self.height
        return (1.0 - frac) * np.asarray(self.base_center) + frac * np.asarray(self.top_center)

    def contains(self, x, t: float) -> bool:
        if not self.base_time < t <= self.top_time:
            return False
        return bool(np.linalg.norm(_vector(x) - self.center_at(t)) < self.radius)

    def inside(self, outer: ParabolicCylinder, tol: float = GEOMETRY_TOL) -> bool:
        """Slab centers move linearly, so checking both end discs is enough."""
        if self.base_time < outer.bottom_time - tol or self.top_time > outer.top_time + tol:
            return False
        outer_center = np.asarray(outer.center)
        for c in (self.base_center, self.top_center):
            if np.linalg.norm(np.asarray(c) - outer_center) + self.radius > outer.radius + tol:
                return False
        return True


def cylinder_measure(cyl: ParabolicCylinder, N: int) -> float:
    """|Q_r| / |Q_1| = r^(N+2)."""
    if N not in (1, 2):
        raise DomainViolation(f"N must be 1 or 2, got {N}")
    return (ball_volume(N, cyl.radius) * cyl.radius ** 2) / ball_volume(N, 1.0)


def shrunk_cylinder_gap(c1: float, m: float, N: int) -> float:
    """|Q_1 minus the lower cylinder of radius 1 - c1 m| = 1 - (1 - c1 m)^(N+2)."""
    x = c1 * m
    if not 0.0 <= x < 1.0:
        raise DomainViolation(f"shrink factor c1*m must lie in [0, 1), got {x}")
    return 1.0 - (1.0 - x) ** (N + 2)


def choose_c1(kappa: float, N: int) -> float:
    """
    Shrink constant with 1 - (1 - c1 m)^(N+2) <= kappa m for every m in (0, 1].

    Bernoulli: 1 - (1 - x)^k <= k x, so c1 = kappa / (N + 2) works.
    """
    if not 0.0 < kappa < 1.0:
        raise DomainViolation(f"kappa must lie in (0,1), got {kappa}")
    if N not in (1, 2):
        raise DomainViolation(f"N must be 1 or 2, got {N}")
    return kappa / (N + 2)


def lower_cylinder(radius: float, N: int) -> ParabolicCylinder:
    """The lower cylinder B_radius x (-1, -1 + radius^2] anchored at the bottom of Q_1."""
    return ParabolicCylinder(center=(0.0,) * N, top_time=-1.0 + radius ** 2, radius=radius)


def ensure_inside(cyl, outer: ParabolicCylinder, what: str = "cylinder") -> None:
    if not cyl.inside(outer):
        raise GeometryViolation(f"{what} {cyl} leaves {outer}")
