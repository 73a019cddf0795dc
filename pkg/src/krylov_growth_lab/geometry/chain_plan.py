"""
chain_plan.py

Tower of oblique cylinders joining the disc around (x0, t0') to (y0, t0).

The segment from (x0, t0') to (y0, t0) is cut into l equal pieces with
l the least integer such that |x0 - y0| / l <= r / sqrt(l). Every piece
carries an oblique cylinder of radius R = r / sqrt(l) and height
h = 3 r^2 / (4 l), so h / R^2 = 3/4 and d / R <= 1 on every step.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from krylov_growth_lab.errors import DomainViolation, GeometryViolation
from krylov_growth_lab.geometry.cylinders import ObliqueCylinder, ParabolicCylinder

logger = logging.getLogger(__name__)

STEP_ASPECT = 0.75
_TOL = 1e-9


def chain_length(distance: float, r: float) -> int:
    """max(1, least integer l with distance <= r sqrt(l)) = max(1, ceil((distance / r)^2))."""
    if r <= 0:
        raise DomainViolation(f"chain radius must be positive, got {r}")
    if distance <= 0:
        return 1
    return max(1, int(math.ceil((distance / r) ** 2 - _TOL)))


@dataclass(frozen=True)
class ChainPlan:
    step_count: int
    step_radius: float
    step_height: float
    step_drift: float
    end_steps: Tuple[ObliqueCylinder, ObliqueCylinder]
    cylinders: Tuple[ObliqueCylinder, ...] = ()

    @property
    def materialized(self) -> bool:
        """True when `cylinders` holds the whole tower, not just `end_steps`."""
        return len(self.cylinders) == self.step_count

    @property
    def step_aspect(self) -> float:
        return self.step_height / self.step_radius ** 2

    @property
    def step_drift_ratio(self) -> float:
        return self.step_drift / self.step_radius


def chain_plan(
    x0,
    t0p: float,
    y0,
    t0: float,
    r: float,
    domain: Optional[ParabolicCylinder] = None,
    materialize: bool = True,
) -> ChainPlan:
    """
    Plan the tower from B(x0) at time t0p to B(y0) at time t0 = t0p + 3 r^2 / 4.

    Raises GeometryViolation when a cylinder leaves `domain` (Q_1 by default).
    With materialize=False only `end_steps` are built and checked and
    `cylinders` stays empty; the domain is convex, so the end steps bound
    every step in between.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    if x0.shape != y0.shape:
        raise DomainViolation("x0 and y0 must have the same dimension")
    if abs((t0 - t0p) - STEP_ASPECT * r ** 2) > _TOL * max(1.0, r ** 2):
        raise DomainViolation(f"need t0 - t0' = 3r^2/4, got {t0 - t0p} for r = {r}")
    distance = float(np.linalg.norm(y0 - x0))
    if distance > 2.0 + _TOL:
        raise DomainViolation(f"|x0 - y0| must be at most 2, got {distance}")

    domain = domain or ParabolicCylinder.unit(len(x0))
    steps = chain_length(distance, r)
    radius = r / math.sqrt(steps)
    height = STEP_ASPECT * r ** 2 / steps
    drift = distance / steps

    def build(j: int) -> ObliqueCylinder:
        base = x0 + (y0 - x0) * (j / steps)
        top = x0 + (y0 - x0) * ((j + 1) / steps)
        cyl = ObliqueCylinder(
            base_center=tuple(base),
            base_time=t0p + j * height,
            top_center=tuple(top),
            top_time=t0p + (j + 1) * height,
            radius=radius,
        )
        if not cyl.inside(domain):
            raise GeometryViolation(f"chain step {j} leaves the domain: {cyl}")
        return cyl

    end_steps = (build(0), build(steps - 1))
    cylinders = tuple(build(j) for j in range(steps)) if materialize else ()

    plan = ChainPlan(
        step_count=steps,
        step_radius=radius,
        step_height=height,
        step_drift=drift,
        end_steps=end_steps,
        cylinders=cylinders,
    )
    logger.debug(f"chain plan: l={steps}, R={radius:.4g}, d/R={plan.step_drift_ratio:.4g}")
    return plan
