"""
covering.py

Covering of the shrunk lower cylinder by small cylinders and the
pigeonhole selection of a cylinder where Gamma is dense.

Overlaps between lattice cells and cylinders are measured exactly in
one space dimension and with a 4 x 4 sub-cell quadrature in two, so the
densities are measures of the piecewise-constant set, not center counts.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from krylov_growth_lab.errors import DomainViolation
from krylov_growth_lab.geometry.cylinders import ParabolicCylinder, ball_volume, lower_cylinder
from krylov_growth_lab.geometry.indicator_set import IndicatorSet
from krylov_growth_lab.geometry.lattice import SpaceTimeLattice

logger = logging.getLogger(__name__)

_SUBCELLS = 4
_TIE_TOL = 1e-12


def interval_overlap(a_lo, a_hi, b_lo, b_hi):
    """Length of [a_lo, a_hi] intersected with [b_lo, b_hi] (broadcasting)."""
    return np.maximum(0.0, np.minimum(a_hi, b_hi) - np.maximum(a_lo, b_lo))


def _space_weights(lattice: SpaceTimeLattice, center: np.ndarray, radius: float) -> Tuple[np.ndarray, np.ndarray]:
    """Flat node indices near `center` and the measure of (cell of node) intersected with B_radius."""
    h = lattice.h
    pts = lattice.points.reshape(-1, lattice.N)
    near = np.flatnonzero(np.all(np.abs(pts - center) < radius + h, axis=1))
    local = pts[near]
    if lattice.N == 1:
        weights = interval_overlap(local[:, 0] - h / 2, local[:, 0] + h / 2, center[0] - radius, center[0] + radius)
    else:
        offsets = (np.arange(_SUBCELLS) + 0.5) / _SUBCELLS - 0.5
        sub = np.stack(np.meshgrid(offsets, offsets, indexing="ij"), axis=-1).reshape(-1, 2) * h
        inside = np.linalg.norm(local[:, np.newaxis, :] + sub[np.newaxis] - center, axis=-1) < radius
        weights = inside.mean(axis=1) * h * h
    return near, weights


def _time_weights(lattice: SpaceTimeLattice, tops: np.ndarray, height: float) -> np.ndarray:
    """(len(tops), time_cells) overlaps of (top - height, top] with each time cell."""
    lo = lattice.t_bottom + lattice.tau * np.arange(lattice.time_cells)
    return interval_overlap(tops[:, np.newaxis] - height, tops[:, np.newaxis], lo, lo + lattice.tau)


def cylinder_mass(gamma: IndicatorSet, cyl: ParabolicCylinder) -> float:
    """|Gamma intersected with cyl| normalized by the lattice cylinder's volume."""
    lattice = gamma.lattice
    near, weights = _space_weights(lattice, np.asarray(cyl.center), cyl.radius)
    mask = gamma.mask.reshape(lattice.time_cells, -1)[:, near].astype(float)
    per_time = mask @ weights
    t_w = _time_weights(lattice, np.array([cyl.top_time]), cyl.radius ** 2)[0]
    return float(t_w @ per_time) / (lattice.domain_cells * lattice.cell_volume)


def cylinder_density(gamma: IndicatorSet, cyl: ParabolicCylinder) -> float:
    """|Gamma intersected with cyl| / |cyl|."""
    lattice = gamma.lattice
    volume = ball_volume(lattice.N, cyl.radius) * cyl.radius ** 2
    return cylinder_mass(gamma, cyl) * lattice.domain_cells * lattice.cell_volume / volume


@dataclass(frozen=True, eq=False)
class CoveringScan:
    """Densities of every covering cylinder, indexed [time index, space index]."""

    radius: float
    centers: np.ndarray
    tops: np.ndarray
    densities: np.ndarray

    def cylinder(self, k: int, j: int) -> ParabolicCylinder:
        return ParabolicCylinder(center=tuple(self.centers[j]), top_time=float(self.tops[k]), radius=self.radius)


def covering_cylinders(rho: float, radius: float, N: int, origin=None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Half-overlapping covering of B_rho x (-1, -1 + rho^2] by cylinders Q_radius.

    Space stride equals the radius, time stride half the height. Returns
    (centers (n, N), tops (k,)), both in lexicographic order.
    """
    if not 0 < radius <= rho:
        raise DomainViolation(f"covering radius {radius} must lie in (0, {rho}]")
    origin = np.zeros(N) if origin is None else np.asarray(origin, dtype=float)
    count = int(math.ceil(2 * rho / radius - 1e-12)) + 1
    axis = -rho + radius * np.arange(count)
    grids = np.meshgrid(*([axis] * N), indexing="ij")
    centers = np.stack(grids, axis=-1).reshape(-1, N)
    centers = centers[np.linalg.norm(centers, axis=1) < rho + radius] + origin

    top_limit = -1.0 + rho ** 2
    stride = radius ** 2 / 2
    n_tops = int(math.ceil((top_limit - (-1.0 + radius ** 2)) / stride - 1e-12)) + 1
    tops = np.minimum(-1.0 + radius ** 2 + stride * np.arange(n_tops), top_limit)
    return centers, np.unique(tops)


def scan_covering(gamma: IndicatorSet, rho: float, radius: float) -> CoveringScan:
    lattice = gamma.lattice
    centers, tops = covering_cylinders(rho, radius, lattice.N, origin=lattice.center)
    mask = gamma.mask.reshape(lattice.time_cells, -1).astype(float)
    per_center = np.zeros((lattice.time_cells, len(centers)))
    for j, c in enumerate(centers):
        near, weights = _space_weights(lattice, c, radius)
        per_center[:, j] = mask[:, near] @ weights
    mass = _time_weights(lattice, tops, radius ** 2) @ per_center
    volume = ball_volume(lattice.N, radius) * radius ** 2
    return CoveringScan(radius=radius, centers=centers, tops=tops, densities=mass / volume)


def pigeonhole_cylinder(gamma: IndicatorSet, c1: float, m: float, kappa: float) -> ParabolicCylinder:
    """
    Pick a covering cylinder Q* of radius c1 m / 4 inside the shrunk lower
    cylinder with |Gamma cap Q*| >= (1 - kappa) m |Q*|.

    The first qualifying covering cylinder in lexicographic (time, space)
    order is returned.
    """
    if not 0 < c1 * m < 1:
        raise DomainViolation(f"need 0 < c1*m < 1, got {c1 * m}")
    rho = 1.0 - c1 * m
    radius = c1 * m / 4.0
    target = (1.0 - kappa) * m

    shrunk = lower_cylinder(rho, gamma.lattice.N)
    available = cylinder_mass(gamma, ParabolicCylinder(gamma.lattice.center, shrunk.top_time, rho))
    if available < target - _TIE_TOL:
        logger.warning(f"Gamma mass {available:.4g} in the shrunk cylinder is below (1-kappa)m = {target:.4g}")

    scan = scan_covering(gamma, rho, radius)
    flat = scan.densities.ravel()
    best = flat.max() if flat.size else 0.0
    if best < target - _TIE_TOL:
        raise DomainViolation(
            f"no qualifying cylinder: best density {best:.4g} < (1-kappa)m = {target:.4g}"
        )
    first = int(np.flatnonzero(flat >= target - _TIE_TOL)[0])
    k, j = np.unravel_index(first, scan.densities.shape)
    chosen = scan.cylinder(int(k), int(j))
    logger.debug(f"pigeonhole cylinder {chosen} with density {flat[first]:.4g}")
    return chosen
