"""
fabes_stroock_fit.py

Empirical power law for ratios of fundamental solutions,

    w(x, t; E) / w(x, t; Q_r) >= C (|E| / |Q_r|)^sigma,

probed above the enlarged cylinder B_{3r} x (t0 - 9r^2, t0 + 9r^2].
The solve runs on B_1 x (-height, 0] so that the enlarged cylinder fits for
radii up to 1/3 without touching the top.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np

from krylov_growth_lab.constants.constants_pipeline import FSConfig
from krylov_growth_lab.errors import DomainViolation, GeometryViolation
from krylov_growth_lab.geometry.cylinders import ParabolicCylinder
from krylov_growth_lab.geometry.indicator_set import IndicatorSet
from krylov_growth_lab.geometry.lattice import SpaceTimeLattice
from krylov_growth_lab.pucci.pucci_operators import EllipticityPair
from krylov_growth_lab.solver.finite_difference_solver import fundamental_solution
from krylov_growth_lab.solver.grid import GridFunction

logger = logging.getLogger(__name__)

FS_HEIGHT = 2.0
CELLS_PER_UNIT = 128
PROBE_RADIUS = 0.5
PROBE_FLOOR = 1e-12
MIN_DENSITY = 0.05


@dataclass(frozen=True)
class FSSample:
    density: float
    ratio: float
    probe_x: Tuple[float, ...]
    probe_t: float


@dataclass(frozen=True)
class FSFitReport:
    r: float
    N: int
    seed: int
    samples: Tuple[FSSample, ...]
    sigma_hat: float
    C_hat: float
    r_squared: float

    def to_fs_config(self) -> FSConfig:
        return FSConfig(sigma=self.sigma_hat, C_cfs=self.C_hat, source="empirical")

    def as_dict(self) -> Dict[str, Any]:
        return {
            "r": self.r,
            "N": self.N,
            "seed": self.seed,
            "sigma_hat": self.sigma_hat,
            "C_hat": self.C_hat,
            "r_squared": self.r_squared,
            "samples": [
                {"density": s.density, "ratio": s.ratio, "probe_x": list(s.probe_x), "probe_t": s.probe_t}
                for s in self.samples
            ],
        }


def fs_domain(r: float, N: int, nodes: int, height: float = FS_HEIGHT) -> Tuple[SpaceTimeLattice, ParabolicCylinder]:
    """Lattice on B_1 x (-height, 0] and the source cylinder Q_r(0, -height + 9 r^2)."""
    t0 = -height + 9 * r ** 2
    if 3 * r > 1.0 or t0 + 9 * r ** 2 > 0.0:
        raise GeometryViolation(f"enlarged cylinder of radius {3 * r} does not fit in B_1 x (-{height}, 0]")
    lattice = SpaceTimeLattice(
        N=N,
        nodes=nodes,
        time_cells=int(round(CELLS_PER_UNIT * height)),
        t_bottom=-height,
        t_top=0.0,
    )
    return lattice, ParabolicCylinder((0.0,) * N, t0, r)


def probe_window(w_full: GridFunction, cyl: ParabolicCylinder) -> Tuple[np.ndarray, np.ndarray]:
    """Snapshots above the enlarged cylinder and interior nodes with |x| <= 1/2."""
    levels = w_full.times > cyl.top_time + 9 * cyl.radius ** 2 + 1e-12
    nodes = (w_full.lattice.distance <= PROBE_RADIUS) & w_full.lattice.interior
    return levels, nodes


def fundamental_ratio(
    w_subset: GridFunction, w_full: GridFunction, cyl: ParabolicCylinder
) -> Tuple[float, Tuple[float, ...], float]:
    """(min ratio, probe x, probe t) over probes where w(Q_r) exceeds the floor."""
    levels, nodes = probe_window(w_full, cyl)
    full = w_full.values[levels][:, nodes]
    part = w_subset.values[levels][:, nodes]
    valid = full > PROBE_FLOOR
    if not valid.any():
        raise DomainViolation("no admissible probe carries a positive fundamental solution")
    ratios = np.where(valid, part / np.where(valid, full, 1.0), np.inf)
    k, j = np.unravel_index(int(np.argmin(ratios)), ratios.shape)
    x = w_full.lattice.points[nodes][j]
    t = w_full.times[levels][k]
    return float(ratios[k, j]), tuple(float(v) for v in x), float(t)


def random_subset(rng: np.random.Generator, cylinder: IndicatorSet, density: float) -> IndicatorSet:
    """Scattered cells of the cylinder, each kept with probability `density`."""
    keep = rng.random(cylinder.mask.shape) < density
    return IndicatorSet(cylinder.lattice, cylinder.mask & keep)


def fit_power_law(densities: np.ndarray, ratios: np.ndarray) -> Tuple[float, float, float]:
    """Least squares log ratio = sigma log density + log C; returns (sigma, C, R^2)."""
    x, y = np.log(densities), np.log(ratios)
    sigma, log_c = np.polyfit(x, y, 1)
    residual = y - (sigma * x + log_c)
    total = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - float(np.sum(residual ** 2)) / total if total > 0 else 1.0
    return float(sigma), float(math.exp(log_c)), r_squared


def fs_fit(
    r: float = 0.25,
    sample_count: int = 40,
    seed: int = 17,
    ell: EllipticityPair = EllipticityPair(1.0, 1.0),
    N: int = 1,
    nodes: int = 129,
    frames: int = 32,
    cfl_factor: float = 0.9,
) -> FSFitReport:
    if sample_count < 2:
        raise DomainViolation(f"need at least two samples for a fit, got {sample_count}")
    rng = np.random.default_rng(seed)
    lattice, cyl = fs_domain(r, N, nodes)
    full_set = IndicatorSet.from_cylinder(lattice, cyl)
    if full_set.is_empty():
        raise DomainViolation(f"Q_r with r={r} contains no lattice cell at {nodes} nodes")
    w_full = fundamental_solution(full_set, ell, cfl_factor=cfl_factor, frames=frames)

    targets = np.append(rng.uniform(MIN_DENSITY, 1.0, size=sample_count - 1), 1.0)
    samples = []
    for target in targets:
        subset = full_set if target >= 1.0 else random_subset(rng, full_set, float(target))
        if subset.is_empty():
            continue
        w_subset = w_full if subset is full_set else fundamental_solution(subset, ell, cfl_factor=cfl_factor, frames=frames)
        ratio, x, t = fundamental_ratio(w_subset, w_full, cyl)
        samples.append(FSSample(subset.cell_count / full_set.cell_count, ratio, x, t))

    densities = np.array([s.density for s in samples])
    ratios = np.array([s.ratio for s in samples])
    sigma, C, r_squared = fit_power_law(densities, ratios)
    logger.info(f"Fabes-Stroock fit: sigma_hat={sigma:.4f}, C_hat={C:.4f}, R^2={r_squared:.4f} ({len(samples)} samples)")
    return FSFitReport(r, N, seed, tuple(samples), sigma, C, r_squared)
