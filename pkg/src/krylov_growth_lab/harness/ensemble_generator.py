"""
ensemble_generator.py

Seeded ensemble members: a source 0 <= f <= 1 on the lattice cells, an
operator (Pucci minimum or a random linear field) and the solution of
u_t - op(D^2 u) = f with zero parabolic boundary data.

Member `index` of seed `seed` draws from np.random.default_rng([seed, index]),
so members are independent of each other and of the ensemble size.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

from krylov_growth_lab.errors import ConfigurationError, EllipticityViolation
from krylov_growth_lab.geometry.cylinders import ParabolicCylinder
from krylov_growth_lab.geometry.indicator_set import IndicatorSet
from krylov_growth_lab.geometry.lattice import SpaceTimeLattice
from krylov_growth_lab.pucci.pucci_operators import EllipticityPair, linear_dominates
from krylov_growth_lab.solver.finite_difference_solver import CellSource, FiniteDifferenceSolver
from krylov_growth_lab.solver.grid import Grid, GridFunction, OperatorSpec

logger = logging.getLogger(__name__)

SOURCE_FAMILIES = ("indicator-cells", "smooth-bumps", "level-set")
COEFFICIENT_FAMILIES = ("pucci", "random-linear", "mixed")
DOMINATION_PROBES = 8


@dataclass(frozen=True)
class EnsembleConfig:
    seed: int = 42
    count: int = 50
    source_family: str = "indicator-cells"
    coefficient_family: str = "mixed"
    N: int = 1
    nodes: int = 257
    time_cells: int = 128
    kappa: float = 0.5
    lam: float = 1.0
    Lam: float = 1.0
    m_range: Tuple[float, float] = (0.05, 0.5)
    cfl_factor: float = 0.9
    frames: int = 32
    corrupt_source: bool = False

    def __post_init__(self):
        if self.source_family not in SOURCE_FAMILIES:
            raise ConfigurationError(f"source_family must be one of {SOURCE_FAMILIES}, got {self.source_family!r}")
        if self.coefficient_family not in COEFFICIENT_FAMILIES:
            raise ConfigurationError(
                f"coefficient_family must be one of {COEFFICIENT_FAMILIES}, got {self.coefficient_family!r}"
            )
        if self.count < 0:
            raise ConfigurationError(f"count must be nonnegative, got {self.count}")
        lo, hi = self.m_range
        if not 0 < lo <= hi <= 1:
            raise ConfigurationError(f"m_range must satisfy 0 < lo <= hi <= 1, got {self.m_range}")

    @property
    def ell(self) -> EllipticityPair:
        return EllipticityPair(self.lam, self.Lam)

    def lattice(self, nodes: Optional[int] = None) -> SpaceTimeLattice:
        return SpaceTimeLattice.for_cylinder(ParabolicCylinder.unit(self.N), nodes or self.nodes, self.time_cells)

    def grid(self, nodes: Optional[int] = None) -> Grid:
        return Grid(
            lattice=self.lattice(nodes),
            Lam=self.Lam,
            cfl_factor=self.cfl_factor,
            frames=self.frames,
            snapshots=self.time_cells,
        )

    def as_dict(self) -> Dict[str, Any]:
        record = {k: getattr(self, k) for k in self.__dataclass_fields__}
        record["m_range"] = list(self.m_range)
        return record


@dataclass(eq=False)
class Member:
    index: int
    source: np.ndarray  # (time_cells, *shape), 0 <= f <= 1
    gamma: IndicatorSet
    level: float
    op: OperatorSpec
    solution: GridFunction
    dominated: bool = True
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def lattice(self) -> SpaceTimeLattice:
        return self.gamma.lattice

    @property
    def m(self) -> float:
        return self.gamma.normalized_measure

    @property
    def f_norm(self) -> float:
        return source_norm(self.source, self.lattice)


def source_norm(values: np.ndarray, lattice: SpaceTimeLattice) -> float:
    """L^{N+1} norm over the rasterized Q_1, normalized so that f = 1 has norm 1."""
    p = lattice.N + 1
    cells = np.abs(values)[:, lattice.interior]
    return float(np.mean(cells ** p) ** (1.0 / p))


def _random_cylinder(rng: np.random.Generator, N: int, max_radius: float) -> ParabolicCylinder:
    radius = rng.uniform(0.1, max_radius)
    center = rng.uniform(-1.0 + radius, 1.0 - radius, size=N)
    if N == 2 and np.linalg.norm(center) > 1.0 - radius:
        center *= (1.0 - radius) / np.linalg.norm(center)
    top = rng.uniform(-1.0 + radius ** 2, 0.0)
    return ParabolicCylinder(tuple(center), top, radius)


def indicator_source(rng: np.random.Generator, lattice: SpaceTimeLattice, target: float) -> Tuple[np.ndarray, float]:
    """Union of random cylinders grown until its measure reaches the target."""
    mask = np.zeros((lattice.time_cells,) + lattice.shape, dtype=bool)
    full = float(lattice.domain_cells)
    for _ in range(200):
        if mask.sum() / full >= target:
            break
        mask |= lattice.cylinder_mask(_random_cylinder(rng, lattice.N, 0.6))
    return mask.astype(float), 0.5


def bump_source(rng: np.random.Generator, lattice: SpaceTimeLattice, target: float) -> Tuple[np.ndarray, float]:
    """Clipped sum of Gaussian space-time bumps; Gamma = {f > 1/2}."""
    points = lattice.points
    times = lattice.cell_times
    count = max(1, int(round(8 * target)) + 1)
    values = np.zeros((lattice.time_cells,) + lattice.shape)
    for _ in range(count):
        center = rng.uniform(-0.7, 0.7, size=lattice.N)
        t_center = rng.uniform(-1.0, 0.0)
        width = rng.uniform(0.15, 0.4)
        space = np.exp(-np.sum((points - center) ** 2, axis=-1) / (2 * width ** 2))
        time = np.exp(-((times - t_center) ** 2) / (2 * width ** 2))
        values += time.reshape((-1,) + (1,) * lattice.N) * space[np.newaxis]
    return np.clip(1.5 * values, 0.0, 1.0), 0.5


def level_set_source(rng: np.random.Generator, lattice: SpaceTimeLattice, target: float) -> Tuple[np.ndarray, float]:
    """Random smooth field rescaled to [0, 1], cut at the quantile leaving measure `target` above it."""
    points = lattice.points
    times = lattice.cell_times.reshape((-1,) + (1,) * lattice.N)
    wave = np.zeros((lattice.time_cells,) + lattice.shape)
    for _ in range(6):
        k = rng.normal(scale=3.0, size=lattice.N)
        omega = rng.normal(scale=3.0)
        phase = rng.uniform(0, 2 * np.pi)
        wave += np.cos(points @ k + omega * times + phase)
    inside = wave[:, lattice.interior]
    lo, hi = inside.min(), inside.max()
    values = np.clip((wave - lo) / (hi - lo), 0.0, 1.0) if hi > lo else np.zeros_like(wave)
    level = float(np.quantile(values[:, lattice.interior], 1.0 - target))
    return values, max(level, 1e-6)


SOURCE_BUILDERS = {
    "indicator-cells": indicator_source,
    "smooth-bumps": bump_source,
    "level-set": level_set_source,
}


@dataclass(frozen=True)
class CheckerboardField:
    """Coefficients constant on dyadic space-time cells of Q_1."""

    depth: int
    table: np.ndarray  # (2^depth time cells, (2^depth,) * N space cells, N, N)

    def __call__(self, points: np.ndarray, t: float) -> np.ndarray:
        cells = 2 ** self.depth
        it = min(max(int(np.floor((t + 1.0) * cells)), 0), cells - 1)
        index = np.clip(np.floor((points + 1.0) * 0.5 * cells).astype(int), 0, cells - 1)
        return self.table[it][tuple(index[..., i] for i in range(points.shape[-1]))]


def random_checkerboard(rng: np.random.Generator, ell: EllipticityPair, N: int, depth: int) -> CheckerboardField:
    """
    Random admissible matrices; for N = 2 the off-diagonal entry keeps
    Gershgorin discs inside [lam, Lam], so the nine-point scheme stays monotone.
    """
    cells = 2 ** depth
    shape = (cells,) + (cells,) * N
    if N == 1:
        table = rng.uniform(ell.lam, ell.Lam, size=shape)[..., np.newaxis, np.newaxis]
        return CheckerboardField(depth, table)
    d = rng.uniform(ell.lam, ell.Lam, size=shape + (2,))
    room = np.minimum(d.min(axis=-1) - ell.lam, ell.Lam - d.max(axis=-1))
    b = rng.uniform(-1.0, 1.0, size=shape) * np.maximum(room, 0.0)
    table = np.empty(shape + (2, 2))
    table[..., 0, 0], table[..., 1, 1] = d[..., 0], d[..., 1]
    table[..., 0, 1] = table[..., 1, 0] = b
    return CheckerboardField(depth, table)


def certify_domination(rng: np.random.Generator, coefficients: CheckerboardField, ell: EllipticityPair) -> bool:
    """tr(A M) >= M-(M) for every table matrix and a few random Hessians."""
    N = coefficients.table.shape[-1]
    matrices = coefficients.table.reshape(-1, N, N)
    for _ in range(DOMINATION_PROBES):
        M = rng.normal(size=(N, N))
        M = 0.5 * (M + M.T)
        for A in matrices:
            try:
                if not linear_dominates(A, M, ell):
                    return False
            except EllipticityViolation:
                return False
    return True


def member_operator(config: EnsembleConfig, index: int, rng: np.random.Generator) -> Tuple[OperatorSpec, bool]:
    family = config.coefficient_family
    if family == "mixed":
        family = "pucci" if index % 2 == 0 else "random-linear"
    if family == "pucci":
        return OperatorSpec.pucci_minus(config.ell), True
    depth = int(rng.integers(2, 5))
    coefficients = random_checkerboard(rng, config.ell, config.N, depth)
    dominated = certify_domination(rng, coefficients, config.ell)
    return OperatorSpec.linear(config.ell, coefficients, label=f"checkerboard-{depth}"), dominated


def generate_member(config: EnsembleConfig, index: int, nodes: Optional[int] = None) -> Member:
    """Draw, solve and return member `index`; `nodes` overrides the grid resolution."""
    rng = np.random.default_rng([config.seed, index])
    lattice = config.lattice()
    target = float(rng.uniform(*config.m_range))
    values, threshold = SOURCE_BUILDERS[config.source_family](rng, lattice, target)
    op, dominated = member_operator(config, index, rng)

    if nodes is not None and nodes != lattice.nodes:
        values = _resample_cells(values, lattice, config.lattice(nodes))
        lattice = config.lattice(nodes)

    gamma = IndicatorSet.from_level_set(lattice, values, threshold)
    level = float(values[gamma.mask].min()) if not gamma.is_empty() else 0.0
    forcing = -values if config.corrupt_source else values
    solution = FiniteDifferenceSolver(config.grid(lattice.nodes), op).solve(CellSource(lattice, forcing))
    logger.debug(f"member {index}: m={gamma.normalized_measure:.4f}, op={op.kind} {op.label}")
    return Member(
        index=index,
        source=values,
        gamma=gamma,
        level=level,
        op=op,
        solution=solution,
        dominated=dominated,
        meta={"target_m": target, "family": config.source_family},
    )


def _resample_cells(values: np.ndarray, coarse: SpaceTimeLattice, fine: SpaceTimeLattice) -> np.ndarray:
    """Nearest coarse node for every fine node (same time cells)."""
    ratio = (fine.nodes - 1) // (coarse.nodes - 1)
    nearest = np.rint(np.arange(fine.nodes) / ratio).astype(int)
    out = values
    for axis in range(1, fine.N + 1):
        out = np.take(out, nearest, axis=axis)
    return out


def with_overrides(config: EnsembleConfig, **changes: Any) -> EnsembleConfig:
    return replace(config, **{k: v for k, v in changes.items() if v is not None})
