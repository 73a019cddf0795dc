"""
finite_difference_solver.py

Monotone explicit scheme for u_t - op(D^2 u) = g on a rasterized cylinder.

- N = 1: three-point second difference.
- N = 2, Pucci operators: wide-stencil frame extremum. Each frame direction
  uses second differences along +-s*v with bilinear interpolation; arms that
  would leave the ball are shortened to the sphere and read boundary data
  there.
- N = 2, linear operators: nine-point stencil, monotone when
  a11 >= |a12| and a22 >= |a12|.

Every update is a nondecreasing function of the previous level when
dt <= h^2 / (2 N Lam), which gives the discrete comparison principle.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from krylov_growth_lab.errors import CFLViolation, DomainViolation, EllipticityViolation
from krylov_growth_lab.geometry.indicator_set import IndicatorSet
from krylov_growth_lab.geometry.lattice import SpaceTimeLattice
from krylov_growth_lab.pucci.pucci_operators import EllipticityPair, frame_vectors
from krylov_growth_lab.solver.grid import Grid, GridFunction, OperatorSpec, validate_coefficients

logger = logging.getLogger(__name__)

BoundaryFn = Callable[[np.ndarray, float], np.ndarray]
_CFL_SLACK = 1e-12


def zero_boundary(points: np.ndarray, t: float) -> np.ndarray:
    return np.zeros(points.shape[:-1])


class SourceField:
    """Source term sampled once per time step at the step midpoint."""

    def at(self, t: float) -> np.ndarray:
        raise NotImplementedError


@dataclass(eq=False)
class FunctionSource(SourceField):
    lattice: SpaceTimeLattice
    fn: Callable[[np.ndarray, float], np.ndarray]
    steady: bool = False
    _cache: Optional[np.ndarray] = field(default=None, init=False, repr=False)

    def at(self, t: float) -> np.ndarray:
        if self.steady and self._cache is not None:
            return self._cache
        values = np.broadcast_to(np.asarray(self.fn(self.lattice.points, t), dtype=float), self.lattice.shape)
        if self.steady:
            self._cache = values
        return values


@dataclass(eq=False)
class CellSource(SourceField):
    """Piecewise constant source: values[l] holds on the time cell (t_l, t_l + tau]."""

    lattice: SpaceTimeLattice
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.lattice.time_cells,) + self.lattice.shape
        if self.values.shape != expected:
            raise DomainViolation(f"cell source has shape {self.values.shape}, expected {expected}")

    def at(self, t: float) -> np.ndarray:
        return self.values[self.lattice.time_cell_index(t)]


SourceLike = Union[None, float, SourceField, IndicatorSet, np.ndarray, Callable]


def as_source(source: SourceLike, lattice: SpaceTimeLattice) -> SourceField:
    if isinstance(source, SourceField):
        return source
    if source is None:
        return FunctionSource(lattice, lambda points, t: 0.0, steady=True)
    if isinstance(source, IndicatorSet):
        return CellSource(lattice, source.mask.astype(float))
    if isinstance(source, np.ndarray):
        return CellSource(lattice, source)
    if callable(source):
        return FunctionSource(lattice, source)
    value = float(source)
    return FunctionSource(lattice, lambda points, t: value, steady=True)


@dataclass
class _WideStencil:
    """Frame arms of the N = 2 wide stencil at the interior nodes."""

    corners: np.ndarray  # (K, 2, 2, m, 4) flat node indices
    weights: np.ndarray  # (K, 2, 2, m, 4) bilinear weights
    lengths: np.ndarray  # (K, 2, 2, m)
    short: np.ndarray  # (K, 2, 2, m) arm ends on the sphere
    sphere_points: np.ndarray  # (S, 2) ends of the shortened arms


def _build_wide_stencil(lattice: SpaceTimeLattice, arm: float, frames: int) -> _WideStencil:
    n, h, R = lattice.nodes, lattice.h, lattice.radius
    center = np.asarray(lattice.center)
    x = lattice.points[lattice.interior]  # (m, 2)
    y = x - center
    vectors = frame_vectors(frames)  # (K, 2, 2)
    signs = np.array([1.0, -1.0])

    # direction (K, 2, 2, 2): frame k, vector i, sign, component
    directions = vectors[:, :, np.newaxis, :] * signs[np.newaxis, np.newaxis, :, np.newaxis]
    b = np.einsum("kisa,ma->kism", directions, y)
    reach = -b + np.sqrt(np.maximum(b ** 2 - np.sum(y ** 2, axis=1) + R ** 2, 0.0))
    short = reach < arm - 1e-12
    lengths = np.where(short, reach, arm)
    ends = x + lengths[..., np.newaxis] * directions[:, :, :, np.newaxis, :]

    origin = np.array([axis[0] for axis in lattice.axes])
    frac = (ends - origin) / h
    low = np.clip(np.floor(frac).astype(int), 0, n - 2)
    w = np.clip(frac - low, 0.0, 1.0)
    i0, j0 = low[..., 0], low[..., 1]
    wx, wy = w[..., 0], w[..., 1]
    corners = np.stack([i0 * n + j0, (i0 + 1) * n + j0, i0 * n + j0 + 1, (i0 + 1) * n + j0 + 1], axis=-1)
    weights = np.stack([(1 - wx) * (1 - wy), wx * (1 - wy), (1 - wx) * wy, wx * wy], axis=-1)
    return _WideStencil(corners, weights, lengths, short, ends[short])


class FiniteDifferenceSolver:
    """Explicit monotone solver for one operator on one grid."""

    def __init__(self, grid: Grid, op: OperatorSpec, boundary: Optional[BoundaryFn] = None):
        if op.ell.Lam > grid.Lam + 1e-12:
            raise CFLViolation(f"grid was sized for Lambda={grid.Lam}, operator has Lambda={op.ell.Lam}")
        self.grid = grid
        self.op = op
        self.boundary = boundary or zero_boundary
        self.lattice = grid.lattice
        self._interior = self.lattice.interior
        self._boundary_points = self.lattice.points[~self._interior]
        self._interior_index = np.flatnonzero(self._interior)
        self._coefficients: Dict[int, Tuple[np.ndarray, ...]] = {}
        self._stencil: Optional[_WideStencil] = None
        if grid.N == 2 and op.kind != "linear":
            self._stencil = _build_wide_stencil(self.lattice, grid.arm, grid.frames)
            logger.debug(
                f"Wide stencil: {grid.frames} frames, arm {grid.arm:.4g}, "
                f"{int(self._stencil.short.sum())} shortened arms"
            )

    def _linear_coefficients(self, t: float) -> Tuple[np.ndarray, ...]:
        """Interior coefficients frozen over the time cell containing t."""
        cell = self.lattice.time_cell_index(t)
        cached = self._coefficients.get(cell)
        if cached is not None:
            return cached
        points = self.lattice.points[self._interior]
        A = self.op.coefficient_values(points, float(self.lattice.cell_times[cell]))
        validate_coefficients(A, self.op.ell)
        if self.grid.N == 1:
            cached = (A[..., 0, 0],)
        else:
            a11, a12, a22 = A[..., 0, 0], A[..., 0, 1], A[..., 1, 1]
            if np.any(np.abs(a12) > np.minimum(a11, a22) + 1e-12):
                raise EllipticityViolation(
                    "coefficients are not diagonally dominant; the nine-point scheme would not be monotone"
                )
            cached = (a11, a12, a22)
        self._coefficients[cell] = cached
        return cached

    def _extremum(self, D: np.ndarray) -> np.ndarray:
        lam, Lam = self.op.ell.lam, self.op.ell.Lam
        pos, neg = np.maximum(D, 0.0), np.maximum(-D, 0.0)
        if self.op.kind == "pucci_minus":
            return lam * pos - Lam * neg
        return Lam * pos - lam * neg

    def _operator_1d(self, u: np.ndarray, t: float) -> np.ndarray:
        h = self.lattice.h
        D = np.zeros_like(u)
        D[1:-1] = (u[2:] + u[:-2] - 2.0 * u[1:-1]) / h ** 2
        D = D[self._interior]
        if self.op.kind == "linear":
            (a,) = self._linear_coefficients(t)
            return a * D
        return self._extremum(D)

    def _operator_wide(self, u: np.ndarray, t: float) -> np.ndarray:
        st = self._stencil
        flat = u.reshape(-1)
        ends = np.einsum("...c,...c->...", flat[st.corners], st.weights)
        if st.sphere_points.size:
            ends[st.short] = self.boundary(st.sphere_points, t)
        u0 = flat[self._interior_index]
        sp, sm = st.lengths[:, :, 0], st.lengths[:, :, 1]
        D = 2.0 / (sp + sm) * ((ends[:, :, 0] - u0) / sp + (ends[:, :, 1] - u0) / sm)
        per_frame = self._extremum(D).sum(axis=1)
        if self.op.kind == "pucci_minus":
            return per_frame.min(axis=0)
        return per_frame.max(axis=0)

    def _operator_nine_point(self, u: np.ndarray, t: float) -> np.ndarray:
        a11, a12, a22 = self._linear_coefficients(t)
        h2 = self.lattice.h ** 2
        c = u[1:-1, 1:-1]
        east, west, north, south = u[2:, 1:-1], u[:-2, 1:-1], u[1:-1, 2:], u[1:-1, :-2]
        axis_sum = east + west + north + south
        dxx = (east + west - 2.0 * c) / h2
        dyy = (north + south - 2.0 * c) / h2
        cross_pos = (u[2:, 2:] + u[:-2, :-2] + 2.0 * c - axis_sum) / h2
        cross_neg = (u[2:, :-2] + u[:-2, 2:] + 2.0 * c - axis_sum) / h2
        inner = self._interior[1:-1, 1:-1]
        return (
            a11 * dxx[inner]
            + a22 * dyy[inner]
            + np.maximum(a12, 0.0) * cross_pos[inner]
            - np.maximum(-a12, 0.0) * cross_neg[inner]
        )

    def apply_operator(self, u: np.ndarray, t: float) -> np.ndarray:
        """Discrete op(D^2 u) at the interior nodes; zero elsewhere."""
        u = np.asarray(u, dtype=float)
        if u.shape != self.lattice.shape:
            raise DomainViolation(f"level has shape {u.shape}, expected {self.lattice.shape}")
        if self.grid.N == 1:
            F = self._operator_1d(u, t)
        elif self._stencil is not None:
            F = self._operator_wide(u, t)
        else:
            F = self._operator_nine_point(u, t)
        out = np.zeros_like(u)
        out[self._interior] = F
        return out

    def boundary_values(self, t: float) -> np.ndarray:
        return np.asarray(self.boundary(self._boundary_points, t), dtype=float)

    def step(self, u: np.ndarray, g: np.ndarray, t: float, dt: Optional[float] = None) -> np.ndarray:
        """Advance one level from time t; boundary nodes take boundary data at t + dt."""
        dt = self.grid.dt if dt is None else dt
        if dt > self.grid.dt_limit * (1 + _CFL_SLACK):
            raise CFLViolation(f"dt={dt:.3e} exceeds the monotone limit {self.grid.dt_limit:.3e}")
        F = self.apply_operator(u, t)
        new = np.array(u, dtype=float, copy=True)
        new[self._interior] += dt * (F[self._interior] + np.asarray(g)[self._interior])
        new[~self._interior] = self.boundary_values(t + dt)
        return new

    def initial_level(self, initial: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> np.ndarray:
        t0 = self.lattice.t_bottom
        if initial is None:
            u = self.boundary(self.lattice.points, t0)
        else:
            u = initial(self.lattice.points)
        return np.array(np.broadcast_to(u, self.lattice.shape), dtype=float)

    def solve(
        self,
        source: SourceLike = None,
        initial: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        role: str = "supersolution",
    ) -> GridFunction:
        grid = self.grid
        src = as_source(source, self.lattice)
        u = self.initial_level(initial)
        dt = grid.dt
        snapshots = [u]
        t = self.lattice.t_bottom
        for k in range(grid.time_levels):
            t = self.lattice.t_bottom + k * dt
            u = self.step(u, src.at(t + 0.5 * dt), t, dt)
            if (k + 1) % grid.save_every == 0:
                snapshots.append(u)
        logger.debug(f"Solved {self.op.kind} on N={grid.N}, h={grid.h:.4g}: {grid.time_levels} levels, dt={dt:.3e}")
        return GridFunction(
            lattice=self.lattice,
            times=grid.snapshot_times,
            values=np.stack(snapshots),
            role=role,
            dt=dt,
        )


def solve(
    grid: Grid,
    op: OperatorSpec,
    source: SourceLike = None,
    boundary: Optional[BoundaryFn] = None,
    initial: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> GridFunction:
    return FiniteDifferenceSolver(grid, op, boundary).solve(source, initial)


def fundamental_solution(
    gamma: IndicatorSet,
    ell: EllipticityPair,
    cfl_factor: float = 0.9,
    frames: int = 32,
    snapshots: Optional[int] = None,
) -> GridFunction:
    """
    Discrete solution of w_t - M-(D^2 w) = chi_Gamma, w = 0 on the parabolic boundary.
    """
    lattice = gamma.lattice
    grid = Grid(
        lattice=lattice,
        Lam=ell.Lam,
        cfl_factor=cfl_factor,
        frames=frames,
        snapshots=snapshots or lattice.time_cells,
    )
    solver = FiniteDifferenceSolver(grid, OperatorSpec.pucci_minus(ell))
    return solver.solve(gamma, role="fundamental")


def comparison_test(
    solver: FiniteDifferenceSolver,
    lower: Tuple[SourceLike, Optional[BoundaryFn]],
    upper: Tuple[SourceLike, Optional[BoundaryFn]],
    tol: float = 1e-12,
) -> bool:
    """
    Discrete comparison: if the lower data (source, boundary) sits below the
    upper data, the lower solution sits below the upper one everywhere.
    Returns True when the implication holds (vacuously if the data are not ordered).
    """
    lattice = solver.lattice
    src_lo, src_hi = as_source(lower[0], lattice), as_source(upper[0], lattice)
    bnd_lo, bnd_hi = lower[1] or zero_boundary, upper[1] or zero_boundary

    grid = solver.grid
    boundary_points = lattice.points[~lattice.interior]
    times = lattice.t_bottom + grid.dt * np.arange(grid.time_levels + 1)
    ordered = bool(np.all(bnd_lo(lattice.points, times[0]) <= bnd_hi(lattice.points, times[0]) + tol))
    for t in times[1:]:
        if not ordered:
            break
        ordered = bool(np.all(bnd_lo(boundary_points, t) <= bnd_hi(boundary_points, t) + tol))
    for t in times[:-1] + 0.5 * grid.dt:
        if not ordered:
            break
        ordered = bool(np.all(src_lo.at(t) <= src_hi.at(t) + tol))
    if not ordered:
        logger.debug("Comparison data are not ordered; implication holds vacuously")
        return True

    u = FiniteDifferenceSolver(grid, solver.op, bnd_lo).solve(src_lo)
    v = FiniteDifferenceSolver(grid, solver.op, bnd_hi).solve(src_hi)
    return bool(np.all(u.values <= v.values + tol))
