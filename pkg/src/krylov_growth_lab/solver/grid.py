"""
grid.py

Discretization data for the explicit solver: the time-stepping grid, the
operator description and the GridFunction container with its text format.

GridFunction text format
------------------------
    # grid-function
    role supersolution
    N 1
    h 0.0078125
    dt 2.7e-05
    dims 129 257
    radius 1.0
    center 0.0
    t_bottom -1.0
    t_top 0.0
    time_cells 128
    times <L snapshot times>
    <one line per snapshot, row-major values>
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional, Tuple, Union

import numpy as np
from typing_extensions import Literal

from krylov_growth_lab.errors import DomainViolation, EllipticityViolation
from krylov_growth_lab.geometry.cylinders import ParabolicCylinder
from krylov_growth_lab.geometry.lattice import SpaceTimeLattice
from krylov_growth_lab.pucci.pucci_operators import DEFAULT_FRAMES, EllipticityPair, eigenvalues_batch

logger = logging.getLogger(__name__)

OPERATOR_KINDS = ("pucci_minus", "pucci_plus", "linear")
ROLES = ("supersolution", "fundamental", "source", "coefficients")
DEFAULT_NODES = {1: 257, 2: 97}
CoefficientField = Callable[[np.ndarray, float], np.ndarray]
OperatorKind = Literal["pucci_minus", "pucci_plus", "linear"]
Role = Literal["supersolution", "fundamental", "source", "coefficients"]


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """
    Spatial operator of u_t - op(u) = g.

    `coefficients(points, t)` returns A at every node, shape (*shape, N, N);
    a linear operator without coefficients uses A = lam * I.
    """

    kind: OperatorKind
    ell: EllipticityPair
    coefficients: Optional[CoefficientField] = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise DomainViolation(f"operator kind must be one of {OPERATOR_KINDS}, got {self.kind!r}")
        if self.coefficients is not None and self.kind != "linear":
            raise DomainViolation("coefficient fields only apply to linear operators")

    @classmethod
    def pucci_minus(cls, ell: EllipticityPair) -> "OperatorSpec":
        return cls("pucci_minus", ell)

    @classmethod
    def pucci_plus(cls, ell: EllipticityPair) -> "OperatorSpec":
        return cls("pucci_plus", ell)

    @classmethod
    def linear(cls, ell: EllipticityPair, coefficients: Optional[CoefficientField] = None, label: str = "") -> "OperatorSpec":
        return cls("linear", ell, coefficients, label)

    def coefficient_values(self, points: np.ndarray, t: float) -> np.ndarray:
        N = points.shape[-1]
        if self.coefficients is None:
            return np.broadcast_to(self.ell.lam * np.eye(N), points.shape[:-1] + (N, N))
        return np.asarray(self.coefficients(points, t), dtype=float)

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "lambda": self.ell.lam,
            "Lambda": self.ell.Lam,
            "label": self.label,
        }


def validate_coefficients(A: np.ndarray, ell: EllipticityPair, tol: float = 1e-12) -> None:
    """lam*I <= A <= Lam*I at every node (closed-form eigenvalues, N in {1, 2})."""
    if A.shape[-1] == 2 and not np.allclose(A[..., 0, 1], A[..., 1, 0]):
        raise EllipticityViolation("coefficient field is not symmetric")
    eigs = eigenvalues_batch(A)
    lo, hi = eigs[..., 0], eigs[..., -1]
    if np.any(lo < ell.lam - tol) or np.any(hi > ell.Lam + tol):
        raise EllipticityViolation(
            f"coefficient eigenvalues in [{float(np.min(lo)):.4g}, {float(np.max(hi)):.4g}] "
            f"outside [{ell.lam}, {ell.Lam}]"
        )


@dataclass(frozen=True, eq=False)
class Grid:
    """
    Space-time grid for the explicit scheme.

    dt is the largest step not exceeding cfl_factor * h^2 / (2 N Lam m)
    that divides the time span into a whole number of snapshot intervals;
    m is the stencil multiplier (1 here: every stencil arm is at least h).
    """

    lattice: SpaceTimeLattice
    Lam: float
    cfl_factor: float = 0.9
    frames: int = DEFAULT_FRAMES
    snapshots: int = 128
    stencil_scale: float = 0.5

    def __post_init__(self):
        if not 0 < self.cfl_factor <= 1:
            raise DomainViolation(f"cfl_factor must lie in (0, 1], got {self.cfl_factor}")
        if self.snapshots < 1:
            raise DomainViolation("need at least one snapshot interval")
        if self.Lam <= 0:
            raise DomainViolation("Lambda must be positive")

    @classmethod
    def create(
        cls,
        N: int,
        ell: EllipticityPair,
        nodes: Optional[int] = None,
        cylinder: Optional[ParabolicCylinder] = None,
        t_bottom: Optional[float] = None,
        time_cells: Optional[int] = None,
        snapshots: Optional[int] = None,
        cfl_factor: float = 0.9,
        frames: int = DEFAULT_FRAMES,
    ) -> "Grid":
        """Grid on `cylinder` (Q_1 by default); `t_bottom` stretches it downwards in time."""
        cyl = cylinder or ParabolicCylinder.unit(N)
        bottom = cyl.bottom_time if t_bottom is None else t_bottom
        span = cyl.top_time - bottom
        cells = time_cells or max(1, int(math.ceil(128 * span - 1e-9)))
        lattice = SpaceTimeLattice(
            N=N,
            nodes=nodes or DEFAULT_NODES[N],
            time_cells=cells,
            radius=cyl.radius,
            center=cyl.center,
            t_bottom=bottom,
            t_top=cyl.top_time,
        )
        return cls(
            lattice=lattice,
            Lam=ell.Lam,
            cfl_factor=cfl_factor,
            frames=frames,
            snapshots=snapshots or cells,
        )

    @property
    def N(self) -> int:
        return self.lattice.N

    @property
    def h(self) -> float:
        return self.lattice.h

    @property
    def arm(self) -> float:
        """Wide-stencil arm length (N = 2); the lattice step for N = 1."""
        if self.N == 1:
            return self.h
        return max(self.h, self.stencil_scale * math.sqrt(self.h))

    @property
    def stencil_multiplier(self) -> float:
        return 1.0

    @property
    def dt_limit(self) -> float:
        """Largest monotone time step."""
        return self.h ** 2 / (2 * self.N * self.Lam * self.stencil_multiplier)

    @cached_property
    def time_levels(self) -> int:
        span = self.lattice.t_top - self.lattice.t_bottom
        per_snapshot = math.ceil(span / (self.snapshots * self.cfl_factor * self.dt_limit) - 1e-9)
        return self.snapshots * max(1, per_snapshot)

    @property
    def dt(self) -> float:
        return (self.lattice.t_top - self.lattice.t_bottom) / self.time_levels

    @property
    def save_every(self) -> int:
        return self.time_levels // self.snapshots

    @cached_property
    def snapshot_times(self) -> np.ndarray:
        return self.lattice.t_bottom + self.dt * self.save_every * np.arange(self.snapshots + 1)

    def refined(self) -> "Grid":
        return Grid(
            lattice=self.lattice.refined(),
            Lam=self.Lam,
            cfl_factor=self.cfl_factor,
            frames=self.frames,
            snapshots=self.snapshots,
            stencil_scale=self.stencil_scale,
        )


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Snapshots of a lattice function: values[k] lives at times[k]."""

    lattice: SpaceTimeLattice
    times: np.ndarray
    values: np.ndarray
    role: Role = "supersolution"
    dt: float = float("nan")

    def __post_init__(self):
        if self.role not in ROLES:
            raise DomainViolation(f"role must be one of {ROLES}, got {self.role!r}")
        values = np.asarray(self.values, dtype=float)
        times = np.asarray(self.times, dtype=float)
        if values.shape != (len(times),) + self.lattice.shape:
            raise DomainViolation(f"values shape {values.shape} does not match {len(times)} levels on {self.lattice.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainViolation("grid function has non-finite values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "times", times)

    def check_theorem_source(self) -> None:
        """Sources fed to the theorems must satisfy 0 <= f <= 1."""
        if self.role != "source":
            raise DomainViolation("only source grid functions carry the 0 <= f <= 1 contract")
        if self.values.min() < 0 or self.values.max() > 1:
            raise DomainViolation("theorem sources must satisfy 0 <= f <= 1")

    def level_index(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))

    def at_time(self, t: float) -> np.ndarray:
        return self.values[self.level_index(t)]

    def window_mask(self, radius: float, t_lo: float, t_hi: float) -> Tuple[np.ndarray, np.ndarray]:
        """(time-level mask, node mask) for |x - center| <= radius and t_lo <= t <= t_hi."""
        tol = 1e-12
        levels = (self.times >= t_lo - tol) & (self.times <= t_hi + tol)
        if not levels.any():
            levels = np.zeros_like(levels)
            levels[self.level_index(t_hi)] = True
        nodes = (self.lattice.distance <= radius + tol) & self.lattice.interior
        return levels, nodes

    def window_min(self, radius: float, t_lo: float, t_hi: float) -> float:
        levels, nodes = self.window_mask(radius, t_lo, t_hi)
        return float(self.values[levels][:, nodes].min())

    def max(self) -> float:
        return float(self.values.max())

    def on_lattice(self, coarse: SpaceTimeLattice) -> np.ndarray:
        """Restrict a refined function to the nodes of `coarse` (every other node)."""
        ratio = (self.lattice.nodes - 1) // (coarse.nodes - 1)
        if (coarse.nodes - 1) * ratio != self.lattice.nodes - 1:
            raise DomainViolation("lattices are not nested")
        index = (slice(None),) + (slice(None, None, ratio),) * self.lattice.N
        return self.values[index]

    def to_text(self) -> str:
        lat = self.lattice
        lines = [
            "# grid-function",
            f"role {self.role}",
            f"N {lat.N}",
            f"h {lat.h!r}",
            f"dt {self.dt!r}",
            "dims " + " ".join(str(d) for d in self.values.shape),
            f"radius {lat.radius!r}",
            "center " + " ".join(repr(c) for c in lat.center),
            f"t_bottom {lat.t_bottom!r}",
            f"t_top {lat.t_top!r}",
            f"time_cells {lat.time_cells}",
            "times " + " ".join(repr(float(t)) for t in self.times),
        ]
        for level in self.values.reshape(len(self.times), -1):
            lines.append(" ".join(repr(float(v)) for v in level))
        return "\n".join(lines) + "\n"

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_text(), encoding="utf-8")
        logger.info(f"Grid function saved to: {path}")
        return path

    @classmethod
    def from_text(cls, text: str) -> "GridFunction":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].strip() != "# grid-function":
            raise DomainViolation("not a grid-function file")
        header = {}
        for ln in lines[1:12]:
            key, _, value = ln.partition(" ")
            header[key] = value.split()
        dims = tuple(int(d) for d in header["dims"])
        lattice = SpaceTimeLattice(
            N=int(header["N"][0]),
            nodes=dims[1],
            time_cells=int(header["time_cells"][0]),
            radius=float(header["radius"][0]),
            center=tuple(float(c) for c in header["center"]),
            t_bottom=float(header["t_bottom"][0]),
            t_top=float(header["t_top"][0]),
        )
        values = np.array([[float(v) for v in ln.split()] for ln in lines[12:]]).reshape(dims)
        return cls(
            lattice=lattice,
            times=np.array([float(t) for t in header["times"]]),
            values=values,
            role=header["role"][0],
            dt=float(header["dt"][0]),
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "GridFunction":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))
