"""
lattice.py

Uniform space-time lattice rasterizing a cylinder B_R(c) x (t_bottom, t_top].

Space nodes sit on a uniform grid covering the bounding box of the ball;
time is split into `time_cells` equal cells (t_l, t_l + tau]. A lattice
cell (space node, time cell) represents the box of side h around the node
times the time cell.

Interior nodes
--------------
- N = 1: nodes strictly inside the ball.
- N = 2: nodes at distance >= h from the sphere, so every wide-stencil
  arm fits in the closed ball with length at least h. The remaining
  nodes carry boundary data.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np

from krylov_growth_lab.errors import DomainViolation
from krylov_growth_lab.geometry.cylinders import ParabolicCylinder

_TOL = 1e-9


@dataclass(frozen=True)
class SpaceTimeLattice:
    N: int
    nodes: int
    time_cells: int = 128
    radius: float = 1.0
    center: Tuple[float, ...] = (0.0,)
    t_bottom: float = -1.0
    t_top: float = 0.0

    def __post_init__(self):
        if self.N not in (1, 2):
            raise DomainViolation(f"N must be 1 or 2, got {self.N}")
        if self.nodes < 5:
            raise DomainViolation(f"need at least 5 nodes per axis, got {self.nodes}")
        if self.time_cells < 1:
            raise DomainViolation("need at least one time cell")
        if not self.t_top > self.t_bottom:
            raise DomainViolation("t_top must exceed t_bottom")
        center = tuple(float(c) for c in np.atleast_1d(self.center))
        if len(center) == 1 and self.N == 2:
            center = center * 2
        if len(center) != self.N:
            raise DomainViolation(f"center {center} does not match N={self.N}")
        object.__setattr__(self, "center", center)

    @classmethod
    def for_cylinder(cls, cyl: ParabolicCylinder, nodes: int, time_cells: int = 128) -> "SpaceTimeLattice":
        return cls(
            N=cyl.N,
            nodes=nodes,
            time_cells=time_cells,
            radius=cyl.radius,
            center=cyl.center,
            t_bottom=cyl.bottom_time,
            t_top=cyl.top_time,
        )

    @property
    def h(self) -> float:
        return 2.0 * self.radius / (self.nodes - 1)

    @property
    def tau(self) -> float:
        """Time cell length."""
        return (self.t_top - self.t_bottom) / self.time_cells

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.nodes,) * self.N

    @property
    def cell_volume(self) -> float:
        return self.h ** self.N * self.tau

    @cached_property
    def axes(self) -> Tuple[np.ndarray, ...]:
        offsets = -self.radius + self.h * np.arange(self.nodes)
        return tuple(c + offsets for c in self.center)

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates, shape (*shape, N)."""
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(grids, axis=-1)

    @cached_property
    def distance(self) -> np.ndarray:
        """|x - center| at every node."""
        return np.linalg.norm(self.points - np.asarray(self.center), axis=-1)

    @cached_property
    def interior(self) -> np.ndarray:
        if self.N == 1:
            mask = self.distance < self.radius - _TOL * self.h
        else:
            mask = self.distance <= self.radius - self.h + _TOL * self.h
        mask.setflags(write=False)
        return mask

    @cached_property
    def cell_times(self) -> np.ndarray:
        """Time-cell centers."""
        return self.t_bottom + self.tau * (np.arange(self.time_cells) + 0.5)

    @property
    def domain_cells(self) -> int:
        """Number of lattice cells rasterizing the whole cylinder."""
        return int(self.interior.sum()) * self.time_cells

    def time_cell_index(self, t: float) -> int:
        """Index of the cell (t_l, t_l + tau] containing t, clamped to the lattice."""
        idx = int(np.ceil((t - self.t_bottom) / self.tau - _TOL)) - 1
        return min(max(idx, 0), self.time_cells - 1)

    def refined(self) -> "SpaceTimeLattice":
        """Same domain with space step halved; time cells unchanged."""
        return SpaceTimeLattice(
            N=self.N,
            nodes=2 * self.nodes - 1,
            time_cells=self.time_cells,
            radius=self.radius,
            center=self.center,
            t_bottom=self.t_bottom,
            t_top=self.t_top,
        )

    def cylinder_mask(self, cyl: ParabolicCylinder) -> np.ndarray:
        """Cells whose node and time-cell center lie in `cyl` (center rule), restricted to the interior."""
        dist = np.linalg.norm(self.points - np.asarray(cyl.center), axis=-1)
        space = (dist < cyl.radius) & self.interior
        times = (self.cell_times > cyl.bottom_time) & (self.cell_times <= cyl.top_time)
        return times.reshape((-1,) + (1,) * self.N) & space[np.newaxis, ...]
