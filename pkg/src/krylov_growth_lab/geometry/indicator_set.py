"""
indicator_set.py

Rasterized subsets of a lattice cylinder (the sets Gamma = {f > level}).

Text format
-----------
    # indicator-set
    N 1
    dims 128 257
    h 0.0078125
    dt 0.0078125
    t_bottom -1.0
    t_top 0.0
    radius 1.0
    center 0.0
    <one run-length-encoded line per time cell, tokens value x count>

Measures are normalized by the rasterized volume of the whole lattice
cylinder, so the full set has measure exactly 1.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

import numpy as np

from krylov_growth_lab.errors import DomainViolation
from krylov_growth_lab.geometry.cylinders import ParabolicCylinder
from krylov_growth_lab.geometry.lattice import SpaceTimeLattice

logger = logging.getLogger(__name__)

HEADER = "# indicator-set"


@dataclass(frozen=True, eq=False)
class IndicatorSet:
    lattice: SpaceTimeLattice
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        expected = (self.lattice.time_cells,) + self.lattice.shape
        if mask.shape != expected:
            raise DomainViolation(f"mask shape {mask.shape} does not match lattice {expected}")
        if np.any(mask & ~self.lattice.interior[np.newaxis, ...]):
            raise DomainViolation("indicator cells must lie inside the lattice cylinder")
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def empty(cls, lattice: SpaceTimeLattice) -> "IndicatorSet":
        return cls(lattice, np.zeros((lattice.time_cells,) + lattice.shape, dtype=bool))

    @classmethod
    def full(cls, lattice: SpaceTimeLattice) -> "IndicatorSet":
        mask = np.broadcast_to(lattice.interior, (lattice.time_cells,) + lattice.shape)
        return cls(lattice, mask)

    @classmethod
    def from_cylinder(cls, lattice: SpaceTimeLattice, cyl: ParabolicCylinder) -> "IndicatorSet":
        return cls(lattice, lattice.cylinder_mask(cyl))

    @classmethod
    def from_level_set(cls, lattice: SpaceTimeLattice, values: np.ndarray, level: float) -> "IndicatorSet":
        """{f > level} for cell values f of shape (time_cells, *shape)."""
        return cls(lattice, (np.asarray(values) > level) & lattice.interior[np.newaxis, ...])

    @property
    def cell_count(self) -> int:
        return int(self.mask.sum())

    @property
    def normalized_measure(self) -> float:
        return self.cell_count / self.lattice.domain_cells

    def is_empty(self) -> bool:
        return self.cell_count == 0

    def union(self, other: "IndicatorSet") -> "IndicatorSet":
        return IndicatorSet(self.lattice, self.mask | other.mask)

    def intersection(self, other: "IndicatorSet") -> "IndicatorSet":
        return IndicatorSet(self.lattice, self.mask & other.mask)

    def issubset(self, other: "IndicatorSet") -> bool:
        return bool(np.all(~self.mask | other.mask))

    def latest_time(self) -> float:
        """Top of the last occupied time cell (t_bottom for the empty set)."""
        occupied = np.flatnonzero(self.mask.reshape(self.lattice.time_cells, -1).any(axis=1))
        if occupied.size == 0:
            return self.lattice.t_bottom
        return self.lattice.t_bottom + self.lattice.tau * (occupied[-1] + 1)

    def max_radius(self) -> float:
        """Largest |x - center| over occupied nodes (0 for the empty set)."""
        occupied = self.mask.any(axis=0)
        if not occupied.any():
            return 0.0
        return float(self.lattice.distance[occupied].max())

    def to_text(self) -> str:
        lat = self.lattice
        lines = [
            HEADER,
            f"N {lat.N}",
            "dims " + " ".join(str(d) for d in self.mask.shape),
            f"h {lat.h!r}",
            f"dt {lat.tau!r}",
            f"t_bottom {lat.t_bottom!r}",
            f"t_top {lat.t_top!r}",
            f"radius {lat.radius!r}",
            "center " + " ".join(repr(c) for c in lat.center),
        ]
        for row in self.mask.reshape(lat.time_cells, -1):
            lines.append(_encode_runs(row))
        return "\n".join(lines) + "\n"

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_text(), encoding="utf-8")
        logger.info(f"Indicator set saved to: {path}")
        return path

    @classmethod
    def from_text(cls, text: str) -> "IndicatorSet":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].strip() != HEADER:
            raise DomainViolation("not an indicator-set file")
        header = {}
        for ln in lines[1:9]:
            key, _, value = ln.partition(" ")
            header[key] = value.split()
        N = int(header["N"][0])
        dims = tuple(int(d) for d in header["dims"])
        lattice = SpaceTimeLattice(
            N=N,
            nodes=dims[1],
            time_cells=dims[0],
            radius=float(header["radius"][0]),
            center=tuple(float(c) for c in header["center"]),
            t_bottom=float(header["t_bottom"][0]),
            t_top=float(header["t_top"][0]),
        )
        rows = [_decode_runs(ln, int(np.prod(dims[1:]))) for ln in lines[9:]]
        if len(rows) != dims[0]:
            raise DomainViolation(f"expected {dims[0]} mask lines, found {len(rows)}")
        return cls(lattice, np.array(rows, dtype=bool).reshape(dims))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "IndicatorSet":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def _encode_runs(row: np.ndarray) -> str:
    tokens: List[str] = []
    values = row.astype(np.int8)
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] != values[start]:
            tokens.append(f"{values[start]}x{i - start}")
            start = i
    return " ".join(tokens)


def _decode_runs(line: str, length: int) -> np.ndarray:
    out = []
    for token in line.split():
        value, _, count = token.partition("x")
        out.extend([value == "1"] * int(count))
    if len(out) != length:
        raise DomainViolation(f"run-length line decodes to {len(out)} cells, expected {length}")
    return np.array(out, dtype=bool)
