"""
config.py

Runtime settings for the laboratory.

Values come from the environment (optionally a .env file, loaded once
here) and can be overridden by CLI flags.
"""

import os
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict

from dotenv import load_dotenv

from krylov_growth_lab.errors import ConfigurationError

load_dotenv()

logger = logging.getLogger(__name__)


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigurationError(f"{name} must be a number, got {raw!r}")


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"{name} must be an integer, got {raw!r}")


@dataclass(frozen=True)
class LabSettings:
    """Defaults shared by the CLI and the laboratory."""

    seed: int = 42
    kappa: float = 0.5
    lam: float = 1.0
    Lam: float = 1.0
    N: int = 1
    grid_nodes_1d: int = 257
    grid_nodes_2d: int = 97
    cfl_factor: float = 0.9
    frames: int = 32
    fs_sigma: float = 1.0
    fs_C: float = 0.5
    data_dir: Path = Path("data")

    @classmethod
    def from_env(cls) -> "LabSettings":
        settings = cls(
            seed=_env_int("KRYLOV_LAB_SEED", cls.seed),
            kappa=_env_float("KRYLOV_LAB_KAPPA", cls.kappa),
            lam=_env_float("KRYLOV_LAB_LAMBDA", cls.lam),
            Lam=_env_float("KRYLOV_LAB_LAMBDA_MAX", cls.Lam),
            N=_env_int("KRYLOV_LAB_N", cls.N),
            grid_nodes_1d=_env_int("KRYLOV_LAB_GRID_NODES_1D", cls.grid_nodes_1d),
            grid_nodes_2d=_env_int("KRYLOV_LAB_GRID_NODES_2D", cls.grid_nodes_2d),
            cfl_factor=_env_float("KRYLOV_LAB_CFL_FACTOR", cls.cfl_factor),
            frames=_env_int("KRYLOV_LAB_FRAMES", cls.frames),
            fs_sigma=_env_float("KRYLOV_LAB_FS_SIGMA", cls.fs_sigma),
            fs_C=_env_float("KRYLOV_LAB_FS_C", cls.fs_C),
            data_dir=Path(os.getenv("KRYLOV_LAB_DATA_DIR", str(cls.data_dir))),
        )
        settings.validate()
        return settings

    def override(self, **changes: Any) -> "LabSettings":
        """Return a copy with the non-None keyword values applied."""
        updated = replace(self, **{k: v for k, v in changes.items() if v is not None})
        updated.validate()
        return updated

    @property
    def grid_nodes(self) -> int:
        return self.grid_nodes_1d if self.N == 1 else self.grid_nodes_2d

    def validate(self) -> None:
        if self.N not in (1, 2):
            raise ConfigurationError(f"N must be 1 or 2, got {self.N}")
        if not 0.0 < self.kappa < 1.0:
            raise ConfigurationError(f"kappa must lie in (0,1), got {self.kappa}")
        if not 0.0 < self.lam <= self.Lam:
            raise ConfigurationError(f"need 0 < lambda <= Lambda, got ({self.lam}, {self.Lam})")
        if self.grid_nodes_1d < 5 or self.grid_nodes_2d < 5:
            raise ConfigurationError("grids need at least 5 nodes per axis")
        if not 0.0 < self.cfl_factor <= 1.0:
            raise ConfigurationError(f"cfl_factor must lie in (0,1], got {self.cfl_factor}")
        if self.frames < 2:
            raise ConfigurationError(f"need at least 2 frames, got {self.frames}")
        if self.fs_sigma <= 0 or self.fs_C <= 0:
            raise ConfigurationError("Fabes-Stroock sigma and C must be positive")

    def as_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "kappa": self.kappa,
            "lambda": self.lam,
            "Lambda": self.Lam,
            "N": self.N,
            "grid_nodes_1d": self.grid_nodes_1d,
            "grid_nodes_2d": self.grid_nodes_2d,
            "cfl_factor": self.cfl_factor,
            "frames": self.frames,
            "fs_sigma": self.fs_sigma,
            "fs_C": self.fs_C,
            "data_dir": str(self.data_dir),
        }
