"""
laboratory.py

GrowthLaboratory

Main orchestration engine of the project.

Responsibilities
---------------
1. Build the explicit constants for the configured (kappa, lambda, Lambda, N).
2. Generate a seeded ensemble of sources, operators and solutions.
3. Check every member against the lower bounds and the ABP ratio.
4. Save raw verification results to disk.

Design Philosophy
-----------------
- Library modules raise; this module catches, logs and turns failures into rows.
- It does NOT build processed summaries; see export/structured_exporter.py.
- Payloads carry no timestamps, so identical configurations give identical bytes.

Outputs
-------
Rows saved to:
    data/raw/{name}.csv  or  data/raw/{name}.jsonl

Aggregates saved to:
    data/raw/{name}_summary.json
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

from krylov_growth_lab.config import LabSettings
from krylov_growth_lab.constants.constants_pipeline import ConstantsReport, FSConfig
from krylov_growth_lab.errors import ConfigurationError, LabError
from krylov_growth_lab.harness.ensemble_generator import EnsembleConfig, generate_member
from krylov_growth_lab.harness.inequality_checks import (
    abp_refinement_ratio,
    check_measure_form,
    check_two_sided,
    empirical_abp_constant,
    refinement_stable,
    richardson_error,
    richardson_subsample,
)
from krylov_growth_lab.pucci.pucci_operators import EllipticityPair

logger = logging.getLogger(__name__)

REPORT_COLUMNS = [
    "index",
    "check",
    "operator",
    "dominated",
    "m",
    "level",
    "f_norm",
    "bound",
    "log_bound",
    "u_min",
    "u_max",
    "margin",
    "passed",
    "abp_ratio",
    "alpha",
    "alpha_exact",
    "window_start",
    "slick_bound",
    "slick_margin",
    "error",
]
FORMATS = {"csv": "csv", "json-lines": "jsonl"}


def _finite_or_none(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def summarize_rows(rows: List[Dict[str, Any]]) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    """Rows sorted by (index, check) and the aggregates that depend on them alone."""
    frame = pd.DataFrame(rows, columns=REPORT_COLUMNS)
    if frame.empty:
        return frame, {"rows": 0, "hard_failures": 0, "C_emp": 0.0, "all_dominated": True, "min_margin": math.nan}

    frame = frame.sort_values(["index", "check"], kind="mergesort").reset_index(drop=True)
    frame["passed"] = frame["passed"].astype(bool)
    margins = frame["margin"].dropna()
    aggregates = {
        "rows": int(len(frame)),
        "hard_failures": int((~frame["passed"]).sum()),
        "C_emp": empirical_abp_constant(rows),
        "all_dominated": bool(frame["dominated"].fillna(True).all()),
        "min_margin": float(margins.min()) if not margins.empty else math.nan,
    }
    return frame, aggregates


@dataclass
class VerificationReport:
    config: Dict[str, Any]
    rows: pd.DataFrame
    aggregates: Dict[str, Any] = field(default_factory=dict)

    @property
    def hard_failures(self) -> int:
        return int(self.aggregates.get("hard_failures", 0))

    @property
    def passed(self) -> bool:
        return self.hard_failures == 0 and bool(self.aggregates.get("C_emp_refinement_stable", True))

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def summary(self) -> Dict[str, Any]:
        return {
            "config": {k: _finite_or_none(v) for k, v in self.config.items()},
            "aggregates": {k: _finite_or_none(v) for k, v in self.aggregates.items()},
        }


class GrowthLaboratory:
    """
    Runs the verification suite for one set of lab settings.
    """

    def __init__(self, settings: Optional[LabSettings] = None):
        self.settings = settings or LabSettings.from_env()
        self.raw_dir = Path(self.settings.data_dir) / "raw"
        self.raw_dir.mkdir(parents=True, exist_ok=True)

    @property
    def ell(self) -> EllipticityPair:
        return EllipticityPair(self.settings.lam, self.settings.Lam)

    def constants(self, fs: Optional[FSConfig] = None) -> ConstantsReport:
        s = self.settings
        return ConstantsReport.build(s.kappa, self.ell, s.N, fs or FSConfig(s.fs_sigma, s.fs_C))

    def ensemble_config(self, count: int = 50, **overrides: Any) -> EnsembleConfig:
        s = self.settings
        options = {
            "seed": s.seed,
            "count": count,
            "N": s.N,
            "nodes": s.grid_nodes,
            "kappa": s.kappa,
            "lam": s.lam,
            "Lam": s.Lam,
            "cfl_factor": s.cfl_factor,
            "frames": s.frames,
        }
        options.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return EnsembleConfig(**options)
        except TypeError as e:
            raise ConfigurationError(str(e))

    def run_suite(self, config: EnsembleConfig, richardson: bool = True) -> VerificationReport:
        """
        Verify every member of the ensemble.

        Parameters
        ----------
        config : EnsembleConfig
            Ensemble description; its kappa and ellipticity override the settings.
        richardson : bool
            If True, estimate the discretization error on a member subsample.
            If False, the tolerance floor is zero.

        Returns
        -------
        VerificationReport
            Rows per member and check, plus aggregates.
        """

        constants = ConstantsReport.build(
            config.kappa, config.ell, config.N, FSConfig(self.settings.fs_sigma, self.settings.fs_C)
        )
        subsample = richardson_subsample(config.count)
        tolerance = richardson_error(config, subsample) if richardson and subsample else 0.0
        logger.info(f"Verifying {config.count} members (tolerance floor {tolerance:.3e})")

        rows: List[Dict[str, Any]] = []
        for index in range(config.count):
            try:
                member = generate_member(config, index)
            except LabError as e:
                logger.error(f"member {index} could not be generated: {e}")
                rows.append({"index": index, "check": "generate", "passed": False, "error": str(e)})
                continue

            for check in (check_two_sided, check_measure_form):
                try:
                    row = check(member, constants, tolerance)
                except LabError as e:
                    logger.error(f"{check.__name__} failed for member {index}: {e}")
                    name = check.__name__.replace("check_", "").replace("_", "-")
                    row = {"index": index, "check": name, "passed": False, "error": str(e)}
                row.update(operator=member.op.label or member.op.kind, dominated=member.dominated)
                rows.append(row)

        frame, row_aggregates = summarize_rows(rows)
        refinement = abp_refinement_ratio(config, subsample) if richardson and subsample else None
        aggregates = {
            "members": config.count,
            **row_aggregates,
            "discretization_error": tolerance,
            "C_emp_refinement_ratio": refinement if refinement is not None else math.nan,
            "C_emp_refinement_stable": refinement_stable(refinement),
            "constants": constants.to_dict(),
        }
        report = VerificationReport(config=config.as_dict(), rows=frame, aggregates=aggregates)
        if report.passed:
            logger.info(f"Verification passed: {aggregates['rows']} rows")
        elif report.hard_failures:
            logger.error(f"Verification found {report.hard_failures} hard failures")
        else:
            logger.error(f"C_emp is not refinement stable: h/2 over h ratio {refinement:.4g}")
        return report

    def save_results(
        self, report: VerificationReport, name: str = "verify", fmt: str = "csv", directory: Optional[Path] = None
    ) -> Path:
        """
        Save rows and aggregates to disk, in data/raw unless `directory` is given.

        Returns
        -------
        Path
            Location of the saved rows file.
        """

        if fmt not in FORMATS:
            raise ConfigurationError(f"format must be one of {sorted(FORMATS)}, got {fmt!r}")
        directory = self.raw_dir if directory is None else Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"{name}.{FORMATS[fmt]}"
        if fmt == "csv":
            report.rows.to_csv(path, index=False)
        else:
            report.rows.to_json(path, orient="records", lines=True)

        summary_path = directory / f"{name}_summary.json"
        with open(summary_path, "w", encoding="utf-8") as f:
            json.dump(report.summary(), f, indent=2, ensure_ascii=False, sort_keys=True)

        logger.info(f"Results saved to: {path}")
        return path
