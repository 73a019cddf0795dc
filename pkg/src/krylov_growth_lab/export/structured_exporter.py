"""
structured_exporter.py

Responsible for converting raw verification artifacts into
a processed summary dataset.

This module does NOT run verifications.
It only transforms existing raw data into processed format.
"""

import json
import logging
from pathlib import Path
from typing import Optional, Union

import pandas as pd

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "run",
    "seed",
    "count",
    "N",
    "kappa",
    "lam",
    "Lam",
    "source_family",
    "coefficient_family",
    "rows",
    "hard_failures",
    "discretization_error",
    "min_margin",
    "C_emp",
    "C_emp_refinement_ratio",
    "C_emp_refinement_stable",
    "all_dominated",
]


class StructuredExporter:
    """
    Collects every *_summary.json under data/raw into one CSV.

    Output Format:
        one row per verification run, columns as in SUMMARY_COLUMNS
    """

    def __init__(self, data_dir: Union[str, Path] = "data"):
        self.raw_dir = Path(data_dir) / "raw"
        self.processed_dir = Path(data_dir) / "processed"
        self.processed_dir.mkdir(parents=True, exist_ok=True)

    def load_summaries(self) -> pd.DataFrame:
        rows = []
        for file in sorted(self.raw_dir.glob("*_summary.json")):
            with open(file, "r", encoding="utf-8") as f:
                data = json.load(f)

            config = data.get("config", {})
            aggregates = data.get("aggregates", {})
            row = {"run": file.name[: -len("_summary.json")]}
            row.update({k: config.get(k) for k in ("seed", "count", "N", "kappa", "lam", "Lam")})
            row.update({k: config.get(k) for k in ("source_family", "coefficient_family")})
            row.update({k: aggregates.get(k) for k in SUMMARY_COLUMNS if k in aggregates})
            rows.append(row)

        return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)

    def export_csv(self, output_path: Optional[Path] = None) -> Path:
        """
        Build the summary CSV from raw summary files.

        Returns
        -------
        Path
            Path of created CSV file.
        """

        output_path = Path(output_path) if output_path else self.processed_dir / "verification_summary.csv"
        frame = self.load_summaries()
        frame.to_csv(output_path, index=False)
        logger.info(f"Exported {len(frame)} runs to {output_path}")
        return output_path
