"""
build_report.py

Rebuild the processed summary dataset from raw verification artifacts.

Example:
    python scripts/build_report.py --data_dir data
"""

import argparse
from pathlib import Path

from krylov_growth_lab.export.structured_exporter import StructuredExporter


def main():
    parser = argparse.ArgumentParser(description="Build the summary dataset from raw artifacts.")
    parser.add_argument("--data_dir", type=Path, default=Path("data"))
    parser.add_argument("--output", type=Path)
    args = parser.parse_args()

    exporter = StructuredExporter(args.data_dir)
    created = exporter.export_csv(output_path=args.output)

    print(f"Summary dataset created at: {created}")


if __name__ == "__main__":
    main()
