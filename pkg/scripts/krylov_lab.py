"""
krylov_lab.py

CLI entrypoint for the laboratory.

Example:
    python scripts/krylov_lab.py verify --count 50 --seed 42
"""

import sys

from krylov_growth_lab.cli import main


if __name__ == "__main__":
    sys.exit(main())
