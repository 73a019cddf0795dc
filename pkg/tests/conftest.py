import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from krylov_growth_lab.pucci.pucci_operators import EllipticityPair  # noqa: E402


@pytest.fixture
def unit_ell() -> EllipticityPair:
    return EllipticityPair(1.0, 1.0)


@pytest.fixture
def wide_ell() -> EllipticityPair:
    return EllipticityPair(0.5, 2.0)
