"""
krylov_lemma.py

Constant C_k of the growth lemma: for v_t - M-(D^2 v) >= sigma on Q_r with
v >= 0 on the parabolic boundary, v >= C_k sigma r^2 on B_{kappa r} at the
top time.

The construction compares v with (1 + t)(phi - psi), where the barrier psi
starts from the half-radius disc and spreads to B_{1 - kappa}; its constant
is the barrier lower bound with theta = 1 - kappa and delta = min(1/2, theta/2)
on the upright unit cylinder.
"""

import math

from krylov_growth_lab.barriers.barrier_certifier import BarrierParams, log_lemma_lbnd_bound
from krylov_growth_lab.errors import DomainViolation
from krylov_growth_lab.pucci.pucci_operators import EllipticityPair


def krylov_params(kappa: float, ell: EllipticityPair, N: int) -> BarrierParams:
    if not 0.0 < kappa < 1.0:
        raise DomainViolation(f"kappa must lie in (0, 1), got {kappa}")
    theta = 1.0 - kappa
    return BarrierParams.upright(theta, ell, N, delta=min(0.5, 0.5 * theta), tau=1.0)


def log_krylov_constant(kappa: float, ell: EllipticityPair, N: int) -> float:
    return math.log(0.5) + log_lemma_lbnd_bound(krylov_params(kappa, ell, N))


def krylov_constant(kappa: float, ell: EllipticityPair, N: int) -> float:
    return math.exp(log_krylov_constant(kappa, ell, N))


def scaled_krylov_bound(kappa: float, ell: EllipticityPair, N: int, sigma: float, r: float) -> float:
    """C_k * sigma * r^2 for a cylinder of radius r and source level sigma."""
    if sigma < 0 or r <= 0:
        raise DomainViolation(f"need sigma >= 0 and r > 0, got sigma={sigma}, r={r}")
    return krylov_constant(kappa, ell, N) * sigma * r ** 2
