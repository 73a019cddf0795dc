"""
barrier_certifier.py

Closed-form barrier

    psi(x, t) = phi(x, t)^2 * rho(t)^(-alpha),
    rho(t) = (theta^2 - delta^2)(1 + t) + delta^2,   phi = rho(t) - |x|^2,

on Q-hat = {phi > 0, -1 < t <= 0}, and a sampling certificate that psi is a
subsolution of every operator psi_t - s*M-(D^2 psi) - b . D psi with time
scale s in [tau1, tau2] and drift |b| <= eta + (1 - theta).

The certificate evaluates the scaled residual rho^alpha * L[psi], which is
a polynomial in (|x|, t) and never overflows:

    2 a phi - alpha a phi^2 / rho - s* M-(8 x x' - 4 phi I) + 4 phi B |x|

with a = theta^2 - delta^2, s* = tau1 where M- >= 0 and tau2 otherwise.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from krylov_growth_lab.errors import CertificationFailure, DomainViolation
from krylov_growth_lab.pucci.pucci_operators import EllipticityPair, pucci_minus_batch

logger = logging.getLogger(__name__)

RESIDUAL_SLACK = 1e-9
DEFAULT_MARGIN = 0.01
DEFAULT_SAMPLES = 1_000_000


@dataclass(frozen=True)
class BarrierParams:
    theta: float
    delta: float
    eta: float
    tau1: float
    tau2: float
    ell: EllipticityPair
    N: int = 1
    requested_delta: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise DomainViolation(f"theta must lie in (0, 1), got {self.theta}")
        if not 0.0 < self.delta <= 0.5 * self.theta * (1 + 1e-15):
            raise DomainViolation(
                f"delta must satisfy 0 < delta <= theta/2, got delta={self.delta}, theta={self.theta}"
            )
        if not 0.0 < self.tau1 <= self.tau2:
            raise DomainViolation(f"need 0 < tau1 <= tau2, got ({self.tau1}, {self.tau2})")
        if self.eta < 0:
            raise DomainViolation(f"eta must be nonnegative, got {self.eta}")
        if self.N not in (1, 2):
            raise DomainViolation(f"N must be 1 or 2, got {self.N}")

    @classmethod
    def reduced(
        cls, theta: float, delta: float, eta: float, tau1: float, tau2: float, ell: EllipticityPair, N: int = 1
    ) -> "BarrierParams":
        """Shrink delta to theta/2 when larger; a lower bound from the smaller disc still holds."""
        effective = min(delta, 0.5 * theta)
        if effective < delta:
            logger.debug(f"delta reduced from {delta} to {effective}")
            return cls(theta, effective, eta, tau1, tau2, ell, N, requested_delta=delta)
        return cls(theta, delta, eta, tau1, tau2, ell, N)

    @classmethod
    def upright(
        cls, theta: float, ell: EllipticityPair, N: int = 1, delta: Optional[float] = None, tau: float = 1.0
    ) -> "BarrierParams":
        """Right cylinder: no drift and a single time scale."""
        return cls(theta, 0.5 * theta if delta is None else delta, 0.0, tau, tau, ell, N)

    @property
    def was_reduced(self) -> bool:
        return self.requested_delta is not None

    @property
    def a(self) -> float:
        return self.theta ** 2 - self.delta ** 2

    @property
    def drift_bound(self) -> float:
        return self.eta + (1.0 - self.theta)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "theta": self.theta,
            "delta": self.delta,
            "eta": self.eta,
            "tau1": self.tau1,
            "tau2": self.tau2,
            "lambda": self.ell.lam,
            "Lambda": self.ell.Lam,
            "N": self.N,
            "requested_delta": self.requested_delta,
        }


def compute_C0(p: BarrierParams) -> float:
    return 2 * p.a + 4 * (p.eta * p.theta + (1 - p.theta) * p.theta) + 4 * p.ell.Lam * p.N * p.tau2


def alpha_threshold(p: BarrierParams) -> float:
    C0 = compute_C0(p)
    lt = p.ell.lam * p.tau1
    return C0 * (C0 + 8 * lt) / (6 * p.theta ** 2 * lt)


def compute_alpha(p: BarrierParams, margin: float = DEFAULT_MARGIN) -> float:
    """Exponent strictly above the threshold by a relative margin."""
    if margin < 0:
        raise DomainViolation(f"margin must be nonnegative, got {margin}")
    return (1 + margin) * alpha_threshold(p)


def log_gamma_final(theta: float, delta: float, alpha: float) -> float:
    """log of theta^(4 - 2 alpha) * delta^(2 alpha - 4)."""
    return (2 * alpha - 4) * (math.log(delta) - math.log(theta))


def gamma_final(theta: float, delta: float, alpha: float) -> float:
    return math.exp(log_gamma_final(theta, delta, alpha))


def lemma_lbnd_bound(p: BarrierParams, alpha: Optional[float] = None) -> float:
    """Lower bound on |x - x2| <= (1 - theta) R given u >= 1 on |x - x1| <= delta R."""
    return math.exp(log_lemma_lbnd_bound(p, alpha))


def log_lemma_lbnd_bound(p: BarrierParams, alpha: Optional[float] = None) -> float:
    alpha = compute_alpha(p) if alpha is None else alpha
    return log_gamma_final(p.theta, p.delta, alpha)


@dataclass(frozen=True)
class PsiValue:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray
    time_derivative: float
    inside: bool


def psi_eval(x, t: float, theta: float, delta: float, alpha: float) -> PsiValue:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    N = x.shape[0]
    a = theta ** 2 - delta ** 2
    rho = a * (1 + t) + delta ** 2
    r2 = float(x @ x)
    phi = rho - r2
    if not (-1.0 < t <= 0.0) or phi <= 0:
        nan = float("nan")
        return PsiValue(0.0, np.full(N, nan), np.full((N, N), nan), nan, False)

    scale = math.exp(-alpha * math.log(rho))
    value = phi ** 2 * scale
    gradient = -4.0 * phi * x * scale
    hessian = (8.0 * np.outer(x, x) - 4.0 * phi * np.eye(N)) * scale
    time_derivative = (2 * a * phi - alpha * a * phi ** 2 / rho) * scale
    return PsiValue(value, gradient, hessian, time_derivative, True)


@dataclass(frozen=True)
class BarrierCertificate:
    params: BarrierParams
    C0: float
    alpha: float
    residual_max: float
    sample_count: int
    log_gamma_final: float
    drift_bound: float
    worst_point: Tuple[Tuple[float, ...], float]

    @property
    def gamma_final(self) -> float:
        return math.exp(self.log_gamma_final)

    @property
    def valid(self) -> bool:
        return self.residual_max <= RESIDUAL_SLACK

    def raise_if_invalid(self) -> None:
        if not self.valid:
            x, t = self.worst_point
            raise CertificationFailure(
                f"barrier is not a subsolution at x={x}, t={t}: scaled residual {self.residual_max:.3e}",
                point=self.worst_point,
                residual=self.residual_max,
            )

    def as_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params.as_dict(),
            "C0": self.C0,
            "alpha": self.alpha,
            "residual_max": self.residual_max,
            "sample_count": self.sample_count,
            "gamma_final": self.gamma_final,
            "log_gamma_final": self.log_gamma_final,
            "drift_bound": self.drift_bound,
            "worst_x": list(self.worst_point[0]),
            "worst_t": self.worst_point[1],
            "valid": self.valid,
        }


def scaled_residual(
    p: BarrierParams, alpha: float, drift_bound: float, x: np.ndarray, t: np.ndarray
) -> np.ndarray:
    """rho^alpha * L[psi] at points x (..., N), times t (...), worst time scale and drift."""
    a = p.a
    rho = a * (1 + t) + p.delta ** 2
    r2 = np.sum(x ** 2, axis=-1)
    phi = rho - r2
    eye = np.eye(p.N)
    hess = 8.0 * x[..., :, np.newaxis] * x[..., np.newaxis, :] - 4.0 * phi[..., np.newaxis, np.newaxis] * eye
    m_minus = pucci_minus_batch(hess, p.ell)
    time_scale = np.where(m_minus >= 0, p.tau1, p.tau2)
    return (
        2 * a * phi
        - alpha * a * phi ** 2 / rho
        - time_scale * m_minus
        + 4 * phi * drift_bound * np.sqrt(r2)
    )


def _sample_grid(p: BarrierParams, sample_density: int) -> Tuple[np.ndarray, np.ndarray]:
    """Times x radial fractions x directions covering the closure of Q-hat."""
    if p.N == 1:
        directions = np.array([[1.0], [-1.0]])
    else:
        angles = np.linspace(0.0, 2 * math.pi, 16, endpoint=False)
        directions = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    per_axis = max(8, int(math.ceil(math.sqrt(sample_density / len(directions)))))
    times = np.linspace(-1.0, 0.0, per_axis + 1)[1:]
    fractions = np.linspace(0.0, 1.0, per_axis)
    rho = p.a * (1 + times) + p.delta ** 2
    radii = fractions[np.newaxis, :] * np.sqrt(rho)[:, np.newaxis]
    x = radii[:, :, np.newaxis, np.newaxis] * directions[np.newaxis, np.newaxis, :, :]
    t = np.broadcast_to(times[:, np.newaxis, np.newaxis], x.shape[:-1])
    return x.reshape(-1, p.N), t.reshape(-1)


def certify_subsolution(
    p: BarrierParams,
    drift_bound: Optional[float] = None,
    sample_density: int = DEFAULT_SAMPLES,
    alpha: Optional[float] = None,
    margin: float = DEFAULT_MARGIN,
) -> BarrierCertificate:
    """Sample the scaled residual on Q-hat and record its maximum."""
    alpha = compute_alpha(p, margin) if alpha is None else alpha
    drift = p.drift_bound if drift_bound is None else drift_bound
    x, t = _sample_grid(p, sample_density)
    residual = scaled_residual(p, alpha, drift, x, t)
    worst = int(np.argmax(residual))
    certificate = BarrierCertificate(
        params=p,
        C0=compute_C0(p),
        alpha=alpha,
        residual_max=float(residual[worst]),
        sample_count=int(residual.size),
        log_gamma_final=log_gamma_final(p.theta, p.delta, alpha),
        drift_bound=drift,
        worst_point=(tuple(float(v) for v in x[worst]), float(t[worst])),
    )
    if certificate.valid:
        logger.info(f"Barrier certified: alpha={alpha:.6g}, {certificate.sample_count} samples")
    else:
        logger.warning(
            f"Barrier certification failed: residual {certificate.residual_max:.3e} at {certificate.worst_point}"
        )
    return certificate
