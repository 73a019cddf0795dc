"""
pucci_operators.py

Pucci extremal operators and ellipticity-class checks.

Eigenvalues are taken in closed form (N = 1, 2) so every value used in a
certificate is exact up to floating point roundoff.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from krylov_growth_lab.errors import DomainViolation, EllipticityViolation

logger = logging.getLogger(__name__)

ABS_SLACK = 1e-12
DEFAULT_FRAMES = 32


@dataclass(frozen=True)
class EllipticityPair:
    """Ellipticity constants 0 < lam <= Lam."""

    lam: float
    Lam: float

    def __post_init__(self):
        if not (0.0 < self.lam <= self.Lam) or not math.isfinite(self.Lam):
            raise EllipticityViolation(
                f"ellipticity constants must satisfy 0 < lambda <= Lambda, got ({self.lam}, {self.Lam})"
            )

    def scaled(self, factor: float) -> "EllipticityPair":
        return EllipticityPair(self.lam * factor, self.Lam * factor)


def sym_matrix(M) -> np.ndarray:
    """Validate and return M as a float (N, N) symmetric array, N in {1, 2}."""
    arr = np.atleast_2d(np.asarray(M, dtype=float))
    if arr.shape not in ((1, 1), (2, 2)):
        raise DomainViolation(f"only 1x1 and 2x2 symmetric matrices are supported, got shape {arr.shape}")
    if arr.shape == (2, 2) and arr[0, 1] != arr[1, 0]:
        raise DomainViolation("matrix is not symmetric")
    return arr


def eigenvalues(M) -> List[float]:
    """Ascending eigenvalues by the trace/discriminant formula."""
    arr = sym_matrix(M)
    if arr.shape == (1, 1):
        return [float(arr[0, 0])]
    a, b, d = arr[0, 0], arr[0, 1], arr[1, 1]
    mean = 0.5 * (a + d)
    radius = math.hypot(0.5 * (a - d), b)
    return [mean - radius, mean + radius]


def _pucci(eigs: Sequence[float], pos_weight: float, neg_weight: float) -> float:
    positive = sum(e for e in eigs if e > 0)
    negative = sum(e for e in eigs if e < 0)
    return pos_weight * positive + neg_weight * negative


def pucci_minus(M, ell: EllipticityPair) -> float:
    """M-(M) = lam * (sum of positive eigenvalues) + Lam * (sum of negative ones)."""
    return _pucci(eigenvalues(M), ell.lam, ell.Lam)


def pucci_plus(M, ell: EllipticityPair) -> float:
    """M+(M) = Lam * (sum of positive eigenvalues) + lam * (sum of negative ones)."""
    return _pucci(eigenvalues(M), ell.Lam, ell.lam)


def frame_angles(directions: int) -> np.ndarray:
    """Uniformly spaced frame angles in [0, pi/2)."""
    if directions < 1:
        raise DomainViolation(f"need at least one frame, got {directions}")
    return np.arange(directions) * (0.5 * math.pi / directions)


def frame_vectors(directions: int) -> np.ndarray:
    """Orthonormal frames, shape (K, 2, 2): frames[k, i] is the i-th unit vector."""
    angles = frame_angles(directions)
    c, s = np.cos(angles), np.sin(angles)
    first = np.stack([c, s], axis=-1)
    second = np.stack([-s, c], axis=-1)
    return np.stack([first, second], axis=1)


def frame_min(M, ell: EllipticityPair, directions: int = DEFAULT_FRAMES) -> float:
    """
    Discretization-ready Pucci minimum over a finite set of orthonormal frames.

    Each frame contributes sum_i [lam * (v_i' M v_i)^+ - Lam * (v_i' M v_i)^-],
    the value of tr(A M) for an admissible A diagonal in that frame, so the
    result is never below pucci_minus(M) and tends to it as directions grows.
    """
    arr = sym_matrix(M)
    if arr.shape == (1, 1):
        q = arr[0, 0]
        return float(ell.lam * max(q, 0.0) - ell.Lam * max(-q, 0.0))

    frames = frame_vectors(directions)
    quad = np.einsum("kia,ab,kib->ki", frames, arr, frames)
    per_frame = (ell.lam * np.maximum(quad, 0.0) - ell.Lam * np.maximum(-quad, 0.0)).sum(axis=1)
    return float(per_frame.min())


def operator_norm_psd(K) -> float:
    """Largest eigenvalue of a positive semidefinite K (rejects indefinite K)."""
    eigs = eigenvalues(K)
    if eigs[0] < -ABS_SLACK:
        raise DomainViolation(f"K must be positive semidefinite, smallest eigenvalue {eigs[0]:.3e}")
    return eigs[-1]


def sandwich_check(M, K, ell: EllipticityPair) -> bool:
    """
    Check lam*||K|| <= M^pm(M+K) - M^pm(M) <= N*Lam*||K|| for both operators,
    within ABS_SLACK.
    """
    arr = sym_matrix(M)
    karr = sym_matrix(K)
    if arr.shape != karr.shape:
        raise DomainViolation("M and K must have the same dimension")
    N = arr.shape[0]
    norm = operator_norm_psd(karr)
    lower = ell.lam * norm - ABS_SLACK
    upper = N * ell.Lam * norm + ABS_SLACK

    for op in (pucci_minus, pucci_plus):
        gap = op(arr + karr, ell) - op(arr, ell)
        if not lower <= gap <= upper:
            logger.debug(f"sandwich violated by {op.__name__}: gap={gap}, bounds=[{lower}, {upper}]")
            return False
    return True


def check_admissible_coefficients(A, ell: EllipticityPair) -> np.ndarray:
    """Validate lam*I <= A <= Lam*I and return A as an array."""
    arr = sym_matrix(A)
    eigs = eigenvalues(arr)
    if eigs[0] < ell.lam - ABS_SLACK or eigs[-1] > ell.Lam + ABS_SLACK:
        raise EllipticityViolation(
            f"coefficient eigenvalues {eigs} outside [{ell.lam}, {ell.Lam}]"
        )
    return arr


def linear_dominates(A, M, ell: EllipticityPair) -> bool:
    """True iff tr(A M) >= M-(M), i.e. the linear operator sits above the Pucci minimum."""
    coeff = check_admissible_coefficients(A, ell)
    arr = sym_matrix(M)
    if coeff.shape != arr.shape:
        raise DomainViolation("A and M must have the same dimension")
    slack = ABS_SLACK * max(1.0, ell.Lam * np.abs(arr).sum())
    return float(np.trace(coeff @ arr)) >= pucci_minus(arr, ell) - slack


def eigenvalues_batch(M: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of a stack of symmetric matrices, shape (..., N)."""
    M = np.asarray(M, dtype=float)
    if M.shape[-2:] == (1, 1):
        return M[..., 0, :]
    if M.shape[-2:] != (2, 2):
        raise DomainViolation(f"only 1x1 and 2x2 stacks are supported, got {M.shape[-2:]}")
    a, b, d = M[..., 0, 0], M[..., 0, 1], M[..., 1, 1]
    mean = 0.5 * (a + d)
    radius = np.hypot(0.5 * (a - d), b)
    return np.stack([mean - radius, mean + radius], axis=-1)


def pucci_minus_batch(M: np.ndarray, ell: EllipticityPair) -> np.ndarray:
    eigs = eigenvalues_batch(M)
    return (ell.lam * np.maximum(eigs, 0.0) - ell.Lam * np.maximum(-eigs, 0.0)).sum(axis=-1)


def pucci_plus_batch(M: np.ndarray, ell: EllipticityPair) -> np.ndarray:
    eigs = eigenvalues_batch(M)
    return (ell.Lam * np.maximum(eigs, 0.0) - ell.lam * np.maximum(-eigs, 0.0)).sum(axis=-1)
