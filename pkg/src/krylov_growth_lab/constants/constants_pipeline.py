"""
constants_pipeline.py

Explicit lower-bound constants, composed from the barrier lemma upwards:

    barrier gamma  ->  growth lemma C_k  ->  c0, C_e and the chain of
    oblique steps  ->  measure-form bound  ->  L^{N+1} bound and the
    algebraic (doubling) variants.

Every constant is carried as a natural logarithm; the float values
underflow to 0.0 for realistic exponents.

Parameter sets
--------------
- easy case (r > kappa): theta = 1/1000, delta = 1/4 reduced to theta/2,
  eta = 1/kappa - 1, tau1 = 3/4, tau2 = 1/kappa^2
- chain step: theta = delta * 2 = 1/2, eta = 1, tau1 = tau2 = 3/4
- final upright step: theta = 1/2, delta = 1/4, eta = 0, tau = 3/4
- doubling step: theta = 1/2, delta = 1/4, eta = 1, tau = 1
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Any, Dict, Optional, Tuple

import numpy as np

from krylov_growth_lab.barriers.barrier_certifier import BarrierParams, compute_alpha, log_lemma_lbnd_bound
from krylov_growth_lab.barriers.krylov_lemma import log_krylov_constant
from krylov_growth_lab.errors import DomainViolation
from krylov_growth_lab.geometry.chain_plan import ChainPlan, chain_plan
from krylov_growth_lab.geometry.cylinders import choose_c1
from krylov_growth_lab.geometry.indicator_set import IndicatorSet
from krylov_growth_lab.pucci.pucci_operators import EllipticityPair

logger = logging.getLogger(__name__)

EASY_THETA = 1e-3
EASY_DELTA = 0.25
LEMMA_KAPPA = 0.5
ALPHA_CAP = 1e12
_TOL = 1e-9


@dataclass(frozen=True)
class FSConfig:
    """Fabes-Stroock exponent and constant; supplied, never derived."""

    sigma: float = 1.0
    C_cfs: float = 0.5
    source: str = "configured"

    def __post_init__(self):
        if not (self.sigma > 0 and self.C_cfs > 0):
            raise DomainViolation(f"sigma and C_cfs must be positive, got ({self.sigma}, {self.C_cfs})")


def _check_kappa(kappa: float) -> None:
    if not 0.0 < kappa < 1.0:
        raise DomainViolation(f"kappa must lie in (0, 1), got {kappa}")


def _exp(log_value: float) -> float:
    return 0.0 if log_value == -math.inf else math.exp(log_value)


def easy_case_params(kappa: float, ell: EllipticityPair, N: int) -> BarrierParams:
    _check_kappa(kappa)
    return BarrierParams.reduced(EASY_THETA, EASY_DELTA, 1.0 / kappa - 1.0, 0.75, 1.0 / kappa ** 2, ell, N)


def chain_step_params(ell: EllipticityPair, N: int) -> BarrierParams:
    return BarrierParams(0.5, 0.25, 1.0, 0.75, 0.75, ell, N)


def upright_step_params(ell: EllipticityPair, N: int) -> BarrierParams:
    return BarrierParams.upright(0.5, ell, N, delta=0.25, tau=0.75)


def doubling_step_params(ell: EllipticityPair, N: int) -> BarrierParams:
    return BarrierParams(0.5, 0.25, 1.0, 1.0, 1.0, ell, N)


@lru_cache(maxsize=None)
def log_c0(ell: EllipticityPair, N: int) -> float:
    """w >= c0 r^2 on B_{r/4}(x0) at t0' from the growth lemma on Q_{r/2}(x0, t0')."""
    return log_krylov_constant(LEMMA_KAPPA, ell, N) - math.log(4.0)


@lru_cache(maxsize=None)
def log_easy_constant(kappa: float, ell: EllipticityPair, N: int) -> float:
    return log_c0(ell, N) + log_lemma_lbnd_bound(easy_case_params(kappa, ell, N))


@lru_cache(maxsize=None)
def log_chain_step_constant(ell: EllipticityPair, N: int) -> float:
    return log_lemma_lbnd_bound(chain_step_params(ell, N))


@lru_cache(maxsize=None)
def log_upright_step_constant(ell: EllipticityPair, N: int) -> float:
    return log_lemma_lbnd_bound(upright_step_params(ell, N))


@lru_cache(maxsize=None)
def log_doubling_step_constant(ell: EllipticityPair, N: int) -> float:
    return log_lemma_lbnd_bound(doubling_step_params(ell, N))


def worst_case_chain(r: float, kappa: float, N: int) -> ChainPlan:
    """Chain from a source hugging the sphere at the bottom to the far side of B_kappa."""
    e1 = np.zeros(N)
    e1[0] = 1.0
    t0 = -1.0 + r ** 2
    return chain_plan((1.0 - r) * e1, t0 - 0.75 * r ** 2, -kappa * e1, t0, r, materialize=False)


def log_prop_qlbnd_bound(r: float, kappa: float, ell: EllipticityPair, N: int) -> float:
    _check_kappa(kappa)
    if not 0.0 < r <= 1.0:
        raise DomainViolation(f"Q_r must fit in Q_1, got r = {r}")
    if r > kappa:
        return log_easy_constant(kappa, ell, N) + 2 * math.log(r)
    plan = worst_case_chain(r, kappa, N)
    return (
        log_c0(ell, N)
        + 2 * math.log(r)
        + plan.step_count * log_chain_step_constant(ell, N)
        + log_upright_step_constant(ell, N)
    )


def prop_qlbnd_bound(r: float, kappa: float, ell: EllipticityPair, N: int) -> float:
    """Lower bound on B_kappa above a source cylinder Q_r inside Q_1."""
    return _exp(log_prop_qlbnd_bound(r, kappa, ell, N))


def shrunk_radius(m: float, kappa: float, N: int) -> float:
    return choose_c1(kappa, N) * m / 4.0


def _check_mass(m: float) -> None:
    if not 0.0 < m <= 1.0:
        raise DomainViolation(f"m must lie in (0, 1], got {m}")


def _log_fs_factor(m: float, kappa: float, fs: FSConfig) -> float:
    return math.log(fs.C_cfs) + fs.sigma * math.log((1.0 - kappa) * m)


def log_thm_lb_bound(m: float, level: float, kappa: float, ell: EllipticityPair, N: int, fs: FSConfig) -> float:
    _check_mass(m)
    if level < 0:
        raise DomainViolation(f"level must be nonnegative, got {level}")
    if level == 0:
        return -math.inf
    r = shrunk_radius(m, kappa, N)
    return log_prop_qlbnd_bound(r, kappa, ell, N) + _log_fs_factor(m, kappa, fs) + math.log(level)


def thm_lb_bound(m: float, level: float, kappa: float, ell: EllipticityPair, N: int, fs: FSConfig) -> float:
    """Lower bound for |x| <= kappa, -kappa m <= t <= 0 when |{f >= level}| >= m |Q_1|."""
    return _exp(log_thm_lb_bound(m, level, kappa, ell, N, fs))


def chain_beta(kappa: float, ell: EllipticityPair, N: int) -> float:
    """beta of the exp(-beta/m) form, from the chain-length estimate l <= 5/r."""
    return -log_chain_step_constant(ell, N) * 5.0 * 4.0 / choose_c1(kappa, N)


def level_set_reduction(f_norm: float, N: int) -> Tuple[float, float]:
    """(m, level) with |{f > f_norm/2}| >= f_norm^{N+1}/2 for 0 <= f <= 1."""
    return f_norm ** (N + 1) / 2.0, f_norm / 2.0


@dataclass(frozen=True)
class TSFSBound:
    bound: float
    log_bound: float
    alpha: float
    alpha_exact: float
    window: Optional[Tuple[float, float]]
    capped: bool
    m: float
    level: float


def thm_tsfs_bound(f_norm: float, kappa: float, ell: EllipticityPair, N: int, fs: FSConfig) -> TSFSBound:
    """Lower bound in terms of the normalized L^{N+1} norm of the source."""
    _check_kappa(kappa)
    if f_norm < 0 or f_norm >= 1:
        raise DomainViolation(f"f_norm must lie in [0, 1), got {f_norm}")
    if f_norm == 0:
        return TSFSBound(0.0, -math.inf, math.nan, math.nan, None, False, 0.0, 0.0)

    m, level = level_set_reduction(f_norm, N)
    log_bound = log_thm_lb_bound(m, level, kappa, ell, N, fs)
    rho = 2.0 + fs.sigma
    log_f = math.log(f_norm)
    alpha = rho + chain_beta(kappa, ell, N) * f_norm ** (-(N + 1)) / abs(log_f)
    capped = not math.isfinite(alpha) or alpha > ALPHA_CAP
    if capped:
        logger.warning(f"exponent for f_norm={f_norm} capped at {ALPHA_CAP:.0e}")
        alpha = ALPHA_CAP
    return TSFSBound(
        bound=_exp(log_bound),
        log_bound=log_bound,
        alpha=alpha,
        alpha_exact=log_bound / log_f,
        window=(-kappa * m, 0.0),
        capped=capped,
        m=m,
        level=level,
    )


def doubling_steps(r: float, kappa: float) -> int:
    """Doubling iterations from radius r out to kappa."""
    if r >= kappa:
        return 0
    return int(math.ceil(math.log2(kappa / r) - _TOL))


def log_algebraic_qlbnd(r: float, kappa: float, ell: EllipticityPair, N: int) -> float:
    """Algebraic lower bound for a source cylinder Q_r kept away from the lateral boundary."""
    _check_kappa(kappa)
    if not 0.0 < r <= 1.0:
        raise DomainViolation(f"Q_r must fit in Q_1, got r = {r}")
    if r >= kappa:
        return log_easy_constant(kappa, ell, N) + 2 * math.log(r)
    return log_c0(ell, N) + 2 * math.log(r) + doubling_steps(r, kappa) * log_doubling_step_constant(ell, N)


def algebraic_qlbnd(r: float, kappa: float, ell: EllipticityPair, N: int) -> float:
    return _exp(log_algebraic_qlbnd(r, kappa, ell, N))


def elliptic_limit_bound(r: float, kappa: float, ell: EllipticityPair, N: int) -> float:
    """Steady-state lower bound c0 r^2 gamma^l with l = ceil(log2(kappa / r))."""
    return algebraic_qlbnd(r, kappa, ell, N)


def check_lower_support(support: IndicatorSet, kappa: float) -> None:
    """Sources of the algebraic corollary live in B_{1-kappa} x (-1, -kappa]."""
    if support.is_empty():
        return
    if support.max_radius() > 1.0 - kappa + _TOL or support.latest_time() > -kappa + _TOL:
        raise DomainViolation(f"source support leaves B_(1-kappa) x (-1, -kappa] for kappa={kappa}")


def log_cor_slicklb_bound(
    f_norm: float, kappa: float, ell: EllipticityPair, N: int, fs: FSConfig, support: Optional[IndicatorSet] = None
) -> float:
    _check_kappa(kappa)
    if support is not None:
        check_lower_support(support, kappa)
    if f_norm < 0 or f_norm > 1:
        raise DomainViolation(f"f_norm must lie in [0, 1], got {f_norm}")
    if f_norm == 0:
        return -math.inf
    m, level = level_set_reduction(f_norm, N)
    r = shrunk_radius(m, kappa, N)
    return log_algebraic_qlbnd(r, kappa, ell, N) + _log_fs_factor(m, kappa, fs) + math.log(level)


def cor_slicklb_bound(
    f_norm: float, kappa: float, ell: EllipticityPair, N: int, fs: FSConfig, support: Optional[IndicatorSet] = None
) -> float:
    """Algebraic bound for |x| <= kappa, -kappa <= t <= 0 and sources below the slice."""
    return _exp(log_cor_slicklb_bound(f_norm, kappa, ell, N, fs, support))


@dataclass(frozen=True)
class ExponentBookkeeping:
    """log bound = log c + rho log m - l(m) |log gamma_step| + log level."""

    m: float
    chain_length: int
    log_bound: float
    rho_log_m: float
    chain_term: float
    log_c: float
    log_level: float
    chain_beta_term: float


def log_final_multiplier(kappa: float, ell: EllipticityPair, N: int, fs: FSConfig) -> float:
    c1 = choose_c1(kappa, N)
    return (
        log_c0(ell, N)
        + 2 * math.log(c1 / 4.0)
        + log_upright_step_constant(ell, N)
        + math.log(fs.C_cfs)
        + fs.sigma * math.log(1.0 - kappa)
    )


def exponent_bookkeeping(
    m: float, level: float, kappa: float, ell: EllipticityPair, N: int, fs: FSConfig
) -> ExponentBookkeeping:
    _check_mass(m)
    r = shrunk_radius(m, kappa, N)
    steps = worst_case_chain(r, kappa, N).step_count
    return ExponentBookkeeping(
        m=m,
        chain_length=steps,
        log_bound=log_thm_lb_bound(m, level, kappa, ell, N, fs),
        rho_log_m=(2.0 + fs.sigma) * math.log(m),
        chain_term=steps * log_chain_step_constant(ell, N),
        log_c=log_final_multiplier(kappa, ell, N, fs),
        log_level=math.log(level) if level > 0 else -math.inf,
        chain_beta_term=-chain_beta(kappa, ell, N) / m,
    )


@dataclass(frozen=True)
class ConstantsReport:
    kappa: float
    lam: float
    Lam: float
    N: int
    log_C_e: float
    log_c0: float
    log_chain_step_constant: float
    log_upright_step_constant: float
    log_doubling_step_constant: float
    log_C_k: float
    rho: float
    beta: float
    log_c: float
    alpha_easy: float
    alpha_chain_step: float
    fs_sigma: float
    fs_C: float
    fs_source: str
    provenance: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def build(cls, kappa: float, ell: EllipticityPair, N: int, fs: Optional[FSConfig] = None) -> "ConstantsReport":
        fs = fs or FSConfig()
        _check_kappa(kappa)
        easy = easy_case_params(kappa, ell, N)
        report = cls(
            kappa=kappa,
            lam=ell.lam,
            Lam=ell.Lam,
            N=N,
            log_C_e=log_easy_constant(kappa, ell, N),
            log_c0=log_c0(ell, N),
            log_chain_step_constant=log_chain_step_constant(ell, N),
            log_upright_step_constant=log_upright_step_constant(ell, N),
            log_doubling_step_constant=log_doubling_step_constant(ell, N),
            log_C_k=log_krylov_constant(kappa, ell, N),
            rho=2.0 + fs.sigma,
            beta=chain_beta(kappa, ell, N),
            log_c=log_final_multiplier(kappa, ell, N, fs),
            alpha_easy=compute_alpha(easy),
            alpha_chain_step=compute_alpha(chain_step_params(ell, N)),
            fs_sigma=fs.sigma,
            fs_C=fs.C_cfs,
            fs_source=fs.source,
            provenance={
                "C_e": "barrier bound, easy-case parameters (delta reduced to theta/2) times c0",
                "c0": "growth lemma at kappa=1/2 on the half-radius cylinder",
                "chain_step_constant": "barrier bound, theta=1/2, delta=1/4, eta=1, tau=3/4",
                "upright_step_constant": "barrier bound, theta=1/2, delta=1/4, eta=0, tau=3/4",
                "doubling_step_constant": "barrier bound, theta=1/2, delta=1/4, eta=1, tau=1",
                "C_k": "growth lemma, theta=1-kappa, delta=min(1/2, theta/2), upright",
                "beta": "chain-length estimate l <= 5/r; exact l reported by bookkeeping",
                "fs": f"Fabes-Stroock pair ({fs.source}), not derived",
            },
        )
        logger.info(f"Constants computed for kappa={kappa}, lambda={ell.lam}, Lambda={ell.Lam}, N={N}")
        return report

    def _value(self, log_value: float) -> float:
        return _exp(log_value)

    @property
    def C_e(self) -> float:
        return self._value(self.log_C_e)

    @property
    def c0(self) -> float:
        return self._value(self.log_c0)

    @property
    def chain_step_constant(self) -> float:
        return self._value(self.log_chain_step_constant)

    @property
    def C_k(self) -> float:
        return self._value(self.log_C_k)

    @property
    def c(self) -> float:
        return self._value(self.log_c)

    @property
    def ell(self) -> EllipticityPair:
        return EllipticityPair(self.lam, self.Lam)

    @property
    def fs(self) -> FSConfig:
        return FSConfig(self.fs_sigma, self.fs_C, self.fs_source)

    def to_dict(self) -> Dict[str, Any]:
        record = asdict(self)
        record.update(
            {
                "C_e": self.C_e,
                "c0": self.c0,
                "chain_step_constant": self.chain_step_constant,
                "C_k": self.C_k,
                "c": self.c,
            }
        )
        return record

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False, sort_keys=True)

    def to_key_value(self) -> str:
        return "\n".join(f"{key} = {value}" for key, value in sorted(self.to_dict().items()) if key != "provenance")
