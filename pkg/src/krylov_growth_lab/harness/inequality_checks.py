"""
inequality_checks.py

Per-member checks of the constructive lower bounds against the solver, the
ABP-type upper ratio and the Richardson tolerance floor.

A lower-bound check passes when

    min over the probe window of u  >=  bound - 2 * discretization error

where the discretization error is the largest |u_h - u_{h/2}| seen on a
subsample of members.
"""

import logging
import math
from typing import Any, Dict, Iterable, List, Optional

import numpy as np

from krylov_growth_lab.constants.constants_pipeline import (
    ConstantsReport,
    check_lower_support,
    cor_slicklb_bound,
    log_thm_lb_bound,
    thm_lb_bound,
    thm_tsfs_bound,
)
from krylov_growth_lab.errors import DomainViolation
from krylov_growth_lab.harness.ensemble_generator import EnsembleConfig, Member, generate_member
from krylov_growth_lab.solver.finite_difference_solver import CellSource, FiniteDifferenceSolver
from krylov_growth_lab.solver.grid import OperatorSpec

logger = logging.getLogger(__name__)

RICHARDSON_FRACTION = 0.1
TOLERANCE_FACTOR = 2.0
REFINEMENT_BAND = (0.5, 2.0)


def richardson_error(config: EnsembleConfig, indices: Iterable[int]) -> float:
    """max |u_h - u_{h/2}| over the given members, on the coarse nodes and shared snapshots."""
    fine_nodes = 2 * config.nodes - 1
    worst = 0.0
    for index in indices:
        coarse = generate_member(config, index).solution
        fine = generate_member(config, index, nodes=fine_nodes).solution
        gap = float(np.max(np.abs(fine.on_lattice(coarse.lattice) - coarse.values)))
        logger.debug(f"Richardson gap for member {index}: {gap:.3e}")
        worst = max(worst, gap)
    return worst


def richardson_subsample(count: int, fraction: float = RICHARDSON_FRACTION) -> List[int]:
    """Evenly spread member indices, at least one when the ensemble is nonempty."""
    if count == 0:
        return []
    size = max(1, int(math.ceil(fraction * count)))
    return sorted({int(i) for i in np.linspace(0, count - 1, size)})


def probe_minimum(member: Member, kappa: float, t_lo: float) -> float:
    """min of u over |x| <= kappa and t_lo <= t <= 0."""
    return member.solution.window_min(kappa, t_lo, 0.0)


def check_two_sided(member: Member, constants: ConstantsReport, tolerance: float) -> Dict[str, Any]:
    """Lower bound from the source norm, and the ABP ratio u_max / ||f||."""
    kappa = constants.kappa
    f_norm = member.f_norm
    u_max = member.solution.max()
    row: Dict[str, Any] = {"index": member.index, "check": "two-sided", "f_norm": f_norm, "u_max": u_max}

    if f_norm == 0.0:
        row.update(bound=0.0, log_bound=-math.inf, u_min=0.0, margin=0.0, passed=u_max <= 0.0, abp_ratio=0.0)
        return row
    if f_norm >= 1.0:
        row.update(bound=math.nan, log_bound=math.nan, u_min=math.nan, margin=math.nan, passed=True, abp_ratio=u_max)
        return row

    tsfs = thm_tsfs_bound(f_norm, kappa, constants.ell, constants.N, constants.fs)
    u_min = probe_minimum(member, kappa, tsfs.window[0])
    margin = u_min - tsfs.bound
    row.update(
        bound=tsfs.bound,
        log_bound=tsfs.log_bound,
        alpha=tsfs.alpha,
        alpha_exact=tsfs.alpha_exact,
        window_start=tsfs.window[0],
        u_min=u_min,
        margin=margin,
        passed=bool(margin >= -TOLERANCE_FACTOR * tolerance),
        abp_ratio=u_max / f_norm,
    )
    return row


def in_lower_slab(member: Member, kappa: float) -> bool:
    try:
        check_lower_support(member.gamma, kappa)
    except DomainViolation:
        return False
    return not member.gamma.is_empty()


def check_measure_form(member: Member, constants: ConstantsReport, tolerance: float) -> Dict[str, Any]:
    """Measure-form bound on |x| <= kappa, -kappa m <= t <= 0; the algebraic corollary when it applies."""
    kappa = constants.kappa
    m = member.m
    row: Dict[str, Any] = {"index": member.index, "check": "measure-form", "m": m, "level": member.level}
    if m == 0.0 or member.level <= 0.0:
        row.update(bound=0.0, log_bound=-math.inf, u_min=0.0, margin=0.0, passed=True)
        return row

    log_bound = log_thm_lb_bound(m, member.level, kappa, constants.ell, constants.N, constants.fs)
    bound = thm_lb_bound(m, member.level, kappa, constants.ell, constants.N, constants.fs)
    u_min = probe_minimum(member, kappa, -kappa * m)
    margin = u_min - bound
    row.update(
        bound=bound,
        log_bound=log_bound,
        u_min=u_min,
        margin=margin,
        passed=bool(margin >= -TOLERANCE_FACTOR * tolerance),
    )

    if in_lower_slab(member, kappa):
        slick = cor_slicklb_bound(min(member.f_norm, 1.0), kappa, constants.ell, constants.N, constants.fs)
        slick_min = probe_minimum(member, kappa, -kappa)
        row.update(
            slick_bound=slick,
            slick_margin=slick_min - slick,
            passed=row["passed"] and bool(slick_min - slick >= -TOLERANCE_FACTOR * tolerance),
        )
    return row


def empirical_abp_constant(rows: Iterable[Dict[str, Any]]) -> float:
    """Ensemble maximum of u_max / ||f||; order independent."""
    ratios = [r["abp_ratio"] for r in rows if r.get("check") == "two-sided" and math.isfinite(r.get("abp_ratio", math.nan))]
    return max(ratios, default=0.0)


def abp_refinement_ratio(config: EnsembleConfig, indices: Iterable[int]) -> Optional[float]:
    """C_emp at h/2 over C_emp at h on a member subsample."""
    coarse, fine = 0.0, 0.0
    for index in indices:
        member = generate_member(config, index)
        if member.f_norm == 0.0:
            continue
        refined = generate_member(config, index, nodes=2 * config.nodes - 1)
        coarse = max(coarse, member.solution.max() / member.f_norm)
        fine = max(fine, refined.solution.max() / refined.f_norm)
    if coarse == 0.0:
        return None
    return fine / coarse


def refinement_stable(ratio: Optional[float]) -> bool:
    """C_emp at h and h/2 agree within REFINEMENT_BAND; a missing estimate counts as stable."""
    if ratio is None or not math.isfinite(ratio):
        return True
    lo, hi = REFINEMENT_BAND
    return lo <= ratio <= hi


def measure_slope(config: EnsembleConfig, masses: Iterable[float]) -> Dict[str, Any]:
    """
    Growth of u(0, 0) with the measure of a bottom time slab Gamma = B_1 x (-1, -1 + m].

    Returns the fitted slope of log u(0, 0) against log m.
    """
    lattice = config.lattice()
    solver = FiniteDifferenceSolver(config.grid(), OperatorSpec.pucci_minus(config.ell))
    center = tuple(n // 2 for n in lattice.shape)
    values, ms = [], []
    for m in masses:
        slab = (lattice.cell_times <= -1.0 + m).reshape((-1,) + (1,) * lattice.N)
        source = np.broadcast_to(slab & lattice.interior, (lattice.time_cells,) + lattice.shape).astype(float)
        u = solver.solve(CellSource(lattice, source))
        values.append(float(u.values[-1][center]))
        ms.append(float(m))
    logs = np.log(np.asarray(values))
    slope = float(np.polyfit(np.log(ms), logs, 1)[0])
    return {"m": ms, "u_center": values, "slope": slope}
