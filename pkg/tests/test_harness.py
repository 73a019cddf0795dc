import math
from dataclasses import replace

import numpy as np
import pytest

from krylov_growth_lab.constants.constants_pipeline import ConstantsReport
from krylov_growth_lab.errors import ConfigurationError, GeometryViolation
from krylov_growth_lab.geometry.indicator_set import IndicatorSet
from krylov_growth_lab.harness.elliptic_limit import elliptic_limit_run, steady_closed_form
from krylov_growth_lab.harness.ensemble_generator import EnsembleConfig, generate_member, source_norm
from krylov_growth_lab.harness.fabes_stroock_fit import (
    fit_power_law,
    fs_domain,
    fs_fit,
    fundamental_ratio,
    random_subset,
)
from krylov_growth_lab.harness.inequality_checks import (
    check_measure_form,
    check_two_sided,
    empirical_abp_constant,
    measure_slope,
    refinement_stable,
    richardson_subsample,
)
from krylov_growth_lab.pucci.pucci_operators import EllipticityPair
from krylov_growth_lab.solver.finite_difference_solver import fundamental_solution

TOLERANCE = 1e-12


@pytest.fixture
def small_config():
    return EnsembleConfig(seed=7, count=4, nodes=33, time_cells=32, frames=8)


@pytest.fixture
def constants(small_config):
    return ConstantsReport.build(small_config.kappa, small_config.ell, small_config.N)


def test_config_rejects_unknown_family():
    with pytest.raises(ConfigurationError):
        EnsembleConfig(source_family="noise")
    with pytest.raises(ConfigurationError):
        EnsembleConfig(m_range=(0.5, 0.1))


def test_members_are_reproducible(small_config):
    first = generate_member(small_config, 2)
    again = generate_member(replace(small_config, count=40), 2)
    assert np.array_equal(first.source, again.source)
    assert np.array_equal(first.solution.values, again.solution.values)
    assert first.gamma.issubset(IndicatorSet.full(first.lattice))


def test_mixed_family_alternates_operators(small_config):
    assert generate_member(small_config, 0).op.kind == "pucci_minus"
    odd = generate_member(small_config, 1)
    assert odd.op.kind == "linear"
    assert odd.dominated


@pytest.mark.parametrize("family", ["indicator-cells", "smooth-bumps", "level-set"])
def test_sources_respect_unit_range(family, small_config):
    member = generate_member(replace(small_config, source_family=family), 0)
    assert member.source.min() >= 0.0
    assert member.source.max() <= 1.0
    assert 0.0 < member.m <= 1.0
    assert member.level > 0.0
    assert 0.0 < member.f_norm <= 1.0


def test_source_norm_of_constant_field(small_config):
    lattice = small_config.lattice()
    values = np.full((lattice.time_cells,) + lattice.shape, 0.25)
    assert source_norm(values, lattice) == pytest.approx(0.25)


def test_bound_rows_pass_on_honest_members(small_config, constants):
    for index in range(small_config.count):
        member = generate_member(small_config, index)
        two_sided = check_two_sided(member, constants, TOLERANCE)
        measure = check_measure_form(member, constants, TOLERANCE)
        assert two_sided["passed"], two_sided
        assert measure["passed"], measure
        assert two_sided["abp_ratio"] > 0.0


def test_measure_rows_carry_the_log_bound(small_config, constants):
    for index in range(small_config.count):
        row = check_measure_form(generate_member(small_config, index), constants, TOLERANCE)
        assert math.isfinite(row["log_bound"])
        assert row["log_bound"] < 0.0
        assert row["bound"] == pytest.approx(math.exp(row["log_bound"]), abs=1e-300)
        if row["u_min"] > 0.0:
            assert math.log(row["u_min"]) >= row["log_bound"]


def test_corrupted_source_is_caught(small_config, constants):
    member = generate_member(replace(small_config, corrupt_source=True, source_family="level-set"), 0)
    row = check_two_sided(member, constants, TOLERANCE)
    assert row["u_min"] < 0.0
    assert not row["passed"]


def test_richardson_subsample():
    assert richardson_subsample(0) == []
    assert richardson_subsample(3) == [0]
    assert richardson_subsample(50) == [0, 12, 24, 36, 49]


def test_abp_constant_ignores_row_order():
    rows = [
        {"check": "two-sided", "abp_ratio": 0.4},
        {"check": "measure-form", "abp_ratio": 9.0},
        {"check": "two-sided", "abp_ratio": 0.7},
    ]
    assert empirical_abp_constant(rows) == empirical_abp_constant(rows[::-1]) == 0.7


def test_refinement_band_is_a_factor_of_two():
    assert refinement_stable(1.0)
    assert refinement_stable(0.5)
    assert refinement_stable(2.0)
    assert not refinement_stable(0.49)
    assert not refinement_stable(2.5)
    assert refinement_stable(None)
    assert refinement_stable(math.nan)


def test_measure_slope_grows_with_slab(small_config):
    result = measure_slope(small_config, (0.125, 0.25, 0.5))
    assert result["u_center"] == sorted(result["u_center"])
    assert 0.5 < result["slope"] < 2.5


def test_fs_domain_limits_radius():
    with pytest.raises(GeometryViolation):
        fs_domain(0.4, 1, 33)


def test_fundamental_ratio_is_one_on_the_cylinder_and_shrinks_on_subsets(unit_ell):
    lattice, cyl = fs_domain(0.25, 1, 33)
    full = IndicatorSet.from_cylinder(lattice, cyl)
    w_full = fundamental_solution(full, unit_ell, frames=8)
    assert fundamental_ratio(w_full, w_full, cyl)[0] == pytest.approx(1.0)

    rng = np.random.default_rng(3)
    half = random_subset(rng, full, 0.5)
    quarter = IndicatorSet(lattice, half.mask & (rng.random(half.mask.shape) < 0.5))
    r_half = fundamental_ratio(fundamental_solution(half, unit_ell, frames=8), w_full, cyl)[0]
    r_quarter = fundamental_ratio(fundamental_solution(quarter, unit_ell, frames=8), w_full, cyl)[0]
    assert r_quarter <= r_half + 1e-12
    assert r_half <= 1.0 + 1e-12


def test_power_law_fit_recovers_exact_data():
    densities = np.array([0.1, 0.3, 0.6, 1.0])
    sigma, C, r_squared = fit_power_law(densities, 0.5 * densities ** 1.5)
    assert sigma == pytest.approx(1.5)
    assert C == pytest.approx(0.5)
    assert r_squared == pytest.approx(1.0)


def test_small_fs_fit(unit_ell):
    report = fs_fit(r=0.25, sample_count=4, seed=17, ell=unit_ell, nodes=33, frames=8)
    assert report.samples[-1].density == 1.0
    assert report.samples[-1].ratio == pytest.approx(1.0)
    assert report.sigma_hat > 0.0
    fs = report.to_fs_config()
    assert fs.source == "empirical"
    assert fs.sigma == report.sigma_hat


def test_closed_form_is_continuous_at_the_source_edge():
    r = 0.3
    inner = steady_closed_form(np.array([r - 1e-12]), r)
    outer = steady_closed_form(np.array([r + 1e-12]), r)
    assert inner == pytest.approx(outer)


def test_elliptic_limit_matches_closed_form():
    row = elliptic_limit_run(0.25, ell=EllipticityPair(1.0, 1.0), nodes=257)
    assert row["converged"]
    assert row["passed"]
    assert row["closed_form_error"] <= 1e-4
    assert row["steady_min"] >= row["bound"]
    assert row["r_eff"] == pytest.approx(31.5 / 128)


def test_fs_fit_is_a_stable_power_law_across_seeds(unit_ell):
    reports = [fs_fit(r=0.25, sample_count=12, seed=seed, ell=unit_ell, nodes=65, frames=8) for seed in (17, 18, 19)]
    sigmas = [report.sigma_hat for report in reports]
    for report in reports:
        assert report.r_squared >= 0.9
        assert report.sigma_hat > 0.0
    assert (max(sigmas) - min(sigmas)) / np.mean(sigmas) <= 0.3
