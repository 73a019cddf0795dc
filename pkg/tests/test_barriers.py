import math

import numpy as np
import pytest

from krylov_growth_lab.barriers.barrier_certifier import (
    BarrierParams,
    alpha_threshold,
    certify_subsolution,
    compute_alpha,
    compute_C0,
    gamma_final,
    log_gamma_final,
    log_lemma_lbnd_bound,
    psi_eval,
)
from krylov_growth_lab.barriers.krylov_lemma import krylov_constant, krylov_params, scaled_krylov_bound
from krylov_growth_lab.constants.constants_pipeline import (
    chain_step_params,
    easy_case_params,
    upright_step_params,
)
from krylov_growth_lab.errors import CertificationFailure, DomainViolation
from krylov_growth_lab.solver.finite_difference_solver import solve
from krylov_growth_lab.solver.grid import Grid, OperatorSpec

SAMPLES = 20_000


def test_chain_step_constants(unit_ell):
    p = chain_step_params(unit_ell, 1)
    assert compute_C0(p) == pytest.approx(6.375)
    assert alpha_threshold(p) == pytest.approx(70.125)
    assert compute_alpha(p) == pytest.approx(70.82625)


def test_final_gamma_for_integer_exponent():
    assert log_gamma_final(0.5, 0.25, 71.0) == pytest.approx(-138 * math.log(2.0))
    assert gamma_final(0.5, 0.25, 71.0) == pytest.approx(2.0 ** -138)


def test_gamma_decreases_with_alpha_and_smaller_disc():
    assert gamma_final(0.5, 0.25, 10.0) > gamma_final(0.5, 0.25, 20.0)
    assert gamma_final(0.5, 0.2, 10.0) < gamma_final(0.5, 0.25, 10.0)


def test_easy_case_needs_reduction(unit_ell):
    with pytest.raises(DomainViolation):
        BarrierParams(1e-3, 0.25, 1.0, 0.75, 4.0, unit_ell)
    p = easy_case_params(0.5, unit_ell, 1)
    assert p.was_reduced
    assert p.delta == pytest.approx(5e-4)
    assert p.requested_delta == 0.25
    assert p.tau2 == pytest.approx(4.0)


def test_params_reject_bad_time_scales(unit_ell):
    with pytest.raises(DomainViolation):
        BarrierParams(0.5, 0.25, 1.0, 1.0, 0.5, unit_ell)


def test_psi_at_origin_and_outside():
    inside = psi_eval([0.0], 0.0, theta=0.5, delta=0.25, alpha=2.0)
    assert inside.inside
    assert inside.value == pytest.approx(1.0)
    outside = psi_eval([0.45], -0.9, theta=0.5, delta=0.25, alpha=2.0)
    assert not outside.inside
    assert outside.value == 0.0
    assert math.isnan(outside.time_derivative)


def test_psi_derivatives_match_finite_differences():
    theta, delta, alpha = 0.5, 0.25, 3.0
    x, t, eps = np.array([0.1, -0.05]), -0.3, 1e-5
    value = lambda y, s: psi_eval(y, s, theta, delta, alpha).value  # noqa: E731
    psi = psi_eval(x, t, theta, delta, alpha)
    for i in range(2):
        e = np.zeros(2)
        e[i] = eps
        grad_i = (value(x + e, t) - value(x - e, t)) / (2 * eps)
        assert psi.gradient[i] == pytest.approx(grad_i, rel=1e-6)
        hess_ii = (value(x + e, t) + value(x - e, t) - 2 * psi.value) / eps ** 2
        assert psi.hessian[i, i] == pytest.approx(hess_ii, rel=1e-3)
    dt_fd = (value(x, t + eps) - value(x, t - eps)) / (2 * eps)
    assert psi.time_derivative == pytest.approx(dt_fd, rel=1e-6)


@pytest.mark.parametrize("N", [1, 2])
def test_certificate_at_computed_exponent(N, unit_ell):
    p = chain_step_params(unit_ell, N)
    certificate = certify_subsolution(p, sample_density=SAMPLES)
    assert certificate.valid
    assert certificate.sample_count >= SAMPLES
    assert certificate.log_gamma_final == pytest.approx(log_gamma_final(0.5, 0.25, compute_alpha(p)))
    certificate.raise_if_invalid()


def test_certificate_survives_larger_exponent(wide_ell):
    p = chain_step_params(wide_ell, 1)
    assert certify_subsolution(p, sample_density=SAMPLES, alpha=2 * compute_alpha(p)).valid


def test_zero_exponent_is_rejected(unit_ell):
    certificate = certify_subsolution(chain_step_params(unit_ell, 1), sample_density=SAMPLES, alpha=0.0)
    assert not certificate.valid
    with pytest.raises(CertificationFailure) as excinfo:
        certificate.raise_if_invalid()
    assert excinfo.value.residual > 0


@pytest.mark.parametrize("N", [1, 2])
@pytest.mark.parametrize("scale", [1.0, 0.0])
def test_doubling_samples_keeps_the_verdict(N, scale, unit_ell):
    p = chain_step_params(unit_ell, N)
    alpha = scale * compute_alpha(p)
    coarse = certify_subsolution(p, sample_density=SAMPLES, alpha=alpha)
    fine = certify_subsolution(p, sample_density=2 * SAMPLES, alpha=alpha)
    assert fine.sample_count > coarse.sample_count
    assert coarse.valid == fine.valid == (scale > 0)


@pytest.mark.parametrize("factory", [upright_step_params, lambda ell, N: easy_case_params(0.5, ell, N)])
def test_other_parameter_sets_certify(factory, unit_ell):
    assert certify_subsolution(factory(unit_ell, 1), sample_density=SAMPLES).valid


def test_krylov_params_follow_kappa(unit_ell):
    p = krylov_params(0.25, unit_ell, 1)
    assert p.theta == pytest.approx(0.75)
    assert p.delta == pytest.approx(0.375)
    assert p.eta == 0.0
    with pytest.raises(DomainViolation):
        krylov_params(1.0, unit_ell, 1)


def test_krylov_bound_scales_with_radius(unit_ell):
    full = scaled_krylov_bound(0.5, unit_ell, 1, sigma=1.0, r=1.0)
    half = scaled_krylov_bound(0.5, unit_ell, 1, sigma=1.0, r=0.5)
    assert half == pytest.approx(0.25 * full)
    assert full == pytest.approx(krylov_constant(0.5, unit_ell, 1))


def test_krylov_constant_lies_below_discrete_solution(unit_ell):
    grid = Grid.create(1, unit_ell, nodes=33, time_cells=32)
    v = solve(grid, OperatorSpec.pucci_minus(unit_ell), 1.0)
    assert v.window_min(0.5, 0.0, 0.0) >= krylov_constant(0.5, unit_ell, 1)


def test_lemma_bound_lies_below_the_discrete_solution(unit_ell):
    p = BarrierParams.upright(0.5, unit_ell, 1, delta=0.25, tau=1.0)
    grid = Grid.create(1, unit_ell, nodes=65)
    u = solve(
        grid,
        OperatorSpec.pucci_minus(unit_ell),
        initial=lambda points: (np.abs(points[..., 0]) <= p.delta + 1e-12).astype(float),
    )
    window_min = u.window_min(1.0 - p.theta, 0.0, 0.0)
    assert window_min > 0.0
    assert math.log(window_min) >= log_lemma_lbnd_bound(p)
