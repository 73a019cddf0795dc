import numpy as np
import pytest

from krylov_growth_lab.errors import CFLViolation, EllipticityViolation
from krylov_growth_lab.geometry.cylinders import ParabolicCylinder
from krylov_growth_lab.geometry.indicator_set import IndicatorSet
from krylov_growth_lab.geometry.lattice import SpaceTimeLattice
from krylov_growth_lab.pucci.pucci_operators import EllipticityPair
from krylov_growth_lab.solver.finite_difference_solver import (
    CellSource,
    FiniteDifferenceSolver,
    FunctionSource,
    comparison_test,
    fundamental_solution,
    solve,
)
from krylov_growth_lab.solver.grid import Grid, OperatorSpec


def _grid(N, ell, nodes, time_cells=None, frames=8):
    return Grid.create(N, ell, nodes=nodes, time_cells=time_cells, frames=frames)


def _square(points, t):
    return np.sum(points ** 2, axis=-1)


def test_grid_respects_cfl(unit_ell):
    grid = _grid(1, unit_ell, 129)
    assert grid.dt <= 0.9 * grid.h ** 2 / 2 + 1e-15
    assert grid.time_levels % grid.snapshots == 0
    assert grid.snapshot_times[-1] == pytest.approx(0.0)


def test_step_rejects_large_time_step(unit_ell):
    grid = _grid(1, unit_ell, 33)
    solver = FiniteDifferenceSolver(grid, OperatorSpec.pucci_minus(unit_ell))
    u = np.zeros(grid.lattice.shape)
    with pytest.raises(CFLViolation):
        solver.step(u, u, -1.0, dt=2 * grid.dt_limit)


def test_zero_data_gives_zero(unit_ell):
    grid = _grid(1, unit_ell, 33)
    u = solve(grid, OperatorSpec.pucci_minus(unit_ell))
    assert np.all(u.values == 0.0)


@pytest.mark.parametrize("lam, Lam, expected", [(1.0, 1.0, 2.0), (0.5, 2.0, 1.0)])
def test_second_difference_of_quadratic_is_exact(lam, Lam, expected):
    ell = EllipticityPair(lam, Lam)
    grid = _grid(1, ell, 129)
    solver = FiniteDifferenceSolver(grid, OperatorSpec.pucci_minus(ell))
    F = solver.apply_operator(_square(grid.lattice.points, 0.0), -1.0)
    assert np.max(np.abs(F[grid.lattice.interior] - expected)) <= 1e-10


def test_linear_scheme_reproduces_quadratic_solution(unit_ell):
    grid = _grid(1, unit_ell, 129)
    exact = lambda points, t: _square(points, t) + 2 * t  # noqa: E731
    u = solve(grid, OperatorSpec.linear(unit_ell), boundary=exact)
    expected = np.stack([exact(grid.lattice.points, t) for t in u.times])
    assert np.max(np.abs(u.values - expected)) <= 1e-10


def test_pucci_scheme_reproduces_quadratic_solution(wide_ell):
    grid = _grid(1, wide_ell, 129)
    exact = lambda points, t: _square(points, t) + 2 * wide_ell.lam * t  # noqa: E731
    u = solve(grid, OperatorSpec.pucci_minus(wide_ell), boundary=exact)
    expected = np.stack([exact(grid.lattice.points, t) for t in u.times])
    assert np.max(np.abs(u.values - expected)) <= 1e-10


def test_manufactured_quartic_converges_at_second_order(unit_ell):
    quartic = lambda points, t: points[..., 0] ** 4  # noqa: E731
    errors = []
    for nodes in (33, 65, 129):
        grid = _grid(1, unit_ell, nodes)
        source = FunctionSource(grid.lattice, lambda p, t: -12 * unit_ell.lam * p[..., 0] ** 2, steady=True)
        u = solve(grid, OperatorSpec.pucci_minus(unit_ell), source, boundary=quartic)
        errors.append(np.max(np.abs(u.values[-1] - quartic(grid.lattice.points, 0.0))))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(orders >= 1.8)


def test_fundamental_solution_of_empty_set_vanishes(unit_ell):
    lattice = SpaceTimeLattice(N=1, nodes=33, time_cells=32)
    w = fundamental_solution(IndicatorSet.empty(lattice), unit_ell)
    assert w.role == "fundamental"
    assert np.all(w.values == 0.0)


def test_fundamental_solution_of_full_set_is_below_one_plus_t(unit_ell):
    lattice = SpaceTimeLattice(N=1, nodes=33, time_cells=32)
    w = fundamental_solution(IndicatorSet.full(lattice), unit_ell)
    assert np.all(w.values <= (1.0 + w.times)[:, np.newaxis] + 1e-12)
    assert w.values[-1].max() > 0.1


def test_fundamental_solution_is_monotone_in_the_set(unit_ell):
    rng = np.random.default_rng(5)
    lattice = SpaceTimeLattice(N=1, nodes=33, time_cells=32)
    interior = np.broadcast_to(lattice.interior, (32, 33))
    big = IndicatorSet(lattice, interior & (rng.random((32, 33)) < 0.5))
    small = IndicatorSet(lattice, big.mask & (rng.random((32, 33)) < 0.5))
    w_small = fundamental_solution(small, unit_ell)
    w_big = fundamental_solution(big, unit_ell)
    assert np.all(w_small.values <= w_big.values + 1e-12)


def test_positivity_for_nonnegative_source(wide_ell):
    rng = np.random.default_rng(8)
    grid = _grid(1, wide_ell, 33, time_cells=16)
    source = CellSource(grid.lattice, rng.random((16, 33)))
    u = FiniteDifferenceSolver(grid, OperatorSpec.pucci_minus(wide_ell)).solve(source)
    assert u.values.min() >= 0.0


def _sensitivities(solver, u, t):
    base = solver.step(u, np.zeros_like(u), t)
    eps = 1e-6
    flat = u.reshape(-1)
    worst = np.inf
    for j in range(flat.size):
        bumped = flat.copy()
        bumped[j] += eps
        moved = solver.step(bumped.reshape(u.shape), np.zeros_like(u), t)
        worst = min(worst, float(((moved - base) / eps)[solver.lattice.interior].min()))
    return worst


@pytest.mark.parametrize("kind", ["pucci_minus", "pucci_plus", "linear"])
def test_update_is_monotone_in_every_node_1d(kind, wide_ell):
    grid = _grid(1, wide_ell, 17, time_cells=4)
    solver = FiniteDifferenceSolver(grid, OperatorSpec(kind, wide_ell))
    u = np.random.default_rng(1).normal(size=grid.lattice.shape)
    assert _sensitivities(solver, u, -1.0) >= -1e-6


@pytest.mark.parametrize("kind", ["pucci_minus", "linear"])
def test_update_is_monotone_in_every_node_2d(kind, wide_ell):
    grid = _grid(2, wide_ell, 9, time_cells=4, frames=4)
    solver = FiniteDifferenceSolver(grid, OperatorSpec(kind, wide_ell))
    u = np.random.default_rng(2).normal(size=grid.lattice.shape)
    assert _sensitivities(solver, u, -1.0) >= -1e-6


def test_frame_and_linear_operators_agree_when_lambdas_coincide():
    ell = EllipticityPair(0.7, 0.7)
    grid = _grid(1, ell, 65)
    u = np.sin(2.0 * grid.lattice.points[..., 0]) + grid.lattice.points[..., 0] ** 3
    frame = FiniteDifferenceSolver(grid, OperatorSpec.pucci_minus(ell)).apply_operator(u, -0.5)
    linear = FiniteDifferenceSolver(grid, OperatorSpec.linear(ell)).apply_operator(u, -0.5)
    assert np.max(np.abs(frame - linear)) <= 1e-12


def test_planar_operators_on_paraboloid(unit_ell):
    grid = _grid(2, unit_ell, 33)
    u = _square(grid.lattice.points, 0.0)
    interior = grid.lattice.interior
    nine_point = FiniteDifferenceSolver(grid, OperatorSpec.linear(unit_ell)).apply_operator(u, -1.0)
    wide = FiniteDifferenceSolver(grid, OperatorSpec.pucci_minus(unit_ell), boundary=_square).apply_operator(u, -1.0)
    assert np.max(np.abs(nine_point[interior] - 4.0)) <= 1e-10
    assert np.max(np.abs(wide[interior] - 4.0)) <= 0.5


def test_nine_point_scheme_rejects_non_dominant_coefficients():
    ell = EllipticityPair(0.1, 2.5)
    A = np.array([[0.5, 0.8], [0.8, 2.0]])
    op = OperatorSpec.linear(ell, lambda points, t: np.broadcast_to(A, points.shape[:-1] + (2, 2)))
    solver = FiniteDifferenceSolver(_grid(2, ell, 9, time_cells=4, frames=4), op)
    with pytest.raises(EllipticityViolation):
        solver.apply_operator(np.zeros(solver.lattice.shape), -1.0)


def test_refinement_changes_solution_by_order_h(unit_ell):
    source = lambda points, t: np.cos(0.5 * np.pi * points[..., 0])  # noqa: E731
    coarse = solve(_grid(1, unit_ell, 33), OperatorSpec.pucci_minus(unit_ell), source)
    fine = solve(_grid(1, unit_ell, 65), OperatorSpec.pucci_minus(unit_ell), source)
    assert np.max(np.abs(fine.on_lattice(coarse.lattice) - coarse.values)) <= coarse.lattice.h


def test_comparison_with_identical_data(unit_ell):
    solver = FiniteDifferenceSolver(_grid(1, unit_ell, 17, time_cells=8), OperatorSpec.pucci_minus(unit_ell))
    assert comparison_test(solver, (1.0, None), (1.0, None))


def test_comparison_with_raised_boundary(unit_ell):
    grid = _grid(1, unit_ell, 17, time_cells=8)
    solver = FiniteDifferenceSolver(grid, OperatorSpec.pucci_minus(unit_ell))
    one = lambda points, t: np.ones(points.shape[:-1])  # noqa: E731
    assert comparison_test(solver, (0.5, None), (0.5, one))
    lower = solver.solve(0.5)
    upper = FiniteDifferenceSolver(grid, OperatorSpec.pucci_minus(unit_ell), one).solve(0.5)
    assert np.all(upper.values[:, grid.lattice.interior] > lower.values[:, grid.lattice.interior])


def _random_boundary(rng, N):
    k = rng.normal(size=N)
    a, w = rng.uniform(0.0, 1.0, size=2)
    return lambda points, t: a * (1.0 + np.sin(points @ k + w * t))


@pytest.mark.parametrize("N, nodes, pairs", [(1, 17, 50), (2, 9, 50)])
def test_random_ordered_pairs_stay_ordered(N, nodes, pairs, wide_ell):
    rng = np.random.default_rng(21)
    grid = _grid(N, wide_ell, nodes, time_cells=8, frames=4)
    solver = FiniteDifferenceSolver(grid, OperatorSpec.pucci_minus(wide_ell))
    shape = (8,) + grid.lattice.shape
    for _ in range(pairs):
        base = _random_boundary(rng, N)
        lift = _random_boundary(rng, N)
        upper = lambda points, t, base=base, lift=lift: base(points, t) + lift(points, t)  # noqa: E731
        f_lo = rng.uniform(-1.0, 1.0, size=shape)
        f_hi = f_lo + rng.uniform(0.0, 1.0, size=shape)
        assert comparison_test(
            solver,
            (CellSource(grid.lattice, f_lo), base),
            (CellSource(grid.lattice, f_hi), upper),
        )
