import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from krylov_growth_lab.errors import DomainViolation, GeometryViolation
from krylov_growth_lab.geometry.chain_plan import chain_length, chain_plan
from krylov_growth_lab.geometry.covering import (
    covering_cylinders,
    cylinder_density,
    cylinder_mass,
    pigeonhole_cylinder,
)
from krylov_growth_lab.geometry.cylinders import (
    ObliqueCylinder,
    ParabolicCylinder,
    choose_c1,
    cylinder_measure,
    ensure_inside,
    lower_cylinder,
    shrunk_cylinder_gap,
)
from krylov_growth_lab.geometry.indicator_set import IndicatorSet
from krylov_growth_lab.geometry.lattice import SpaceTimeLattice


def test_unit_cylinder_measure_is_one():
    assert ParabolicCylinder.unit(1).measure() == pytest.approx(1.0)
    assert ParabolicCylinder.unit(2).measure() == pytest.approx(1.0)


def test_cylinder_measure_scales_with_radius():
    cyl = ParabolicCylinder((0.0, 0.0), 0.0, 0.5)
    assert cylinder_measure(cyl, 2) == pytest.approx(0.5 ** 4)


def test_parabolic_boundary_excludes_open_top():
    cyl = ParabolicCylinder.unit(1)
    assert cyl.on_parabolic_boundary((0.0,), -1.0)
    assert cyl.on_parabolic_boundary((1.0,), -0.5)
    assert not cyl.on_parabolic_boundary((0.0,), 0.0)
    assert cyl.contains((0.0,), 0.0)
    assert not cyl.contains((0.0,), -1.0)


def test_inside_and_ensure_inside():
    outer = ParabolicCylinder.unit(1)
    assert lower_cylinder(0.5, 1).inside(outer)
    with pytest.raises(GeometryViolation):
        ensure_inside(ParabolicCylinder((0.8,), 0.0, 0.5), outer)


def test_oblique_cylinder_ratios():
    cyl = ObliqueCylinder((0.0,), -1.0, (0.5,), -0.8125, 0.5)
    assert cyl.drift_ratio == pytest.approx(1.0)
    assert cyl.aspect_ratio == pytest.approx(0.75)
    assert cyl.contains((0.25,), -0.90625)


@given(kappa=st.floats(0.01, 0.99), m=st.floats(0.001, 1.0), N=st.sampled_from([1, 2]))
@settings(max_examples=200, deadline=None)
def test_shrink_gap_is_below_kappa_m(kappa, m, N):
    c1 = choose_c1(kappa, N)
    assert shrunk_cylinder_gap(c1, m, N) <= kappa * m + 1e-15


def test_shrink_gap_rejects_full_shrink():
    with pytest.raises(DomainViolation):
        shrunk_cylinder_gap(1.0, 1.0, 1)


def test_lattice_spacing_and_interior():
    lattice = SpaceTimeLattice(N=1, nodes=129)
    assert lattice.h == pytest.approx(1 / 64)
    assert lattice.interior.sum() == 127
    planar = SpaceTimeLattice(N=2, nodes=33)
    assert np.all(planar.distance[planar.interior] <= 1.0 - planar.h + 1e-12)


def test_time_cell_index_uses_half_open_cells():
    lattice = SpaceTimeLattice(N=1, nodes=17, time_cells=4)
    assert lattice.time_cell_index(-0.75) == 0
    assert lattice.time_cell_index(-0.74) == 1
    assert lattice.time_cell_index(0.0) == 3


def test_indicator_set_algebra():
    lattice = SpaceTimeLattice(N=1, nodes=33, time_cells=16)
    full = IndicatorSet.full(lattice)
    small = IndicatorSet.from_cylinder(lattice, ParabolicCylinder((0.0,), -0.5, 0.25))
    assert full.normalized_measure == pytest.approx(1.0)
    assert small.issubset(full)
    assert small.union(full).cell_count == full.cell_count
    assert small.intersection(IndicatorSet.empty(lattice)).is_empty()
    assert small.latest_time() <= -0.5 + 1e-12
    assert small.max_radius() < 0.25


def test_indicator_set_rejects_cells_outside_domain():
    lattice = SpaceTimeLattice(N=1, nodes=9, time_cells=2)
    mask = np.zeros((2, 9), dtype=bool)
    mask[0, 0] = True
    with pytest.raises(DomainViolation):
        IndicatorSet(lattice, mask)


def test_cylinder_density_of_full_set_is_one():
    lattice = SpaceTimeLattice(N=1, nodes=65, time_cells=64)
    full = IndicatorSet.full(lattice)
    cyl = ParabolicCylinder((0.0,), -0.5, 0.25)
    assert cylinder_density(full, cyl) == pytest.approx(1.0)
    assert cylinder_mass(full, cyl) == pytest.approx(cyl.measure(), rel=0.05)


def test_covering_reaches_the_top_of_the_shrunk_cylinder():
    centers, tops = covering_cylinders(0.9, 0.1, 1)
    assert tops.max() == pytest.approx(-1.0 + 0.81)
    assert np.all(np.diff(tops) > 0)
    assert centers.min() <= -0.9 + 1e-12 and centers.max() >= 0.9 - 0.1


def _recount_density(gamma, cyl):
    """|Gamma cap cyl| / |cyl| by direct overlap of every mask cell with the cylinder (N = 1)."""
    lattice = gamma.lattice
    x, h, tau = lattice.axes[0], lattice.h, lattice.tau
    c, r = cyl.center[0], cyl.radius
    space = np.clip(np.minimum(x + h / 2, c + r) - np.maximum(x - h / 2, c - r), 0.0, None)
    lo = lattice.t_bottom + tau * np.arange(lattice.time_cells)
    time = np.clip(np.minimum(lo + tau, cyl.top_time) - np.maximum(lo, cyl.top_time - r ** 2), 0.0, None)
    return float(time @ gamma.mask.astype(float) @ space) / (2 * r ** 3)


def _first_qualifying(gamma, c1, m, kappa):
    """Lexicographically first (time, space) lattice cylinder meeting the density bar, by brute force."""
    lattice = gamma.lattice
    rho, radius = 1.0 - c1 * m, c1 * m / 4
    centers, tops = covering_cylinders(rho, radius, 1)
    x, h, tau = lattice.axes[0], lattice.h, lattice.tau
    c = centers[:, 0]
    space = np.clip(
        np.minimum(x + h / 2, c[:, None] + radius) - np.maximum(x - h / 2, c[:, None] - radius), 0.0, None
    )
    lo = lattice.t_bottom + tau * np.arange(lattice.time_cells)
    time = np.clip(
        np.minimum(lo + tau, tops[:, None]) - np.maximum(lo, tops[:, None] - radius ** 2), 0.0, None
    )
    densities = time @ gamma.mask.astype(float) @ space.T / (2 * radius ** 3)
    k, j = np.argwhere(densities >= (1 - kappa) * m - 1e-12)[0]
    return ParabolicCylinder((float(c[j]),), float(tops[k]), radius)


def test_pigeonhole_finds_dense_cylinder():
    lattice = SpaceTimeLattice(N=1, nodes=129, time_cells=128)
    kappa, m = 0.5, 0.5
    c1 = choose_c1(kappa, 1)
    target = ParabolicCylinder((0.0,), -0.8, 0.3)
    gamma = IndicatorSet.from_cylinder(lattice, target)
    chosen = pigeonhole_cylinder(gamma, c1, m, kappa)
    assert chosen.radius == pytest.approx(c1 * m / 4)
    assert cylinder_density(gamma, chosen) >= (1 - kappa) * m
    assert _recount_density(gamma, chosen) >= (1 - kappa) * m - 1e-12
    assert chosen == _first_qualifying(gamma, c1, m, kappa)


def test_pigeonhole_takes_first_qualifying_cylinder_of_a_random_set():
    lattice = SpaceTimeLattice(N=1, nodes=129, time_cells=128)
    kappa, m = 0.5, 0.2
    c1 = choose_c1(kappa, 1)
    rng = np.random.default_rng(7)
    gamma = IndicatorSet(lattice, (rng.random((128, 129)) < m) & lattice.interior)
    chosen = pigeonhole_cylinder(gamma, c1, m, kappa)
    assert _recount_density(gamma, chosen) >= (1 - kappa) * m - 1e-12
    assert cylinder_density(gamma, chosen) == pytest.approx(_recount_density(gamma, chosen))
    assert chosen == _first_qualifying(gamma, c1, m, kappa)
    assert chosen.top_time <= -(c1 * m) ** 2


def test_pigeonhole_on_the_full_lower_cylinder_takes_the_first_lattice_cylinder():
    lattice = SpaceTimeLattice(N=1, nodes=129, time_cells=128)
    kappa, m = 0.5, 0.2
    c1 = choose_c1(kappa, 1)
    rho = 1.0 - c1 * m
    gamma = IndicatorSet.from_cylinder(lattice, lower_cylinder(rho, 1))
    chosen = pigeonhole_cylinder(gamma, c1, m, kappa)
    centers, tops = covering_cylinders(rho, c1 * m / 4, 1)
    assert chosen == ParabolicCylinder((float(centers[0, 0]),), float(tops[0]), c1 * m / 4)
    assert chosen == _first_qualifying(gamma, c1, m, kappa)


def test_pigeonhole_reports_missing_cylinder():
    lattice = SpaceTimeLattice(N=1, nodes=33, time_cells=32)
    with pytest.raises(DomainViolation):
        pigeonhole_cylinder(IndicatorSet.empty(lattice), 0.1, 0.5, 0.5)


def test_chain_length_is_exact():
    assert chain_length(1.25, 0.25) == 25
    assert chain_length(0.5, 0.5) == 1
    assert chain_length(0.0, 0.3) == 1
    assert chain_length(0.51, 0.5) == 2


def test_chain_plan_steps_have_fixed_shape():
    r = 0.5
    plan = chain_plan((0.5,), -0.75, (-0.5,), -0.75 + 0.75 * r ** 2, r)
    assert plan.step_count == 4
    assert plan.step_aspect == pytest.approx(0.75)
    assert plan.step_drift_ratio <= 1.0 + 1e-12
    assert len(plan.cylinders) == 4
    assert plan.materialized
    assert plan.cylinders[-1].top_center == pytest.approx((-0.5,))
    assert plan.end_steps == (plan.cylinders[0], plan.cylinders[-1])


def test_lazy_chain_plan_keeps_only_end_steps():
    r = 0.1
    full = chain_plan((0.9,), -0.5, (-0.5,), -0.5 + 0.75 * r ** 2, r)
    lazy = chain_plan((0.9,), -0.5, (-0.5,), -0.5 + 0.75 * r ** 2, r, materialize=False)
    assert lazy.step_count == full.step_count == 196
    assert lazy.cylinders == ()
    assert not lazy.materialized
    assert lazy.end_steps == full.end_steps


def test_chain_plan_leaving_the_domain_is_reported():
    r = 0.5
    with pytest.raises(GeometryViolation):
        chain_plan((0.9,), -0.5, (-0.9,), -0.5 + 0.75 * r ** 2, r)


def test_chain_plan_requires_three_quarter_time_gap():
    with pytest.raises(DomainViolation):
        chain_plan((0.0,), -0.5, (0.1,), -0.4, 0.5)


def test_chain_radius_matches_distance():
    plan = chain_plan((0.0, 0.0), -0.9, (0.3, 0.4), -0.9 + 0.75 * 0.04, 0.2)
    assert plan.step_count == math.ceil((0.5 / 0.2) ** 2)
