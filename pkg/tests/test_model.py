import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from bilapeig.errors import ConstructionError
from bilapeig.model import (BlendSpec, Indicator, Perturbation, PolynomialBump, Potential, RadialGrid,
                            RadialProfile, add_core_bump, bilaplacian, build_theta, build_u0,
                            core_bump_profile, default_potential, r_norm)


def test_u0_is_one_inside_and_k0_outside(potential):
    u0 = potential.generator_u0
    assert u0(np.array(0.5)) == 1.0
    assert u0(np.array(3.0)) == pytest.approx(special.k0(3.0), rel=1e-12, abs=0)


def test_u0_positive(potential):
    assert np.min(potential.generator_u0.samples) > 0


def test_theta_flat_and_supported(potential):
    assert potential.theta_at(0.7) == 1.0
    assert potential.theta_at(2.5) == 0.0
    nodes = potential.grid.nodes
    th = potential.theta_at(nodes)
    assert np.all(th[nodes <= 1.0] == 1.0)
    assert np.all(th[nodes >= 2.0] == 0.0)


def test_bilaplacian_of_u0_vanishes_where_constant(potential):
    d = potential.generator.derivs(np.array([0.5]))
    assert bilaplacian(d, np.array([0.5]))[0] == 0.0


def test_u0_solves_the_eigen_equation_identically(potential):
    r = potential.grid.nodes
    d = potential.generator.derivs(r)
    res = bilaplacian(d, r) + potential.theta_at(r) * d[0] - d[0]
    assert np.max(np.abs(res)) <= 1e-12


def test_theta_scalar_matches_direct_evaluation(potential):
    r = np.linspace(0.01, 3.0, 997)
    direct = potential.theta_at(r)
    fast = np.array([potential.theta_scalar(float(x)) for x in r])
    assert np.max(np.abs(fast - direct)) <= 1e-10 * np.max(np.abs(direct))


def test_u0_needs_room_past_the_blend():
    short = RadialGrid.uniform(r1=2.2, r2=2.3, r3=2.35, r_max=2.4, core_points=880)
    with pytest.raises(ConstructionError):
        build_u0(short)


def test_exponential_blend_also_builds(grid):
    pot = build_theta(build_u0(grid, BlendSpec(kind="exp")))
    assert pot.theta_at(0.5) == 1.0 and pot.theta_at(2.2) == 0.0


def test_core_bump_zero_is_identity(potential):
    assert add_core_bump(potential, 0.0, core_bump_profile(potential.grid)) is potential


def test_core_bump_changes_theta_only_inside(potential):
    bumped = add_core_bump(potential, 0.1, core_bump_profile(potential.grid))
    r = potential.grid.nodes
    changed = bumped.theta_at(r) != potential.theta_at(r)
    assert changed.any()
    assert np.all((r[changed] > 0.5) & (r[changed] < 1.0))


def test_core_bump_keeps_eigen_identity(potential):
    bumped = add_core_bump(potential, 0.1, core_bump_profile(potential.grid))
    r = potential.grid.nodes
    d = bumped.generator.derivs(r)
    bilap = bilaplacian(d, r)
    res = bilap + bumped.theta_at(r) * d[0] - d[0]
    # exact up to rounding of terms as large as |Δ²u| ~ 1e4
    assert np.max(np.abs(res)) <= 1e-15 * np.max(np.abs(bilap))


def test_core_bump_support_violation(potential):
    wide = RadialProfile.from_function(potential.grid, PolynomialBump(0.75, 0.4))
    with pytest.raises(ConstructionError):
        add_core_bump(potential, 0.1, wide)


def test_core_bump_positivity_violation(potential):
    with pytest.raises(ConstructionError):
        add_core_bump(potential, -2.0, core_bump_profile(potential.grid))


def test_r_norm_zero(grid):
    assert r_norm(Perturbation.from_core(grid, {}, 3)) == 0.0


def test_r_norm_linear_mode_one(grid):
    rho = Perturbation.from_core(grid, {1: grid.core.copy()}, 1)
    assert r_norm(rho) ** 2 == pytest.approx(np.sqrt(2.0) * grid.r1**4 / 4, rel=1e-13)


def test_r_norm_symmetric_modes(grid):
    f = np.sin(grid.core)
    rho = Perturbation.from_core(grid, {4: f, -4: f}, 4)
    expected = 2 * np.sqrt(17.0) * grid.integrate_core(f * f)
    assert r_norm(rho) ** 2 == pytest.approx(expected, rel=1e-14)


def test_quadrature_order(grid):
    f = lambda r: np.cos(r) * np.exp(-r)
    coarse = RadialGrid.uniform(core_points=100)
    fine = coarse.refined(2)
    finer = coarse.refined(4)
    e1 = abs(coarse.integrate_core(f(coarse.core)) - finer.integrate_core(f(finer.core)))
    e2 = abs(fine.integrate_core(f(fine.core)) - finer.integrate_core(f(finer.core)))
    # Simpson: halving h divides the error by ~16 (≥ 4th order)
    assert e1 / e2 >= 12.0


def test_s_of_r_round_trip_and_monotone(grid):
    s = grid.s_of_r(grid.nodes)
    assert np.all(np.diff(s) > 0)
    assert np.max(np.abs(grid.r_of_s(s) - grid.nodes)) <= 1e-12 * grid.r_max
    mid = np.linspace(grid.r2, grid.r3, 201)
    der = grid.ds_dr(mid)
    assert np.min(der) > 0 and np.max(der) < 10


def test_theta_fourth_differences_bounded_under_refinement():
    # a jump in theta or theta' would keep the raw fourth differences from shrinking
    jumps = []
    for n in (1000, 2000, 4000):
        g = RadialGrid.uniform(core_points=n)
        th = default_potential(g).theta_at(g.core)
        jumps.append(np.max(np.abs(np.diff(th, 4))))
    assert jumps[1] <= jumps[0] / 2 and jumps[2] <= jumps[1] / 2


def test_grid_invariants_enforced():
    with pytest.raises(ConstructionError):
        RadialGrid(np.linspace(0.1, 3, 30), 2.5, 2.0, 4.0)
    with pytest.raises(ConstructionError):
        RadialGrid.uniform(core_points=999)


def test_profile_length_checked(grid):
    with pytest.raises(ConstructionError):
        RadialProfile(grid, np.zeros(3))


def test_profile_csv_and_json_round_trip(tmp_path, potential):
    prof = potential.theta
    path = tmp_path / "theta.csv"
    prof.to_csv(path)
    back = RadialProfile.from_csv(path, potential.grid)
    assert np.array_equal(back.samples, prof.samples)
    again = RadialProfile.from_json(json.loads(json.dumps(prof.to_json())), potential.grid)
    assert np.array_equal(again.samples, prof.samples)
    assert path.read_text().splitlines()[0] == "r,value"


def test_perturbation_must_vanish_beyond_r1(grid):
    full = np.ones(grid.nodes.size)
    with pytest.raises(ConstructionError):
        Perturbation(grid, {1: RadialProfile(grid, full, 1)}, 1)


def test_perturbation_json_round_trip(tmp_path, grid):
    rho = Perturbation.from_functions(grid, {0: np.sin, 3: np.cos}, 5)
    rho.save(tmp_path / "rho.json")
    back = Perturbation.from_json(json.loads((tmp_path / "rho.json").read_text()), grid)
    assert back.kmax == 5 and set(back.modes) == {0, 3}
    assert np.array_equal(back.core_samples(3), rho.core_samples(3))


def test_indicator_half_value_makes_simpson_exact(grid):
    vals = Indicator(0.0, 1.0)(grid.core)
    assert grid.integrate_core(vals) == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 3) | st.floats(-3, -0.01), st.floats(-3, 3), st.integers(-6, 6))
def test_r_norm_homogeneous(a, b, k):
    grid = RadialGrid.uniform(core_points=200)
    f = np.exp(-grid.core) * (1 + b * grid.core)
    rho = Perturbation.from_core(grid, {k: f}, 6)
    assert r_norm(rho * a) == pytest.approx(abs(a) * r_norm(rho), rel=1e-12, abs=1e-300)


def test_constant_potential_has_no_generator(grid):
    pot = Potential.constant(grid, 0.0)
    assert pot.theta_at(5.0) == 0.0 and pot.generator is None
