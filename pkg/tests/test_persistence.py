import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bilapeig.errors import ConstructionError
from bilapeig.mode_ode import J, ModeFrame, ModeSystem, far_decaying_state, integrate_frame, log_scaling
from bilapeig.model import Indicator, Perturbation, PolynomialBump, r_norm
from bilapeig.persistence import (adjoint_w, adjoint_w0, bruteforce_radial_check, decompose,
                                  fit_homeomorphism, fit_mass_bounds, gprime, gprime_oracle,
                                  lambda_prime, perturbed_eigenvalue, ustar_mass)
from bilapeig.spectral import match_defect

ORACLE_BUMP = PolynomialBump(1.2, 0.6, 1.0, 6)


@pytest.mark.parametrize("k", range(1, 7))
def test_adjoint_annihilates_core_and_far(k, spec):
    w = adjoint_w(k, spec)
    grid = spec.grid
    w_r1 = w.covectors("log")[grid.i1]
    cols = match_defect(k, spec.lambda0, spec.potential).columns
    assert np.max(np.abs(w_r1 @ cols)) <= 1e-10 * np.linalg.norm(w_r1)
    assert w.state(grid.i1).norm_curlyXdual() == pytest.approx(1.0)
    assert w_r1[3] > 0


def test_adjoint_pairing_constant_along_core(spec, rng):
    k = 3
    w = adjoint_w(k, spec)
    grid = spec.grid
    system = ModeSystem(k, spec.lambda0, spec.potential)
    start = 0.1
    i0 = int(np.searchsorted(grid.nodes, start))
    u0 = rng.standard_normal(4)
    nodes = grid.nodes[i0 + 1: grid.i1 + 1]
    traj = integrate_frame(system, ModeFrame(k, grid.nodes[i0], u0[:, None], "t", "log"), nodes)
    fwd = traj.frames[:, :, 0] * np.exp(traj.ledger)[:, None]
    cov = w.covectors("log")[i0 + 1: grid.i1 + 1]
    pair = np.einsum("ij,ij->i", cov, fwd)
    # integration error scales with the largest |W||U| met so far, not the local size
    scale = np.maximum.accumulate(np.linalg.norm(cov, axis=1) * np.linalg.norm(fwd, axis=1))
    assert np.max(np.abs(pair - pair[0]) / scale) <= 1e-9


@pytest.mark.parametrize("k", (10, 20, 40))
def test_high_mode_adjoint_is_normalised_and_finite(k, spec):
    w = adjoint_w(k, spec)
    assert np.all(np.isfinite(w.w4))
    assert w.state(spec.grid.i1).norm_curlyXdual() == pytest.approx(1.0)
    # regular at the origin: the kernel weight decays towards r = 0
    assert abs(w.w4[0]) < abs(w.w4[spec.grid.i1])


def test_radial_covectors(spec):
    w03, w04 = adjoint_w0(spec)
    grid = spec.grid
    assert np.allclose(w03.w4, spec.u_star.samples[: grid.i1 + 1], rtol=0, atol=1e-14)
    ustar_r1 = spec.states("log")[grid.i1]
    assert abs(w03.covectors("log")[grid.i1] @ ustar_r1) <= 1e-14
    assert ustar_mass(spec) > 0


def test_lambda_prime_of_zero(spec, grid):
    assert lambda_prime(spec, Perturbation.from_core(grid, {0: np.zeros(grid.i1 + 1)})) == 0.0


def test_lambda_prime_of_inner_indicator(spec, grid):
    rho = Perturbation.from_core(grid, {0: Indicator(0.0, 1.0)(grid.core)})
    # u_* is flat (= 1 after sup normalisation) on [0, 1]
    assert lambda_prime(spec, rho) == pytest.approx(0.5 / ustar_mass(spec), rel=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 2.3), st.floats(0.05, 0.2), st.floats(0.1, 3.0))
def test_lambda_prime_positive_for_nonnegative_bumps(spec, center, width, height):
    grid = spec.grid
    rho = Perturbation.from_core(grid, {0: PolynomialBump(center, width, height, 6)(grid.core)})
    assert lambda_prime(spec, rho) > 0


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
def test_lambda_prime_linear(spec, a, b, seed):
    grid = spec.grid
    g = np.random.default_rng(seed)
    x = Perturbation.from_core(grid, {0: g.standard_normal(grid.i1 + 1)})
    y = Perturbation.from_core(grid, {0: g.standard_normal(grid.i1 + 1)})
    lhs = lambda_prime(spec, a * x + b * y)
    rhs = a * lambda_prime(spec, x) + b * lambda_prime(spec, y)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_lambda_prime_sign_agrees_with_bruteforce(spec):
    grid = spec.grid
    bump = PolynomialBump(1.5, 0.5, 1.0, 6)
    lp = lambda_prime(spec, Perturbation.from_core(grid, {0: bump(grid.core)}))
    lam = perturbed_eigenvalue(spec, bump, 1e-3)
    base = perturbed_eigenvalue(spec, bump, 0.0)
    assert np.sign(lam - base) == np.sign(lp)
    assert (lam - base) / 1e-3 == pytest.approx(lp, rel=1e-2)


def test_gprime_of_zero(report, grid):
    g = gprime(report, Perturbation.from_core(grid, {2: np.zeros(grid.i1 + 1)}, 2))
    assert g.l2_1 == 0.0


@pytest.mark.parametrize("k", (1, 3, 6))
def test_gprime_self_pairing_is_minus_mass(k, report, grid):
    g = gprime(report, Perturbation.from_core(grid, {k: report.eta_k(k)}, k))
    assert g.values[k] == pytest.approx(-report.masses[k], rel=1e-14)
    assert all(v == 0.0 for j, v in g.values.items() if j != k)


@pytest.mark.parametrize("k", (1, 2, 5))
def test_gprime_matches_variational_oracle(k, report, grid):
    g = gprime(report, Perturbation.from_core(grid, {k: ORACLE_BUMP(grid.core)}, k)).values[k]
    oracle = gprime_oracle(report, k, ORACLE_BUMP)
    assert g == pytest.approx(oracle, rel=1e-2)


def test_gprime_rejects_modes_beyond_kmax(report, grid):
    rho = Perturbation.from_core(grid, {report.kmax + 1: np.ones(grid.i1 + 1)})
    with pytest.raises(ConstructionError):
        gprime(report, rho)


def test_decompose_on_kernel_and_span(report, grid, rng):
    eta = report.eta_k(3)
    kern, span = decompose(report, Perturbation.from_core(grid, {3: eta}, 3))
    assert np.max(np.abs(kern.core_samples(3))) <= 1e-12 * np.max(np.abs(eta))
    other = rng.standard_normal(grid.i1 + 1)
    other -= grid.integrate_core(other * eta) / grid.integrate_core(eta * eta) * eta
    kern, span = decompose(report, Perturbation.from_core(grid, {3: other}, 3))
    assert np.max(np.abs(span.core_samples(3))) <= 1e-10 * np.max(np.abs(eta))


def test_decompose_recombines_and_kernel_is_invisible(report, grid, rng):
    rho = Perturbation.from_core(grid, {k: rng.standard_normal(grid.i1 + 1) for k in (-2, 0, 4)}, 6)
    kern, span = decompose(report, rho)
    total = kern + span
    for k in (-2, 0, 4):
        assert np.allclose(total.core_samples(k), rho.core_samples(k), atol=1e-13)
    assert gprime(report, kern).l2_1 <= 1e-10 * r_norm(rho)


def test_masses_and_fits_positive(report):
    assert all(m > 0 for m in report.masses.values())
    fits = {**fit_mass_bounds(report), **fit_homeomorphism(report, 20, 0)}
    assert 0 < fits["c"] <= fits["C"]
    assert 0 < fits["c_prime"] <= fits["C_prime"]


def test_bruteforce_reproduces_lambda0(spec):
    table = bruteforce_radial_check(spec, PolynomialBump(1.5, 0.5, 1.0, 6), eps_list=(0.0, 1e-3, 5e-4))
    assert table.rows[0].lam == pytest.approx(spec.lambda0, abs=1e-9)
    assert table.slope_richardson == pytest.approx(table.lambda_prime, rel=1e-4)
