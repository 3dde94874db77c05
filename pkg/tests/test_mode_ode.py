import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from bilapeig.errors import DomainError
from bilapeig.mode_ode import (ModeFrame, ModeState, ModeSystem, J, core_series_init,
                               duality_drift, far_decaying_state, far_full_basis, integrate_core,
                               integrate_frame, log_scaling, regular_frame)
from bilapeig.model import Potential


def true_columns(traj):
    return traj.frames * np.exp(traj.ledger)[:, None, None]


def test_k2_regular_frame_is_r2_and_r4(potential):
    system = ModeSystem(2, 1.0, potential)
    traj = regular_frame(system, 1.0, r_start=0.05, sample=False)
    a, b = traj.frames[-1].T
    exact_a = np.array([1.0, 2.0, 0.0, 0.0])
    exact_b = np.array([1.0, 4.0, 12.0, 24.0])
    for col, ex in ((a, exact_a), (b, exact_b)):
        assert np.allclose(col / col[0], ex, rtol=1e-10, atol=1e-10)


def test_k0_basis_a_is_constant(potential):
    system = ModeSystem(0, 1.0, potential)
    traj = regular_frame(system, 1.0, r_start=0.05)
    a = traj.frames[:, :, 0] / traj.frames[:, :1, 0]
    assert np.allclose(a, [1.0, 0.0, 0.0, 0.0], atol=1e-10)


def test_series_start_normalisation(potential):
    frame = core_series_init(ModeSystem(5, 1.0, potential), 0.2)
    assert np.allclose(np.linalg.norm(frame.columns, axis=0), 1.0, rtol=0, atol=1e-15)
    assert frame.log_scale == pytest.approx(5 * np.log(0.2), rel=1e-15)


def test_series_start_outside_flat_region(potential):
    with pytest.raises(DomainError):
        core_series_init(ModeSystem(1, 1.0, potential), 1.5)


def test_i0_propagates_when_theta_vanishes(grid):
    pot = Potential.constant(grid, 0.0)
    system = ModeSystem(0, 1.0, pot)
    r0 = 0.5
    start = np.array([special.i0(r0), special.i1(r0), special.i0(r0), special.i1(r0)])
    frame = ModeFrame(0, r0, start[:, None], "test", "phys")
    nodes = grid.nodes[(grid.nodes > r0)][::50]
    traj = integrate_frame(system, frame, nodes)
    vals = traj.frames[:, :, 0] * np.exp(traj.ledger)[:, None]
    phys = np.where((traj.coordinates == "log")[:, None], vals / log_scaling(nodes).T, vals)
    exact = np.stack([special.i0(nodes), special.i1(nodes), special.i0(nodes), special.i1(nodes)], axis=1)
    assert np.max(np.abs(phys / exact - 1)) <= 1e-9


def test_basis_a_reproduces_k0_tail(potential, grid):
    system = ModeSystem(0, 1.0, potential)
    start = core_series_init(system, 0.05)
    a_only = ModeFrame(0, 0.05, start.columns[:, :1], "test", "log")
    nodes = grid.nodes[(grid.nodes > 0.05) & (grid.nodes <= 3.0)]
    traj = integrate_frame(system, a_only, nodes)
    sel = nodes >= 2.0
    u = true_columns(traj)[sel, 0, 0]
    ratio = u / special.k0(nodes[sel])
    assert np.ptp(ratio) / abs(np.mean(ratio)) <= 1e-8


def test_zero_frame_stays_zero(potential):
    system = ModeSystem(3, 1.0, potential)
    frame = ModeFrame(3, 0.5, np.zeros((4, 1)), "test", "log")
    traj = integrate_core(system, frame, 0.5, 2.0)
    assert np.all(true_columns(traj) == 0.0)


def test_trajectory_local_defect(potential):
    for k in (0, 5, 40):
        traj = regular_frame(ModeSystem(k, 1.0, potential))
        assert traj.local_defect(stride=50) <= 1e-8


def test_integrate_core_rejects_out_of_range(potential):
    system = ModeSystem(1, 1.0, potential)
    frame = core_series_init(system, 0.5)
    with pytest.raises(Exception):
        integrate_core(system, frame, 0.5, 100.0)


def test_far_decaying_state_k0():
    st_ = far_decaying_state(0, 1.0, 2.0).components
    k0, k1 = special.k0(2.0), special.k1(2.0)
    assert np.allclose(st_, [k0, -k1, k0, -k1], rtol=1e-14, atol=0)


def test_far_decaying_state_scaling():
    st_ = far_decaying_state(1, 16.0, 3.0).components
    assert st_[0] == pytest.approx(special.k1(6.0), rel=1e-14)
    assert st_[2] == pytest.approx(4 * special.k1(6.0), rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 60), st.floats(0.1, 5.0), st.floats(2.5, 14.0))
def test_far_decaying_sign_pattern(k, lam, r):
    comps = far_decaying_state(k, lam, r).components
    assert comps[0] > 0 and comps[1] < 0 and comps[2] > 0 and comps[3] < 0


def test_far_decaying_residual():
    lam, k, r = 1.7, 3, 4.0
    h = 1e-5
    sys_ = ModeSystem(k, lam, Potential.constant(__import__("bilapeig").model.RadialGrid.uniform(), 0.0, 0.0))
    a = sys_.matrix_phys(r)
    d = (far_decaying_state(k, lam, r + h).components - far_decaying_state(k, lam, r - h).components) / (2 * h)
    state = far_decaying_state(k, lam, r).components
    assert np.max(np.abs(d - a @ state)) <= 1e-8 * np.max(np.abs(state))


def test_far_lambda_must_be_positive():
    with pytest.raises(DomainError):
        far_decaying_state(0, 0.0, 3.0)


def test_full_basis_independent_and_signs():
    basis = far_full_basis(0, 1.0, 2.5).columns
    assert abs(np.linalg.det(basis)) > 1e-6
    jcol = far_full_basis(2, 2.0, 3.0).columns[:, 2]
    assert jcol[2] == -np.sqrt(2.0) * jcol[0]
    r1, r, mu = 2.5, 6.0, 1.0
    ratio = np.linalg.norm(far_full_basis(1, 1.0, r).columns[:, 0]) / np.linalg.norm(far_full_basis(1, 1.0, r).columns[:, 1])
    assert ratio >= np.exp(2 * mu * (r - r1)) / 2


def test_log_matrix_is_hamiltonian(potential):
    for k in (0, 3, 17):
        a = ModeSystem(k, 1.3, potential).matrix_log(np.log(1.7))
        assert np.allclose(J @ a + a.T @ J, 0.0, atol=1e-13)


def test_state_norms():
    s = ModeState(2, 1.5, np.array([1.0, -2.0, 0.5, 3.0]))
    assert s.norm_Xk() == pytest.approx(np.sqrt(25 + 5 * 4 + 5 * 0.25 + 9))
    w = 1 + 4 / 1.5**2
    assert s.norm_curlyX() == pytest.approx(np.sqrt(w * 1.25 + 4 + 9))
    assert np.allclose(s.to("log").to("phys").components, s.components)


def test_duality_constancy_random_pairs(potential, rng):
    drift = duality_drift(ModeSystem(7, 1.0, potential), rng, 4)
    assert np.max(drift) <= 1e-9


def test_trajectory_csv(tmp_path, potential):
    traj = regular_frame(ModeSystem(1, 1.0, potential), 1.0)
    traj.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "r,coordinate,u1_0,u2_0,u3_0,u4_0,u1_1,u2_1,u3_1,u4_1,ledger"
    assert len(lines) == traj.radii.size + 1


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 12), st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 2**31))
def test_integration_is_linear(k, alpha, beta, seed):
    from bilapeig.model import default_potential
    pot = _POT.setdefault("p", default_potential())
    system = ModeSystem(k, 1.0, pot)
    g = np.random.default_rng(seed)
    u, v = g.standard_normal(4), g.standard_normal(4)

    def run(x):
        traj = integrate_core(system, ModeFrame(k, 0.5, x[:, None], "t", "log"), 0.5, 2.5, nodes=[])
        return traj.frames[-1, :, 0] * np.exp(traj.ledger[-1])

    lhs = run(alpha * u + beta * v)
    rhs = alpha * run(u) + beta * run(v)
    scale = abs(alpha) * np.linalg.norm(run(u)) + abs(beta) * np.linalg.norm(run(v)) + 1e-300
    assert np.linalg.norm(lhs - rhs) <= 1e-9 * scale


_POT = {}


def test_defect_reproducible(potential):
    from bilapeig.spectral import match_defect
    a = match_defect(4, 1.0, potential).sigma_min
    b = match_defect(4, 1.0, potential).sigma_min
    assert a == b
