import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trajdist.core import DistributionError, NumericError
from trajdist.costs import GoalCostSpec, Obstacle
from trajdist.ilqr import ILQRSettings, extract_distribution, ilqr_solve, sample_trajectories
from trajdist.lqr import LQRProblem, solve_batch
from trajdist.systems import hover_thrust, linear, make_model, pendulum

TIGHT = ILQRSettings(max_iterations=500, cost_tol_rel=1e-300, grad_tol=1e-9)


def _linear_case(seed):
    rng = np.random.default_rng(seed)
    nx, nu, T = 3, 2, 12
    A = np.eye(nx) + 0.1 * rng.standard_normal((nx, nx))
    B = rng.standard_normal((nx, nu))
    m = linear(A, B)
    g = rng.standard_normal(nx)
    spec = GoalCostSpec(x_goal=g, Q=0.01 * np.eye(nx), R=0.5 * np.eye(nu), Q_T=10 * np.eye(nx))
    x0 = rng.standard_normal(nx)
    # Same problem in LQR form: 1/2 x'Qx - (Qg)'x per step, constants dropped.
    Qb = np.array([spec.Q] * T + [spec.Q_T])
    prob = LQRProblem(np.repeat(A[None], T, 0), np.repeat(B[None], T, 0), Qb, np.repeat(spec.R[None], T, 0), x0,
                      q=-np.einsum("tij,j->ti", Qb, g))
    return m, spec, x0, T, prob


@given(st.integers(0, 2**31 - 1))
def test_linear_quadratic_problem_solved_in_one_full_step(seed):
    m, spec, x0, T, prob = _linear_case(seed)
    sol = ilqr_solve(m, spec, x0, T=T, settings=TIGHT)
    assert sol.converged
    assert sol.trace[0].alpha == 1.0
    ctrl = solve_batch(prob)
    np.testing.assert_allclose(sol.trajectory.controls.reshape(-1), ctrl.mu_u, atol=1e-8)
    dist = extract_distribution(sol, m, spec)
    np.testing.assert_allclose(dist.cov_u, ctrl.Sigma_u, atol=1e-10)
    np.testing.assert_allclose(dist.cov_x[: m.nx], 0.0)


def test_pendulum_swing_up_descends_and_converges():
    m = pendulum()
    spec = GoalCostSpec(x_goal=[np.pi, 0.0], Q=0.01 * np.eye(2), R=0.1 * np.eye(1), Q_T=100 * np.eye(2))
    sol = ilqr_solve(m, spec, [0.0, 0.0], T=100,
                     settings=ILQRSettings(max_iterations=2000, cost_tol_rel=1e-300, grad_tol=1e-7))
    hist = np.array(sol.cost_history)
    assert np.all(np.diff(hist) < 0)
    assert sol.converged and sol.final_du_inf < 1e-6
    assert abs(sol.trajectory.states[-1, 0] - np.pi) < 0.05
    # The feedback law reproduces the nominal plan on the nominal states.
    for t in (0, 50, 99):
        np.testing.assert_allclose(sol.control(t, sol.trajectory.states[t]), sol.trajectory.controls[t], atol=1e-10)


def test_distribution_shapes_and_psd():
    m = make_model("quadcopter")
    goal = np.r_[1.0, 1.0, 0.5, np.zeros(9)]
    spec = GoalCostSpec(x_goal=goal, Q=1e-3 * np.eye(12), R=0.1 * np.eye(4), Q_T=100 * np.eye(12),
                        obstacles=(Obstacle(center=[0.5, 0.5, 0.25], radius=0.3, weight=100.0),),
                        u_ref=hover_thrust(m))
    sol = ilqr_solve(m, spec, np.zeros(12), T=40, settings=ILQRSettings(max_iterations=300, cost_tol_rel=1e-12))
    d = extract_distribution(sol, m, spec)
    assert d.T == 40
    assert d.cov_x.shape == (41 * 12, 41 * 12) and d.cov_u.shape == (160, 160)
    assert np.linalg.eigvalsh(d.cov_u).min() > 0
    assert np.linalg.eigvalsh(d.cov_x).min() > -1e-9 * np.abs(d.cov_x).max()
    assert d.state_std().shape == (41, 12)


def test_errors_and_warnings():
    m = make_model("point_mass")
    spec = GoalCostSpec(x_goal=np.ones(4), Q=0.01 * np.eye(4), R=np.eye(2), Q_T=np.eye(4))
    with pytest.raises(NumericError, match="iteration 0"):
        ilqr_solve(m, spec, np.zeros(4), u_init=np.full((5, 2), 1e200))
    sol = ilqr_solve(m, spec, np.zeros(4), T=30, settings=ILQRSettings(max_iterations=1, grad_tol=1e-300))
    assert not sol.converged
    with pytest.warns(UserWarning, match="non-converged"):
        extract_distribution(sol, m, spec)
    unstable = linear(2.0 * np.eye(2), np.eye(2))
    spec2 = GoalCostSpec(x_goal=np.zeros(2), Q=0.01 * np.eye(2), R=np.eye(2), Q_T=np.eye(2))
    sol2 = ilqr_solve(unstable, spec2, np.ones(2), T=40)
    with pytest.raises(DistributionError, match="unstable"):
        extract_distribution(sol2, unstable, spec2)


@pytest.mark.parametrize("kw", [dict(max_iterations=0), dict(cost_tol_rel=0.0), dict(line_search_alphas=(0.5,)),
                                dict(reg_init=1e9), dict(reg_scale=1.0)])
def test_settings_validation(kw):
    with pytest.raises(ValueError):
        ILQRSettings(**kw)


def test_sampled_trajectories_match_distribution():
    m, spec, x0, T, prob = _linear_case(3)
    sol = ilqr_solve(m, spec, x0, T=T, settings=TIGHT)
    d = extract_distribution(sol, m, spec)
    xs, us = sample_trajectories(d, 20_000, 0)
    np.testing.assert_array_equal(xs[:, 0], np.broadcast_to(x0, (20_000, m.nx)))
    # Each sample obeys the (linear) dynamics exactly.
    np.testing.assert_allclose(xs[:, 1], xs[:, 0] @ m.linearize(x0, us[0, 0]).A.T
                               + us[:, 0] @ m.linearize(x0, us[0, 0]).B.T, atol=1e-10)
    emp = np.cov(xs[:, -1].T)
    np.testing.assert_allclose(emp, d.state_marginal(T)[1], rtol=0.1, atol=0.05 * np.abs(emp).max())
