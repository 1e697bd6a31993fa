import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trajdist.core import ContractError, DimensionError, Trajectory
from trajdist.costs import (
    GoalCostSpec, Obstacle, TrackingCostSpec, eval_cost, eval_goal_cost, eval_obstacle_cost, quadratize,
    stage_values,
)
from trajdist.systems import hover_thrust, make_model, manipulator
from conftest import central_diff


def _spec(**kw):
    base = dict(x_goal=[1.0, 0.0], Q=0.01 * np.eye(2), R=np.eye(1), Q_T=10 * np.eye(2))
    base.update(kw)
    return GoalCostSpec(**base)


def test_goal_cost_by_hand():
    # T=1: 1/2 [(x0-g)'Q(x0-g) + u0'R u0] + 1/2 (x1-g)'Q_T(x1-g)
    spec = _spec()
    traj = Trajectory([[0.0, 0.0], [1.0, 1.0]], [[2.0]])
    assert eval_goal_cost(spec, traj) == pytest.approx(0.5 * (0.01 + 4.0) + 0.5 * 10.0, rel=1e-14)
    vals = stage_values(spec, traj)
    assert vals.sum() == pytest.approx(eval_goal_cost(spec, traj), rel=1e-14)


def test_obstacle_potential_by_hand():
    ob = Obstacle(center=[0.0, 0.0], radius=1.0, weight=4.0)
    assert eval_obstacle_cost([ob], [0.25, 0.0]) == pytest.approx(4.0 * 0.75**2)
    assert eval_obstacle_cost([ob], [1.5, 0.0]) == 0.0
    spec = _spec(x_goal=[0.0, 0.0], Q=np.zeros((2, 2)), Q_T=np.zeros((2, 2)), obstacles=(ob,))
    traj = Trajectory([[0.25, 0.0], [0.25, 0.0]], [[0.0]])
    # The obstacle is active on running steps only, with the 1/2 convention.
    assert eval_goal_cost(spec, traj) == pytest.approx(0.5 * 4.0 * 0.75**2)


def test_u_ref_shifts_control_penalty():
    spec = _spec(u_ref=[3.0])
    traj = Trajectory([[1.0, 0.0], [1.0, 0.0]], [[3.0]])
    assert eval_goal_cost(spec, traj) == pytest.approx(0.0, abs=1e-15)


@given(st.integers(0, 2**31 - 1), st.sampled_from(["quadcopter", "manipulator", "bicopter"]))
def test_gradients_match_finite_differences(seed, name):
    rng = np.random.default_rng(seed)
    m = make_model(name) if name != "manipulator" else manipulator(3)
    d = m.workspace_dim
    ob = Obstacle(center=0.1 * rng.standard_normal(d), radius=2.0, weight=30.0)
    u_ref = hover_thrust(m) if name != "manipulator" else np.zeros(m.nu)
    spec = GoalCostSpec(
        x_goal=rng.standard_normal(m.nx), Q=0.01 * np.eye(m.nx), R=0.1 * np.eye(m.nu), Q_T=np.eye(m.nx),
        obstacles=(ob,), u_ref=u_ref, task_target=np.ones(d), task_weight=0.5,
    )
    x = 0.3 * rng.standard_normal(m.nx)
    u = u_ref + 0.3 * rng.standard_normal(m.nu)
    der = quadratize(spec, x, u, 2, T=5, model=m)
    gx = central_diff(lambda z: quadratize(spec, z, u, 2, T=5, model=m).value, x)
    gu = central_diff(lambda z: quadratize(spec, x, z, 2, T=5, model=m).value, u)
    np.testing.assert_allclose(der.cx, gx, atol=1e-6)
    np.testing.assert_allclose(der.cu, gu, atol=1e-6)
    np.testing.assert_allclose(der.cuu, spec.R, atol=1e-14)
    # The exact Hessian differentiates the analytic gradient.
    exact = quadratize(spec, x, u, 2, T=5, model=m, hessian="exact").cxx
    Hfd = central_diff(lambda z: quadratize(spec, z, u, 2, T=5, model=m).cx, x)
    np.testing.assert_allclose(exact, 0.5 * (Hfd + Hfd.T), atol=1e-5)


@given(st.integers(0, 2**31 - 1))
def test_gauss_newton_hessian_is_psd(seed):
    rng = np.random.default_rng(seed)
    m = make_model("quadcopter")
    spec = GoalCostSpec(
        x_goal=np.zeros(12), Q=0.01 * np.eye(12), R=0.1 * np.eye(4), Q_T=np.eye(12),
        obstacles=(Obstacle(center=[0.0, 0.0, 0.0], radius=1.0, weight=100.0),),
    )
    der = quadratize(spec, 0.3 * rng.standard_normal(12), np.zeros(4), 0, T=3, model=m)
    assert np.linalg.eigvalsh(der.cxx).min() >= -1e-10


def test_tracking_cost_by_hand():
    spec = TrackingCostSpec(refs=[[0.0], [1.0]], Q_t=[[[2.0]], [[4.0]]], R=[[1.0]], u_refs=[[1.0]])
    traj = Trajectory([[1.0], [0.0]], [[0.0]])
    # 1/2 [2*1 + 4*1 + 1*1]
    assert eval_cost(spec, traj) == pytest.approx(3.5)
    assert spec.N == 1


def test_validation_errors():
    with pytest.raises(ContractError):
        Obstacle(center=[0, 0], radius=0.0)
    with pytest.raises(DimensionError):
        _spec(Q=np.eye(3))
    with pytest.raises(ContractError):
        _spec(R=np.zeros((1, 1)))
    with pytest.raises(ContractError):
        quadratize(_spec(), [0, 0], [0], 0)
    with pytest.raises(TypeError):
        eval_goal_cost(TrackingCostSpec(refs=[[0.0], [1.0]], Q_t=np.ones((2, 1, 1)), R=[[1.0]]),
                       Trajectory([[1.0], [0.0]], [[0.0]]))
    with pytest.warns(UserWarning):
        _spec(Q=5 * np.eye(2))
