import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trajdist.core import ContractError, DimensionError, NumericError
from trajdist.systems import MODEL_NAMES, hover_thrust, linear, make_model, manipulator, pendulum, point_mass
from conftest import central_diff


@given(st.sampled_from(MODEL_NAMES), st.integers(0, 2**31 - 1))
def test_jacobians_match_finite_differences(name, seed):
    rng = np.random.default_rng(seed)
    m = make_model(name)
    x = 0.5 * rng.standard_normal(m.nx)
    u = 0.5 * rng.standard_normal(m.nu)
    J = m.linearize(x, u)
    np.testing.assert_allclose(J.A, central_diff(lambda z: m.step(z, u), x), atol=1e-7, rtol=1e-6)
    np.testing.assert_allclose(J.B, central_diff(lambda z: m.step(x, z), u), atol=1e-7, rtol=1e-6)


@given(st.sampled_from(MODEL_NAMES), st.integers(0, 2**31 - 1))
def test_workspace_jacobian_matches_finite_differences(name, seed):
    rng = np.random.default_rng(seed)
    m = make_model(name)
    x = 0.5 * rng.standard_normal(m.nx)
    np.testing.assert_allclose(m.workspace_jacobian(x), central_diff(m.workspace_point, x), atol=1e-7)


def test_point_mass_step_by_hand():
    m = point_mass(2, dt=0.1)
    np.testing.assert_allclose(m.step([1.0, 2.0, 3.0, 4.0], [10.0, -10.0]), [1.3, 2.4, 4.0, 3.0])


def test_pendulum_rest_and_inverted_equilibria():
    m = pendulum()
    np.testing.assert_allclose(m.step([0.0, 0.0], [0.0]), [0.0, 0.0])
    np.testing.assert_allclose(m.step([np.pi, 0.0], [0.0]), [np.pi, 0.0], atol=1e-15)


@pytest.mark.parametrize("name", ["quadcopter", "bicopter"])
def test_hover_thrust_is_an_equilibrium(name):
    m = make_model(name)
    x = np.zeros(m.nx)
    np.testing.assert_allclose(m.step(x, hover_thrust(m)), x, atol=1e-12)


def test_manipulator_forward_kinematics():
    m = manipulator(n_links=3, link_lengths=[1.0, 0.5, 0.25])
    x = np.zeros(6)
    np.testing.assert_allclose(m.workspace_point(x), [1.75, 0.0])
    x[0] = np.pi / 2
    np.testing.assert_allclose(m.workspace_point(x), [0.0, 1.75], atol=1e-15)
    assert m.velocity_indices == (3, 4, 5)


def test_rollout_matches_repeated_steps(rng):
    m = make_model("unicycle")
    us = rng.standard_normal((5, 2))
    tr = m.rollout(np.zeros(3), us)
    x = np.zeros(3)
    for u in us:
        x = m.step(x, u)
    np.testing.assert_allclose(tr.states[-1], x)


def test_linear_model_and_validation():
    m = linear(np.eye(2), np.ones((2, 1)))
    np.testing.assert_allclose(m.step([1.0, 2.0], [0.5]), [1.5, 2.5])
    with pytest.raises(DimensionError):
        m.step([1.0], [0.5])
    with pytest.raises(NumericError):
        m.step([np.nan, 0.0], [0.0])
    with pytest.raises(ContractError):
        make_model("blimp")
    with pytest.raises(ContractError):
        pendulum(mass=-1.0)
