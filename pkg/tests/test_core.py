import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trajdist.core import (
    ContractError, DimensionError, NumericError, SolverError, TimeGrid, Trajectory, build_batch_matrices,
    is_positive_definite, symmetric_solve,
)


def test_time_grid():
    g = TimeGrid(4, 0.5)
    assert g.T == 4
    np.testing.assert_array_equal(g.times(), [0, 0.5, 1.0, 1.5, 2.0])
    with pytest.raises(ContractError):
        TimeGrid(0, 0.1)
    with pytest.raises(ContractError):
        TimeGrid(3, 0.0)


def test_trajectory_shapes_and_immutability():
    tr = Trajectory(np.zeros((4, 2)), np.ones((3, 1)))
    assert (tr.T, tr.nx, tr.nu) == (3, 2, 1)
    assert tr.stacked_states().shape == (8,)
    with pytest.raises(ValueError):
        tr.states[0, 0] = 1.0
    with pytest.raises(DimensionError):
        Trajectory(np.zeros((3, 2)), np.zeros((3, 1)))


@given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 8), st.integers(0, 2**31 - 1))
def test_batch_matrices_match_recursive_rollout(nx, nu, T, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((T, nx, nx))
    B = rng.standard_normal((T, nx, nu))
    x0 = rng.standard_normal(nx)
    u = rng.standard_normal((T, nu))
    xs = [x0]
    for t in range(T):
        xs.append(A[t] @ xs[-1] + B[t] @ u[t])
    S = build_batch_matrices(A, B)
    np.testing.assert_allclose(S.predict(x0, u), np.concatenate(xs), rtol=1e-10, atol=1e-10)
    assert S.T == T


def test_batch_matrices_block_structure():
    # Scalar system a=2, b=1, T=2: x1 = 2 x0 + u0, x2 = 4 x0 + 2 u0 + u1.
    S = build_batch_matrices(np.full((2, 1, 1), 2.0), np.ones((2, 1, 1)))
    np.testing.assert_array_equal(S.Sx.ravel(), [1, 2, 4])
    np.testing.assert_array_equal(S.Su, [[0, 0], [1, 0], [2, 1]])


def test_symmetric_solve_exact_and_jittered():
    M = np.array([[4.0, 1.0], [1.0, 3.0]])
    rhs = np.array([1.0, 2.0])
    np.testing.assert_allclose(symmetric_solve(M, rhs), np.linalg.solve(M, rhs), rtol=1e-12)
    singular = np.array([[1.0, 1.0], [1.0, 1.0]])
    x = symmetric_solve(singular, np.array([1.0, 1.0]))
    assert np.all(np.isfinite(x))
    with pytest.raises(ContractError):
        symmetric_solve(np.array([[1.0, 2.0], [0.0, 1.0]]), rhs)
    with pytest.raises(SolverError):
        symmetric_solve(-np.eye(2), rhs)
    with pytest.raises(NumericError):
        symmetric_solve(np.eye(2), np.array([np.nan, 1.0]))


def test_is_positive_definite():
    assert is_positive_definite(np.eye(3))
    assert not is_positive_definite(np.diag([1.0, 0.0, -1.0]))
