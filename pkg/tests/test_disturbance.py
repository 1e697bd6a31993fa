import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trajdist.core import ContractError
from trajdist.harness.disturbance import (
    DEFAULT_MAGNITUDES, DisturbanceKind, DisturbanceSpec, Level, default_magnitude, make_disturbance,
)

VEL = (6, 7, 8, 9, 10, 11)


@given(st.integers(0, 2**31 - 1), st.floats(0.05, 5.0))
def test_impulse_structure(seed, mag):
    spec = DisturbanceSpec("impulse", "large", mag)
    d = make_disturbance(spec, 12, 150, VEL, seed)
    active = np.flatnonzero(np.any(d != 0, axis=1))
    assert len(active) == 2 and active[1] == active[0] + 1
    assert 10 <= active[0] <= 130
    np.testing.assert_allclose(np.linalg.norm(d[active][:, list(VEL)], axis=1), mag, rtol=1e-12)
    np.testing.assert_array_equal(d[active[0]], d[active[1]])
    np.testing.assert_array_equal(d[:, :6], 0.0)


def test_quadcopter_large_impulse_norm():
    spec = DisturbanceSpec("impulse", "large", default_magnitude("quadcopter", DisturbanceKind.IMPULSE, Level.LARGE))
    d = make_disturbance(spec, 12, 150, VEL, 0)
    norms = np.linalg.norm(d, axis=1)
    np.testing.assert_allclose(norms[norms > 0], 1.5, rtol=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_time_varying_window_and_magnitude(seed):
    spec = DisturbanceSpec("time_varying", "medium", 0.2)
    d = make_disturbance(spec, 12, 150, VEL, seed)
    np.testing.assert_array_equal(d[:30], 0.0)
    np.testing.assert_array_equal(d[101:], 0.0)
    np.testing.assert_allclose(np.linalg.norm(d[30:101], axis=1), 0.2, rtol=1e-12)


def test_determinism_and_seed_sensitivity():
    spec = DisturbanceSpec("time_varying", "small", 0.1)
    a = make_disturbance(spec, 12, 150, VEL, 5)
    np.testing.assert_array_equal(a, make_disturbance(spec, 12, 150, VEL, 5))
    assert not np.array_equal(a, make_disturbance(spec, 12, 150, VEL, 6))


def test_explicit_window_and_validation():
    d = make_disturbance(DisturbanceSpec("impulse", "small", 1.0, window=(40, 41)), 4, 60, (2, 3), 0)
    assert set(np.flatnonzero(np.any(d != 0, axis=1))) == {40, 41}
    with pytest.raises(ContractError):
        DisturbanceSpec("impulse", "small", 1.0, window=(40, 42))
    with pytest.raises(ContractError):
        DisturbanceSpec("impulse", "small", 0.0)
    with pytest.raises(ContractError):
        DisturbanceSpec("time_varying", "small", 1.0, window=(5, 2))
    with pytest.raises(ContractError):
        make_disturbance(DisturbanceSpec("time_varying", "small", 1.0), 4, 60, (2, 3), 0)
    with pytest.raises(ContractError):
        Level.parse("huge")
    with pytest.raises(ContractError):
        default_magnitude("unicycle", DisturbanceKind.IMPULSE, Level.SMALL)


def test_default_magnitude_table():
    assert DEFAULT_MAGNITUDES[("manipulator", DisturbanceKind.IMPULSE)] == (0.5, 1.5, 3.0)
    assert DEFAULT_MAGNITUDES[("quadcopter", DisturbanceKind.IMPULSE)] == (0.2, 0.7, 1.5)
    assert DEFAULT_MAGNITUDES[("manipulator", DisturbanceKind.TIME_VARYING)] == (0.1, 0.3, 0.6)
    assert DEFAULT_MAGNITUDES[("quadcopter", DisturbanceKind.TIME_VARYING)] == (0.07, 0.2, 0.4)
