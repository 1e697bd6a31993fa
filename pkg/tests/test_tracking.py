import numpy as np
import pytest

from trajdist.core import ContractError, DimensionError
from trajdist.harness.config import load_preset
from trajdist.tracking import (
    ControllerKind, Plan, Tracker, conditional_controls, run_closed_loop, tracking_cost,
)


@pytest.fixture(scope="module")
def plan():
    cfg = load_preset("bicopter").with_overrides(horizons={"T": 60, "T_s": 15})
    return cfg.build_plan()


@pytest.mark.parametrize("kind", list(ControllerKind))
def test_undisturbed_run_follows_the_plan(plan, kind):
    res = run_closed_loop(plan, kind)
    assert not res.diverged
    assert res.cost == pytest.approx(plan.cost_value, rel=1e-4)
    np.testing.assert_allclose(res.states, plan.x_star, atol=1e-3)


def test_feedback_controller_is_exact_on_nominal(plan):
    res = run_closed_loop(plan, ControllerKind.ILQR_FEED)
    np.testing.assert_allclose(res.controls, plan.u_star, atol=1e-10)


def test_conditional_control_mean_equals_feedback_law(plan, rng):
    # Conditioning the joint (u, x) Gaussian on x_tau reproduces u* + K (x - x*).
    for tau in (5, 20, 40):
        x = plan.x_star[tau] + 0.05 * rng.standard_normal(plan.model.nx)
        u_c = conditional_controls(plan, tau, x, tau + 1)[0]
        np.testing.assert_allclose(u_c, plan.solution.control(tau, x), rtol=1e-6, atol=1e-8)


def test_tracking_cost_weights(plan):
    tr = Tracker(plan, "mpc_mean")
    spec = tracking_cost(tr, plan.x_star[0])
    assert spec.N == plan.short_horizon
    np.testing.assert_array_equal(spec.Q_t[0], 0.0)
    np.testing.assert_array_equal(spec.Q_t[1], plan.cost.Q_T)
    tr = Tracker(plan, "mpc_marg")
    tr.tau = plan.T - 3
    spec = tracking_cost(tr, plan.x_star[tr.tau])
    assert spec.N == 3
    np.testing.assert_array_equal(spec.Q_t[-1], plan.cost.Q_T)
    np.testing.assert_array_equal(spec.Q_t[1], plan.marginal_weights[plan.T - 2])
    cap = plan.precision_cap
    assert np.all(np.linalg.eigvalsh(plan.marginal_weights[1:-1]) <= cap * (1 + 1e-9))


def test_window_terminal_option(plan):
    import dataclasses

    tau = 10

    def last_weights(p):
        tr = Tracker(p, "mpc_marg")
        tr.tau = tau
        return tracking_cost(tr, plan.x_star[tau]).Q_t

    Qs = last_weights(plan)
    np.testing.assert_array_equal(Qs[-1], plan.marginal_weights[tau + plan.short_horizon])
    Qs = last_weights(dataclasses.replace(plan, window_terminal="goal"))
    np.testing.assert_array_equal(Qs[-1], plan.cost.Q_T)
    np.testing.assert_array_equal(Qs[-2], plan.marginal_weights[tau + plan.short_horizon - 1])
    with pytest.raises(ContractError):
        dataclasses.replace(plan, window_terminal="terminal")


def test_divergence_is_reported(plan):
    d = np.zeros((plan.T, plan.model.nx))
    d[10, 3:] = 5e3
    res = run_closed_loop(plan, "mpc_mean", disturbance=d)
    assert res.diverged and res.cost == np.inf and res.trajectory is None
    assert res.plant_steps == 11


def test_telemetry_and_validation(plan):
    res = run_closed_loop(plan, "mpc_cond", record=True)
    assert len(res.telemetry) == plan.T
    assert all(r.q_min_eig > 0 for r in res.telemetry)
    with pytest.raises(DimensionError):
        run_closed_loop(plan, "mpc_mean", disturbance=np.zeros((3, 3)))
    with pytest.raises(ContractError):
        ControllerKind.parse("pid")
    with pytest.raises(ContractError):
        Plan(plan.model, plan.cost, plan.solution, plan.distribution, short_horizon=plan.T + 1)
