"""Long-horizon iLQR planning, Gaussian trajectory distributions and MPC tracking."""

from .core import (
    ContractError, DimensionError, DistributionError, NumericError, SolverError, TimeGrid, Trajectory,
    TrajDistError,
)
from .costs import GoalCostSpec, Obstacle, TrackingCostSpec, eval_goal_cost
from .gaussian import GaussianDist, TrajDist, condition, marginal, product, sample
from .ilqr import ILQRDistribution, ILQRSettings, ILQRSolution, extract_distribution, ilqr_solve
from .lqr import LQRProblem, solve_batch, solve_riccati
from .systems import SystemModel, make_model
from .tracking import ControllerKind, Plan, make_plan, run_closed_loop

__version__ = "0.1.0"

__all__ = [
    "TrajDistError", "ContractError", "DimensionError", "DistributionError", "NumericError", "SolverError",
    "TimeGrid", "Trajectory", "GoalCostSpec", "Obstacle", "TrackingCostSpec", "eval_goal_cost",
    "GaussianDist", "TrajDist", "condition", "marginal", "product", "sample",
    "ILQRDistribution", "ILQRSettings", "ILQRSolution", "extract_distribution", "ilqr_solve",
    "LQRProblem", "solve_batch", "solve_riccati", "SystemModel", "make_model",
    "ControllerKind", "Plan", "make_plan", "run_closed_loop",
]
