"""Bijective optimal transport maps by hierarchical refinement.

Both point clouds are split recursively into paired, equal-size blocks with
balanced low-rank OT solves, down to blocks small enough to match exactly.
Time is log-linear and memory linear in the number of points.
"""

from ._backend import COMPILED
from .baselines import MiniBatchPlan, PairPlan, minibatch_ot, plan_cost_streaming
from .core import (
    CostOracle,
    Dataset,
    DenseCost,
    FactoredCost,
    KernelCost,
    factor_metric_sampled,
    factor_sqeuclidean,
    restrict_cost,
)
from .datagen import SyntheticSpec, Transform, generate
from .entropic import (
    DualPotentials,
    EntropicPlan,
    EntropicProblem,
    densify_plan,
    entropic_cost,
    plan_stats,
    round_plan,
    sinkhorn,
)
from .errors import HirefError, Infeasible, NumericalError, ValidationError
from .exact import Assignment, brute_force_lrot, hungarian
from .io import read_points, write_points
from .lrot import CouplingFactors, HardAssignment, LrotParams, harden, solve_lrot
from .refine import (
    Bijection,
    CoClustering,
    RefineParams,
    RefineReport,
    cocluster_diameter_sample,
    hierarchical_refine,
    scale_cost,
)
from .schedule import RankSchedule, ScheduleQuery, optimal_schedule, validate_schedule

__version__ = "0.1.0"

__all__ = [
    "COMPILED", "Assignment", "Bijection", "CoClustering", "CostOracle", "CouplingFactors",
    "Dataset", "DenseCost", "DualPotentials", "EntropicPlan", "EntropicProblem",
    "FactoredCost", "HardAssignment", "HirefError", "Infeasible", "KernelCost", "LrotParams",
    "MiniBatchPlan", "NumericalError", "PairPlan", "RankSchedule", "RefineParams",
    "RefineReport", "ScheduleQuery", "SyntheticSpec", "Transform", "ValidationError",
    "brute_force_lrot", "cocluster_diameter_sample", "densify_plan", "entropic_cost",
    "factor_metric_sampled", "factor_sqeuclidean", "generate", "harden", "hierarchical_refine",
    "hungarian", "minibatch_ot", "optimal_schedule", "plan_cost_streaming", "plan_stats",
    "read_points", "restrict_cost", "round_plan", "scale_cost", "sinkhorn", "solve_lrot",
    "validate_schedule", "write_points",
]
