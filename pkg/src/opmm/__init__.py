"""Online proximal method of multipliers for long-term constrained streams.

A per-round proximal step on a penalized quadratic model of the loss and
constraints, multiplier updates through the positive-part map, and full
instrumentation of the induced KKT residual regrets: averaged stationarity
vector, constraint violation and complementarity residual.  A projection
variant handles convex constraints through each round's concave dual.
"""

from .geometry import (
    Ball,
    Box,
    DiagMetric,
    FEAS_TOL,
    InfeasiblePoint,
    ScalarMetric,
    Simplex,
    UnsupportedMetricSetPair,
    normal_cone_violation,
    weighted_dist_sq,
    weighted_project,
)
from .inner import DescentInfo, InnerSolverParams, MaxItersExceeded, projected_descent
from .metrics import (
    DriftHypothesis,
    RegretLedger,
    RoundRecord,
    comp_residual,
    drift_check,
    fit_loglog_slope,
    objective_regret,
    offline_oracle,
    theory_bounds,
)
from .oracle import (
    ConcaveMinorant,
    ConstraintFamily,
    QuadModel,
    RoundOracle,
    ScalarTheta,
    StrategyAssumptionViolation,
    StructuralConstants,
    ZeroTheta,
    assumption_audit,
    build_models,
    constants,
)
from .solver import (
    AlgoParams,
    IterateState,
    OnlineProblem,
    RunResult,
    aug_lagrangian,
    opmm_run,
    recover_w,
    solve_subproblem,
    update_multipliers,
)
from .dual import (
    DualState,
    dual_objective,
    dual_state,
    duality_gap,
    recover_multiplier,
    recover_primal,
    solve_dual,
)

__version__ = "0.1.0"

__all__ = [
    "AlgoParams", "Ball", "Box", "ConcaveMinorant", "ConstraintFamily",
    "DescentInfo", "DiagMetric", "DriftHypothesis", "DualState", "FEAS_TOL",
    "InfeasiblePoint", "InnerSolverParams", "IterateState", "MaxItersExceeded",
    "OnlineProblem", "QuadModel", "RegretLedger", "RoundOracle", "RoundRecord",
    "RunResult", "ScalarMetric", "ScalarTheta", "Simplex",
    "StrategyAssumptionViolation", "StructuralConstants",
    "UnsupportedMetricSetPair", "ZeroTheta", "assumption_audit",
    "aug_lagrangian", "build_models", "comp_residual", "constants",
    "drift_check", "dual_objective", "dual_state", "duality_gap",
    "fit_loglog_slope", "normal_cone_violation", "objective_regret",
    "offline_oracle", "opmm_run", "projected_descent", "recover_multiplier",
    "recover_primal", "recover_w", "solve_dual", "solve_subproblem",
    "theory_bounds", "update_multipliers", "weighted_dist_sq",
    "weighted_project",
]
