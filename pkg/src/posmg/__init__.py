"""Finite-horizon partially observable zero-sum semi-Markov games under the
risk-probability criterion: exact solver, policy evaluation, simulation."""

from .belief import Belief, canonical_key, filter_update, goal_tail_mass, initial_belief, y_marginal
from .errors import (
    DistributionError,
    ImpossibleObservation,
    InvalidModelError,
    LabelError,
    ModelFormatError,
    PolicyCoverageError,
    PosmgError,
    ResourceLimitError,
)
from .matgame import SaddleSolution, best_response_value, solve_zero_sum
from .model import (
    GameModel,
    ValidationReport,
    build_model,
    joint_mass,
    load_model,
    marginal_mass,
    mixed_marginal,
    model_from_dict,
    model_to_dict,
    survival,
    validate,
)
from .sim import (
    RiskEstimate,
    RolloutRecord,
    enumerate_exact,
    estimate_risk,
    exhaustive_posterior,
    filter_trace,
    rollout,
)
from .solver import (
    AugmentedState,
    PolicyTable,
    SolveResult,
    evaluate_policies,
    one_sided_backup_solve,
    shapley_backup,
    solve,
    stage_payoff,
    value_iteration_trace,
)

__version__ = "0.1.0"
