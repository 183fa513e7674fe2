"""Tabular POMDPs with external memory modules, exact analysis oracles and tabular learners."""

from .augmentation import AugmentedEnv, ProductPomdp, augment, build_product_pomdp
from .environments import make_environment
from .errors import (
    CapacityError,
    ConfigError,
    InconsistentHistoryError,
    InvalidPomdpError,
    MemaugError,
    UnsupportedConfigurationError,
    UsageError,
)
from .exact import (
    closed_form_q_b1,
    detect_shortcuts,
    exact_obs_q,
    exhaustive_policy_search,
    idealized_improvement,
    sufficiency_report,
    td_fixed_point,
)
from .learners import LearnerConfig, RunRecord, nstep_actor_critic, q_learning, run_learner, sarsa_lambda
from .memories import make_memory
from .pomdp import StochasticPolicy, TabularPomdp, policy_value

__all__ = [
    "AugmentedEnv",
    "CapacityError",
    "ConfigError",
    "InconsistentHistoryError",
    "InvalidPomdpError",
    "LearnerConfig",
    "MemaugError",
    "ProductPomdp",
    "RunRecord",
    "StochasticPolicy",
    "TabularPomdp",
    "UnsupportedConfigurationError",
    "UsageError",
    "augment",
    "build_product_pomdp",
    "closed_form_q_b1",
    "detect_shortcuts",
    "exact_obs_q",
    "exhaustive_policy_search",
    "idealized_improvement",
    "make_environment",
    "make_memory",
    "nstep_actor_critic",
    "policy_value",
    "q_learning",
    "run_learner",
    "sarsa_lambda",
    "sufficiency_report",
    "td_fixed_point",
]
