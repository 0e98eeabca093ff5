"""Tabular robust MDPs: ambiguity-set support functions, robust dynamic
programming, robust empirical value iteration and experiment drivers."""
from .ambiguity import (
    SigmaResult,
    chi2_divergence,
    kl_divergence,
    sigma,
    sigma_chi2,
    sigma_finite_set,
    sigma_kl,
    sigma_kl_zero_radius,
    sigma_tv,
    tv_distance,
)
from .bounds import ComplexityInputs, gap_instance, gap_lower_bound, gap_values, k0, n_chi2, n_kl, n_tv
from .core import (
    AmbiguitySetSpec,
    MDPFormatError,
    MDPValidationError,
    SetKind,
    TabularMDP,
    Violation,
    load_mdp,
    save_mdp,
    validate_mdp,
)
from .envs import EnvFamily, chain, frozenlake, gamblers, perturb
from .generative import TransitionCounts, estimate, mle_model, sample_counts
from .oracle import sigma_grid_oracle
from .robustdp import (
    NonConvergenceWarning,
    SolveReport,
    bellman_apply,
    greedy_policy,
    nonrobust_policy_evaluation,
    revi,
    robust_policy_evaluation,
    robust_value_iteration,
)

__version__ = "0.1.0"
