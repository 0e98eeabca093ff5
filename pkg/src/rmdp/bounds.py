"""Sample-complexity thresholds for REVI and the two-state robustness-gap MDP.

The calculators return real numbers; round up yourself if you need an
iteration or sample count. Inputs outside the range where the guarantees
are stated raise ``ValueError``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import TabularMDP
from .robustdp import nonrobust_policy_evaluation


@dataclass(frozen=True)
class ComplexityInputs:
    gamma: float
    eps: float
    delta: float
    num_states: int
    num_actions: int
    radius: float = 0.0
    lambda_kl: float | None = None

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.num_states < 1 or self.num_actions < 1:
            raise ValueError("num_states and num_actions must be positive")


def _eps_range(inputs: ComplexityInputs, upper: float, name: str) -> None:
    if not 0.0 < inputs.eps < upper:
        raise ValueError(f"{name}: eps must lie in (0, {upper:.6g}) for gamma={inputs.gamma}, got {inputs.eps}")


def k0(gamma: float, eps: float) -> float:
    """Iterations after which ``gamma**K <= eps (1-gamma)**2 / (8 gamma)``."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return math.log(8.0 * gamma / (eps * (1.0 - gamma) ** 2)) / math.log(1.0 / gamma)


def n_tv(inputs: ComplexityInputs) -> float:
    g, e = inputs.gamma, inputs.eps
    _eps_range(inputs, 24.0 * g / (1.0 - g), "TV")
    S, A = inputs.num_states, inputs.num_actions
    lead = 72.0 * g**2 * S / ((1.0 - g) ** 4 * e**2)
    return lead * math.log(144.0 * g * S * A / (inputs.delta * e * (1.0 - g) ** 2))


def n_chi2(inputs: ComplexityInputs) -> float:
    # the absolute constant mentioned alongside this bound never enters the formula
    g, e = inputs.gamma, inputs.eps
    _eps_range(inputs, 16.0 * g / (1.0 - g), "chi-square")
    if inputs.radius < 0:
        raise ValueError("radius must be non-negative")
    S, A = inputs.num_states, inputs.num_actions
    lead = 64.0 * g**2 * (2.0 * inputs.radius + 1.0) * S / ((1.0 - g) ** 4 * e**2)
    return lead * math.log(192.0 * S * A * g / (inputs.delta * e * (1.0 - g) ** 2))


def n_kl(inputs: ComplexityInputs) -> float:
    """Only the explicit branch of the KL threshold; the problem-dependent
    burn-in terms are not modelled."""
    g, e = inputs.gamma, inputs.eps
    _eps_range(inputs, 1.0 / (1.0 - g), "KL")
    lam = inputs.lambda_kl
    if lam is None or not lam > 0:
        raise ValueError("KL threshold needs a positive lambda_kl")
    if not inputs.radius > 0:
        raise ValueError("KL threshold needs a positive radius")
    S, A = inputs.num_states, inputs.num_actions
    lead = 8.0 * g**2 * S / (inputs.radius**2 * (1.0 - g) ** 4 * e**2)
    expo = (2.0 * lam + 4.0) / (lam * (1.0 - g))
    tail = math.log(9.0 * S * A / (inputs.delta * lam * (1.0 - g)))
    # the exponential factor leaves double range for small lambda_kl (1 - gamma)
    if tail > 0 and expo + math.log(lead) + math.log(tail) >= 709.0:
        return math.inf
    return lead * math.exp(expo) * tail


# -- robustness gap -----------------------------------------------------------

GAMMA_MIN = 0.01
LEFT, RIGHT = 0, 1


def gap_instance(gamma: float) -> tuple[TabularMDP, np.ndarray]:
    """Two-state chain and its alternative kernel.

    Actions are ``al`` (left) and ``ar`` (right). ``r(1, ar) = 1``,
    ``r(0, ar) = -100 gamma / 99``, all other rewards 0. Nominal: ``al``
    leads to state 0 and ``ar`` to state 1 from either state. Alternative:
    same, except ``ar`` from state 1 leads back to state 0.
    """
    if not GAMMA_MIN < gamma < 1.0:
        raise ValueError(f"gamma must lie in ({GAMMA_MIN}, 1), got {gamma}")
    rewards = [[0.0, -100.0 * gamma / 99.0], [0.0, 1.0]]
    nominal = [[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]]
    alt = [[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [1.0, 0.0]]]
    mdp = TabularMDP.from_nested(gamma, [["al", "ar"], ["al", "ar"]], rewards, nominal)
    alt_kernel = np.array([row for per_state in alt for row in per_state], dtype=float)
    return mdp, alt_kernel


@dataclass(frozen=True)
class GapValues:
    v_robust_opt: float
    v_nonrobust_worst: float
    gap: float
    numeric_v_robust_opt: float
    numeric_v_nonrobust_worst: float
    numeric_gap: float

    @property
    def max_discrepancy(self) -> float:
        return max(abs(self.v_robust_opt - self.numeric_v_robust_opt),
                   abs(self.v_nonrobust_worst - self.numeric_v_nonrobust_worst),
                   abs(self.gap - self.numeric_gap))


def _best_value(mdp: TabularMDP, kernel: np.ndarray, s: int) -> float:
    # enumerate all deterministic policies of the 2x2 instance
    best = -math.inf
    for a0 in (LEFT, RIGHT):
        for a1 in (LEFT, RIGHT):
            best = max(best, float(nonrobust_policy_evaluation(mdp, [a0, a1], kernel)[s]))
    return best


def gap_values(gamma: float, check_tol: float = 1e-9) -> GapValues:
    """Closed-form worst-case values at state 0, recomputed numerically.

    The numeric path evaluates the nominal-optimal policy (``ar``
    everywhere) under each whole model and takes the minimum; the robust
    optimum is the minimum over models of each model's optimal value.
    Raises ``ArithmeticError`` if the two paths disagree by more than
    ``check_tol``.
    """
    mdp, alt = gap_instance(gamma)
    v_opt = 0.0
    v_worst = -gamma / (99.0 * (1.0 - gamma**2))
    gap = gamma / (99.0 * (1.0 - gamma**2))

    models = [mdp.kernel, alt]
    nominal_policy = [RIGHT, RIGHT]
    num_worst = min(float(nonrobust_policy_evaluation(mdp, nominal_policy, k)[0]) for k in models)
    num_opt = min(_best_value(mdp, k, 0) for k in models)
    out = GapValues(v_opt, v_worst, gap, num_opt, num_worst, num_opt - num_worst)
    if out.max_discrepancy > check_tol:
        raise ArithmeticError(f"analytic and numeric gap values differ by {out.max_discrepancy:.3g}")
    return out


def gap_lower_bound(gamma: float) -> float:
    return gamma / (198.0 * (1.0 - gamma))
