"""Robust Bellman backups, robust value iteration, REVI and policy evaluation.

Value functions are arrays over states; Q-functions are flat arrays over the
MDP's (state, action) pairs (see :class:`rmdp.core.TabularMDP`); policies are
arrays holding a dense action index per state.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .ambiguity import sigma_rows
from .core import AmbiguitySetSpec, SetKind, TabularMDP


class NonConvergenceWarning(RuntimeWarning):
    pass


@dataclass
class SolveReport:
    values: np.ndarray
    q: np.ndarray
    policy: np.ndarray
    iterations: int
    residual: float
    converged: bool = True
    history: list[float] = field(default_factory=list)
    value_history: list[np.ndarray] | None = None

    def to_dict(self, mdp: TabularMDP) -> dict:
        return {
            "values": self.values.tolist(),
            "q": mdp.nested_q(self.q),
            "policy": policy_labels(mdp, self.policy),
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "history": list(self.history),
        }


def _models(mdp: TabularMDP, spec: AmbiguitySetSpec) -> np.ndarray | None:
    if spec.kind is not SetKind.FINITE:
        return None
    models = np.stack(spec.models)
    if models.shape[1:] != mdp.kernel.shape:
        raise ValueError(f"finite-set models must have the MDP's kernel shape {mdp.kernel.shape}, got {models.shape[1:]}")
    return models


def _check_v(mdp: TabularMDP, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (mdp.num_states,):
        raise ValueError(f"value vector has shape {v.shape}, expected ({mdp.num_states},)")
    return v


def _state_max(mdp: TabularMDP, q: np.ndarray) -> np.ndarray:
    return np.maximum.reduceat(q, mdp.offsets[:-1])


def _backup(mdp, spec, v, models, term_pairs, term_states):
    q = mdp.rewards + mdp.gamma * sigma_rows(mdp.kernel, v, spec, models)
    q[term_pairs] = 0.0
    values = _state_max(mdp, q)
    values[term_states] = 0.0
    return values, q


def bellman_apply(mdp: TabularMDP, spec: AmbiguitySetSpec, v) -> tuple[np.ndarray, np.ndarray]:
    """One robust Bellman backup; returns ``(T v, Q)``."""
    v = _check_v(mdp, v)
    term = mdp.terminal_mask
    return _backup(mdp, spec, v, _models(mdp, spec), term[mdp.pair_state], term)


def greedy_policy(mdp: TabularMDP, q) -> np.ndarray:
    """Per-state argmax of ``q``; ties go to the lowest action index."""
    q = np.asarray(q, dtype=float)
    if q.shape != (mdp.num_pairs,):
        raise ValueError(f"Q has shape {q.shape}, expected ({mdp.num_pairs},)")
    best = _state_max(mdp, q)
    hits = np.flatnonzero(q == best[mdp.pair_state])
    _, first = np.unique(mdp.pair_state[hits], return_index=True)
    return hits[first] - mdp.offsets[:-1]


def policy_labels(mdp: TabularMDP, policy) -> list[str]:
    return [mdp.actions[s][int(a)] for s, a in enumerate(policy)]


def policy_from_labels(mdp: TabularMDP, labels) -> np.ndarray:
    return np.array([mdp.actions[s].index(str(lab)) for s, lab in enumerate(labels)], dtype=np.int64)


def robust_value_iteration(
    mdp: TabularMDP,
    spec: AmbiguitySetSpec,
    tol: float = 1e-8,
    max_iters: int = 100_000,
) -> SolveReport:
    """Iterate ``V <- T V`` from zero until the sup-norm step drops below
    ``tol (1 - gamma) / (2 gamma)``, which puts the result within ``tol`` of
    the fixed point."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    g = mdp.gamma
    threshold = tol * (1.0 - g) / (2.0 * g)
    models = _models(mdp, spec)
    term = mdp.terminal_mask
    term_pairs = term[mdp.pair_state]
    v = np.zeros(mdp.num_states)
    q = np.zeros(mdp.num_pairs)
    history: list[float] = []
    converged = False
    k = 0
    while k < max_iters:
        new_v, q = _backup(mdp, spec, v, models, term_pairs, term)
        k += 1
        res = float(np.max(np.abs(new_v - v)))
        history.append(res)
        v = new_v
        if res <= threshold:
            converged = True
            break
    if not converged:
        warnings.warn(f"robust value iteration stopped after {k} iterations (residual {history[-1] if history else 0:.3g})",
                      NonConvergenceWarning, stacklevel=2)
    return SolveReport(v, q, greedy_policy(mdp, q), k, history[-1] if history else 0.0, converged, history)


def revi(mdp_hat: TabularMDP, spec: AmbiguitySetSpec, K: int, keep_values: bool = False) -> SolveReport:
    """Robust empirical value iteration: exactly ``K`` synchronous sweeps
    from ``Q_0 = 0`` on the estimated model, then act greedily on ``Q_K``.

    With ``keep_values`` the report carries ``V_k = max_a Q_k`` for
    ``k = 1..K`` in ``value_history``.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    models = _models(mdp_hat, spec)
    term = mdp_hat.terminal_mask
    term_pairs = term[mdp_hat.pair_state]
    v = np.zeros(mdp_hat.num_states)
    q = np.zeros(mdp_hat.num_pairs)
    history: list[float] = []
    kept: list[np.ndarray] | None = [] if keep_values else None
    for _ in range(K):
        new_v, q = _backup(mdp_hat, spec, v, models, term_pairs, term)
        history.append(float(np.max(np.abs(new_v - v))))
        v = new_v
        if kept is not None:
            kept.append(v.copy())
    return SolveReport(v, q, greedy_policy(mdp_hat, q), K, history[-1], True, history, kept)


def _policy_pairs(mdp: TabularMDP, policy) -> np.ndarray:
    policy = np.asarray(policy, dtype=np.int64)
    if policy.shape != (mdp.num_states,):
        raise ValueError(f"policy has shape {policy.shape}, expected ({mdp.num_states},)")
    counts = np.diff(mdp.offsets)
    bad = (policy < 0) | (policy >= counts)
    if np.any(bad):
        s = int(np.flatnonzero(bad)[0])
        raise ValueError(f"policy action {policy[s]} is not admissible at state {s}")
    return mdp.offsets[:-1] + policy


def robust_policy_evaluation(
    mdp: TabularMDP,
    spec: AmbiguitySetSpec,
    policy,
    tol: float = 1e-8,
    max_iters: int = 100_000,
) -> np.ndarray:
    """Fixed point of ``V(s) = r(s, pi(s)) + gamma sigma_{s, pi(s)}(V)``.

    For a finite model list this is the rectangularized (per-row minimum)
    value, a lower bound on each model's own value.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    pairs = _policy_pairs(mdp, policy)
    g = mdp.gamma
    threshold = tol * (1.0 - g) / (2.0 * g)
    rows = mdp.kernel[pairs]
    r = mdp.rewards[pairs]
    models = _models(mdp, spec)
    if models is not None:
        models = models[:, pairs]
    term = mdp.terminal_mask
    v = np.zeros(mdp.num_states)
    for k in range(max_iters):
        new_v = r + g * sigma_rows(rows, v, spec, models)
        new_v[term] = 0.0
        res = float(np.max(np.abs(new_v - v)))
        v = new_v
        if res <= threshold:
            return v
    warnings.warn(f"robust policy evaluation stopped after {max_iters} iterations (residual {res:.3g})",
                  NonConvergenceWarning, stacklevel=2)
    return v


def nonrobust_policy_evaluation(mdp: TabularMDP, policy, kernel_override=None) -> np.ndarray:
    """Value of ``policy`` under one model (the nominal kernel, or
    ``kernel_override`` in the same flat pair layout), by solving
    ``(I - gamma P_pi) V = r_pi`` directly."""
    pairs = _policy_pairs(mdp, policy)
    kernel = mdp.kernel if kernel_override is None else np.asarray(kernel_override, dtype=float)
    if kernel.shape != mdp.kernel.shape:
        raise ValueError(f"kernel_override must have shape {mdp.kernel.shape}")
    P = kernel[pairs].copy()
    r = mdp.rewards[pairs].copy()
    term = mdp.terminal_mask
    P[term] = 0.0
    r[term] = 0.0
    A = np.eye(mdp.num_states) - mdp.gamma * P
    return np.linalg.solve(A, r)
