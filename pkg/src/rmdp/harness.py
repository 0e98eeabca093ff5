"""Experiment drivers: convergence curves and Monte-Carlo robustness sweeps.

Every random draw comes from a counter-based stream (:mod:`rmdp.rng`) keyed
by the experiment seed and the cell index, so results do not depend on how
many worker processes evaluate the cells.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import AmbiguitySetSpec, SetKind, TabularMDP
from .envs import EnvFamily, perturb
from .generative import estimate
from .rng import mix, uniforms_batch
from .robustdp import revi, robust_value_iteration

DEFAULT_HORIZON = 1000
VSTAR_TOL = 1e-10


@dataclass(frozen=True)
class ExperimentRecord:
    experiment: str
    family: str
    set_kind: str
    radius: float
    seed: int
    x: float
    metric_name: str
    metric_value: float


CSV_HEADER = [f.name for f in fields(ExperimentRecord)]


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def records_to_csv(records: Iterable[ExperimentRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(CSV_HEADER)
    for rec in records:
        if not math.isfinite(rec.metric_value):
            raise ValueError(f"non-finite metric in record {rec}")
        writer.writerow([_fmt(v) for v in astuple(rec)])
    return buf.getvalue()


def write_csv(records: Iterable[ExperimentRecord], path: str | Path) -> None:
    Path(path).write_bytes(records_to_csv(records).encode("utf-8"))


def read_csv(path: str | Path) -> list[ExperimentRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [ExperimentRecord(r["experiment"], r["family"], r["set_kind"], float(r["radius"]), int(r["seed"]),
                             float(r["x"]), r["metric_name"], float(r["metric_value"])) for r in rows]


def _run_cells(fn: Callable, cells: Sequence, workers: int) -> list:
    if workers <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=min(workers, len(cells))) as pool:
        return list(pool.map(fn, cells))


def sup_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def _label(spec: AmbiguitySetSpec) -> tuple[str, float]:
    return spec.kind.value, spec.radius


# -- convergence --------------------------------------------------------------

def optimal_robust_values(env: EnvFamily, spec: AmbiguitySetSpec) -> np.ndarray:
    """V* of the true nominal model under ``spec``."""
    return robust_value_iteration(env.build(), spec, tol=VSTAR_TOL).values


def convergence_vs_iterations(
    env: EnvFamily,
    spec: AmbiguitySetSpec,
    n_samples: int,
    seed: int,
    k_max: int,
) -> list[ExperimentRecord]:
    """``||V_k - V*||`` for ``k = 1..k_max`` of one REVI run on an estimated model."""
    mdp = env.build()
    v_star = robust_value_iteration(mdp, spec, tol=VSTAR_TOL).values
    mdp_hat = estimate(mdp, n_samples, seed)
    rep = revi(mdp_hat, spec, k_max, keep_values=True)
    kind, radius = _label(spec)
    return [ExperimentRecord("iters", env.name, kind, radius, seed, k, "sup_error", sup_error(v, v_star))
            for k, v in enumerate(rep.value_history, start=1)]


def _samples_cell(args) -> float:
    env, spec, n, seed, k, v_star = args
    mdp_hat = estimate(env.build(), n, seed)
    return sup_error(revi(mdp_hat, spec, k).values, v_star)


def convergence_vs_samples(
    env: EnvFamily,
    spec: AmbiguitySetSpec,
    n_grid: Sequence[int],
    seeds: Sequence[int],
    k: int,
    workers: int = 1,
) -> list[ExperimentRecord]:
    """Final REVI error ``||V_K(N) - V*||`` for every (N, seed) cell."""
    if not n_grid or not seeds:
        return []
    v_star = optimal_robust_values(env, spec)
    cells = [(env, spec, int(n), int(s), k, v_star) for n in n_grid for s in seeds]
    errors = _run_cells(_samples_cell, cells, workers)
    kind, radius = _label(spec)
    return [ExperimentRecord("samples", env.name, kind, radius, c[3], c[2], "sup_error", e)
            for c, e in zip(cells, errors)]


# -- rollouts -----------------------------------------------------------------

def rollout_batch(
    mdp: TabularMDP,
    policy,
    horizon: int,
    rho_random_action: float,
    keys: Sequence[int],
    goal: Iterable[int],
    start_states: Sequence[int],
) -> np.ndarray:
    """Simulate one episode per stream key; True where a goal state is entered.

    Draw 0 of a stream picks the start state uniformly from
    ``start_states``. Step ``t`` (from 0) uses draws ``3t+1`` (random-action
    coin), ``3t+2`` (uniform action index) and ``3t+3`` (next state by
    inverse CDF). Episodes end on entering any terminal state.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if not 0.0 <= rho_random_action <= 1.0:
        raise ValueError("rho_random_action must lie in [0, 1]")
    policy = np.asarray(policy, dtype=np.int64)
    keys = np.asarray([int(k) for k in keys], dtype=np.uint64)
    start_states = np.asarray(start_states, dtype=np.int64)
    goal_mask = np.zeros(mdp.num_states, dtype=bool)
    goal_mask[list(goal)] = True
    term_mask = mdp.terminal_mask
    n_act = np.diff(mdp.offsets)
    cdf = np.cumsum(mdp.kernel, axis=1)
    last_pos = np.array([np.flatnonzero(row > 0)[-1] for row in mdp.kernel])

    m = keys.size
    u0 = uniforms_batch(keys, [0])[:, 0]
    state = start_states[np.minimum((u0 * start_states.size).astype(np.int64), start_states.size - 1)]
    success = goal_mask[state]
    alive = ~term_mask[state]
    for t in range(horizon):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        u = uniforms_batch(keys[idx], [3 * t + 1, 3 * t + 2, 3 * t + 3])
        s = state[idx]
        a = policy[s]
        flip = u[:, 0] < rho_random_action
        rand_a = np.minimum((u[:, 1] * n_act[s]).astype(np.int64), n_act[s] - 1)
        a = np.where(flip, rand_a, a)
        pairs = mdp.offsets[s] + a
        nxt = np.sum(cdf[pairs] <= u[:, 2:3], axis=1)
        nxt = np.minimum(nxt, last_pos[pairs])
        state[idx] = nxt
        success[idx] = goal_mask[nxt]
        alive[idx] = ~term_mask[nxt]
    return success


def rollout(
    mdp: TabularMDP,
    policy,
    horizon: int,
    rho_random_action: float,
    key: int,
    goal: Iterable[int],
    start_states: Sequence[int],
) -> bool:
    """Single-episode form of :func:`rollout_batch` for stream ``key``."""
    return bool(rollout_batch(mdp, policy, horizon, rho_random_action, [key], goal, start_states)[0])


@dataclass(frozen=True)
class LabeledPolicy:
    set_kind: str
    radius: float
    policy: np.ndarray


def _robustness_cell(args) -> float:
    test_env, policy, trials, horizon, cell_key = args
    mdp = test_env.build()
    keys = [mix(cell_key, t) for t in range(trials)]
    wins = rollout_batch(mdp, policy, horizon, test_env.rollout_rho, keys,
                         test_env.goal_states, test_env.start_states())
    return float(np.count_nonzero(wins)) / trials


def robustness_eval(
    policies: Sequence[LabeledPolicy],
    env: EnvFamily,
    which: str,
    sweep: Sequence[float],
    trials: int,
    horizon: int,
    seed: int,
    workers: int = 1,
) -> list[ExperimentRecord]:
    """Win fraction of each policy on test variants of ``env``.

    Sweep value ``j`` uses stream key ``mix(seed, j)`` for every policy, so
    all policies face the same random numbers at a given perturbation.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    cells, labels = [], []
    for lp in policies:
        for j, value in enumerate(sweep):
            cells.append((perturb(env, which, value), lp.policy, trials, horizon, mix(seed, j)))
            labels.append((lp, value))
    fractions = _run_cells(_robustness_cell, cells, workers)
    return [ExperimentRecord("robustness", env.name, lp.set_kind, lp.radius, seed, value, "win_fraction", f)
            for (lp, value), f in zip(labels, fractions)]


def train_policies(
    env: EnvFamily,
    spec: AmbiguitySetSpec,
    n_samples: int,
    seed: int,
    k: int,
) -> list[LabeledPolicy]:
    """REVI policies from one estimated model: the robust one under ``spec``
    and the non-robust baseline (TV radius 0) on the same estimate."""
    mdp_hat = estimate(env.build(), n_samples, seed)
    robust = revi(mdp_hat, spec, k).policy
    baseline = revi(mdp_hat, AmbiguitySetSpec(SetKind.TV, 0.0), k).policy
    kind, radius = _label(spec)
    return [LabeledPolicy(kind, radius, robust), LabeledPolicy(SetKind.TV.value, 0.0, baseline)]


def iterations_for(gamma: float, tol: float = 1e-6) -> int:
    """Smallest K with ``gamma**K / (1 - gamma) <= tol``."""
    return max(1, math.ceil(math.log(tol * (1.0 - gamma)) / math.log(gamma)))
