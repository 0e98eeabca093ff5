"""Domain types for tabular robust MDPs and the JSON model format.

Actions are stored per state. Internally every admissible (state, action)
pair gets a row in a flat "pair" layout: ``rewards[i]`` and ``kernel[i, :]``
belong to pair ``i``, whose state is ``pair_state[i]``. The pairs of state
``s`` occupy ``offsets[s]:offsets[s + 1]`` in action order, so no padding or
action masks are needed when action sets differ between states.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

ROW_SUM_TOL = 1e-9


class MDPFormatError(ValueError):
    """Raised when an MDP file cannot be parsed."""


class MDPValidationError(ValueError):
    """Raised when a parsed MDP violates a model invariant."""

    def __init__(self, violations: list[Violation]):
        self.violations = violations
        lines = "; ".join(str(v) for v in violations)
        super().__init__(f"invalid MDP: {lines}")


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    state: int | None = None
    action: int | None = None

    def __str__(self) -> str:
        where = ""
        if self.state is not None:
            where = f" at s={self.state}" + (f", a={self.action}" if self.action is not None else "")
        return f"{self.kind}{where}: {self.message}"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TabularMDP:
    """Finite MDP with state-dependent action sets.

    Build instances with :meth:`from_nested` unless you already hold the flat
    pair arrays. Construction only checks shapes; use :func:`validate_mdp` for
    the model invariants.
    """

    gamma: float
    actions: tuple[tuple[str, ...], ...]
    rewards: np.ndarray
    kernel: np.ndarray
    terminal: frozenset[int] = frozenset()
    reward_bound: float | None = None
    pair_state: np.ndarray = field(init=False, repr=False)
    offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        actions = tuple(tuple(str(a) for a in acts) for acts in self.actions)
        object.__setattr__(self, "actions", actions)
        counts = np.array([len(a) for a in actions], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        n_pairs = int(offsets[-1])
        rewards = _frozen(np.asarray(self.rewards, dtype=float).reshape(-1))
        kernel = _frozen(np.asarray(self.kernel, dtype=float))
        if rewards.shape != (n_pairs,):
            raise ValueError(f"expected {n_pairs} rewards, got {rewards.shape}")
        if kernel.shape != (n_pairs, len(actions)):
            raise ValueError(f"kernel must have shape {(n_pairs, len(actions))}, got {kernel.shape}")
        pair_state = np.repeat(np.arange(len(actions), dtype=np.int64), counts)
        pair_state.setflags(write=False)
        offsets.setflags(write=False)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "terminal", frozenset(int(s) for s in self.terminal))
        object.__setattr__(self, "pair_state", pair_state)
        object.__setattr__(self, "offsets", offsets)
        bound = self.reward_bound
        if bound is None:
            bound = float(np.max(np.abs(rewards))) if n_pairs else 0.0
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "reward_bound", float(bound))

    @classmethod
    def from_nested(
        cls,
        gamma: float,
        actions: Sequence[Sequence[str]],
        rewards: Sequence[Sequence[float]],
        transitions: Sequence[Sequence[Sequence[float]]],
        terminal: Sequence[int] = (),
        reward_bound: float | None = None,
    ) -> TabularMDP:
        """Build from ``rewards[s][a]`` and ``transitions[s][a][s']`` lists."""
        n = len(actions)
        if len(rewards) != n or len(transitions) != n:
            raise ValueError("actions, rewards and transitions must all have one entry per state")
        flat_r, rows = [], []
        for s in range(n):
            if len(rewards[s]) != len(actions[s]) or len(transitions[s]) != len(actions[s]):
                raise ValueError(f"state {s}: rewards/transitions do not match its {len(actions[s])} actions")
            for a in range(len(actions[s])):
                row = transitions[s][a]
                if len(row) != n:
                    raise ValueError(f"state {s}, action {a}: transition row has length {len(row)}, expected {n}")
                flat_r.append(rewards[s][a])
                rows.append(row)
        kernel = np.array(rows, dtype=float).reshape(len(rows), n)
        return cls(gamma, tuple(tuple(a) for a in actions), np.array(flat_r, dtype=float), kernel,
                   frozenset(terminal), reward_bound)

    @property
    def num_states(self) -> int:
        return len(self.actions)

    @property
    def num_pairs(self) -> int:
        return int(self.offsets[-1])

    @property
    def max_actions(self) -> int:
        return max(len(a) for a in self.actions)

    def num_actions(self, s: int) -> int:
        return len(self.actions[s])

    def pair(self, s: int, a: int) -> int:
        """Flat pair index of dense action ``a`` at state ``s``."""
        if not 0 <= a < len(self.actions[s]):
            raise IndexError(f"action {a} not admissible at state {s}")
        return int(self.offsets[s]) + a

    def row(self, s: int, a: int) -> np.ndarray:
        return self.kernel[self.pair(s, a)]

    def reward(self, s: int, a: int) -> float:
        return float(self.rewards[self.pair(s, a)])

    @property
    def terminal_mask(self) -> np.ndarray:
        mask = np.zeros(self.num_states, dtype=bool)
        mask[list(self.terminal)] = True
        return mask

    def nested_rewards(self) -> list[list[float]]:
        return [self.rewards[self.offsets[s]:self.offsets[s + 1]].tolist() for s in range(self.num_states)]

    def nested_transitions(self) -> list[list[list[float]]]:
        return [self.kernel[self.offsets[s]:self.offsets[s + 1]].tolist() for s in range(self.num_states)]

    def nested_q(self, q: np.ndarray) -> list[list[float]]:
        q = np.asarray(q, dtype=float)
        return [q[self.offsets[s]:self.offsets[s + 1]].tolist() for s in range(self.num_states)]

    def with_kernel(self, kernel: np.ndarray) -> TabularMDP:
        """Copy with a replaced flat kernel (same pair layout)."""
        return TabularMDP(self.gamma, self.actions, self.rewards, kernel, self.terminal, self.reward_bound)

    def with_gamma(self, gamma: float) -> TabularMDP:
        return TabularMDP(gamma, self.actions, self.rewards, self.kernel, self.terminal, self.reward_bound)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TabularMDP):
            return NotImplemented
        return (
            self.gamma == other.gamma
            and self.actions == other.actions
            and self.terminal == other.terminal
            and self.reward_bound == other.reward_bound
            and np.array_equal(self.rewards, other.rewards)
            and np.array_equal(self.kernel, other.kernel)
        )

    __hash__ = None


class SetKind(str, enum.Enum):
    TV = "tv"
    CHI2 = "chi2"
    KL = "kl"
    FINITE = "finite"
    NONE = "none"


@dataclass(frozen=True, eq=False)
class AmbiguitySetSpec:
    """Which (s,a)-rectangular ambiguity set to use.

    ``models`` holds flat kernels in the pair layout of the MDP the set is
    used with; it is only read for ``SetKind.FINITE``.
    """

    kind: SetKind
    radius: float = 0.0
    models: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", SetKind(self.kind))
        r = float(self.radius)
        if not math.isfinite(r) or r < 0:
            raise ValueError(f"radius must be a finite non-negative number, got {self.radius}")
        object.__setattr__(self, "radius", r)
        object.__setattr__(self, "models", tuple(_frozen(m) for m in self.models))
        if self.kind is SetKind.FINITE:
            if not self.models:
                raise ValueError("a finite ambiguity set needs at least one model")
            for i, m in enumerate(self.models):
                bad = _row_problems(m)
                if bad:
                    raise ValueError(f"model {i}: {bad[0]}")

    @classmethod
    def none(cls) -> AmbiguitySetSpec:
        return cls(SetKind.NONE)

    @classmethod
    def tv(cls, radius: float) -> AmbiguitySetSpec:
        return cls(SetKind.TV, radius)

    @classmethod
    def chi2(cls, radius: float) -> AmbiguitySetSpec:
        return cls(SetKind.CHI2, radius)

    @classmethod
    def kl(cls, radius: float) -> AmbiguitySetSpec:
        return cls(SetKind.KL, radius)

    @classmethod
    def finite(cls, models: Sequence[np.ndarray]) -> AmbiguitySetSpec:
        return cls(SetKind.FINITE, 0.0, tuple(models))


def _row_problems(kernel: np.ndarray) -> list[str]:
    kernel = np.asarray(kernel, dtype=float)
    out = []
    if kernel.ndim != 2:
        return [f"kernel must be 2-D, got shape {kernel.shape}"]
    if not np.all(np.isfinite(kernel)):
        out.append("non-finite probability")
    if np.any(kernel < 0):
        out.append("negative probability")
    sums = kernel.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
        out.append("row does not sum to 1")
    return out


def validate_distribution(p: Sequence[float]) -> np.ndarray:
    """Return ``p`` as an array, raising ValueError unless it is a distribution."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("a distribution must be a non-empty 1-D vector")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError("distribution entries must be finite and non-negative")
    if abs(p.sum() - 1.0) > ROW_SUM_TOL:
        raise ValueError(f"distribution sums to {p.sum()!r}, not 1")
    return p


def validate_mdp(mdp: TabularMDP) -> list[Violation]:
    """List every invariant violation of ``mdp``; empty when well-formed."""
    out: list[Violation] = []
    if not (0.0 < mdp.gamma < 1.0) or not math.isfinite(mdp.gamma):
        out.append(Violation("gamma", f"gamma out of range (0, 1): {mdp.gamma!r}"))
    if mdp.num_states < 1:
        out.append(Violation("num-states", "model has no states"))
    for s in range(mdp.num_states):
        if not mdp.actions[s]:
            out.append(Violation("no-actions", "state has no admissible action", s))
        if len(set(mdp.actions[s])) != len(mdp.actions[s]):
            out.append(Violation("duplicate-action", "action labels must be unique per state", s))
    max_abs = 0.0
    for i in range(mdp.num_pairs):
        s = int(mdp.pair_state[i])
        a = i - int(mdp.offsets[s])
        r = mdp.rewards[i]
        row = mdp.kernel[i]
        if not math.isfinite(r):
            out.append(Violation("reward", f"non-finite reward {r!r}", s, a))
        else:
            max_abs = max(max_abs, abs(r))
        if not np.all(np.isfinite(row)):
            out.append(Violation("row-finite", "non-finite transition probability", s, a))
            continue
        if np.any(row < 0):
            out.append(Violation("row-negative", "negative transition probability", s, a))
        total = float(row.sum())
        if abs(total - 1.0) > ROW_SUM_TOL:
            out.append(Violation("row-sum", f"transition row sums to {total!r}", s, a))
        if s in mdp.terminal:
            if row[s] != 1.0:
                out.append(Violation("terminal-absorbing", "terminal state must self-loop with probability 1", s, a))
            if r != 0.0:
                out.append(Violation("terminal-reward", f"terminal state reward must be 0, got {r!r}", s, a))
    for s in sorted(mdp.terminal):
        if not 0 <= s < mdp.num_states:
            out.append(Violation("terminal-index", f"terminal state {s} out of range"))
    if not math.isfinite(mdp.reward_bound) or mdp.reward_bound < max_abs:
        out.append(Violation("reward-bound", f"reward_bound {mdp.reward_bound!r} below max |r| = {max_abs!r}"))
    return out


def check_mdp(mdp: TabularMDP) -> TabularMDP:
    violations = validate_mdp(mdp)
    if violations:
        raise MDPValidationError(violations)
    return mdp


def mdp_to_dict(mdp: TabularMDP) -> dict:
    return {
        "gamma": mdp.gamma,
        "num_states": mdp.num_states,
        "actions": [list(a) for a in mdp.actions],
        "rewards": mdp.nested_rewards(),
        "transitions": mdp.nested_transitions(),
        "terminal": sorted(mdp.terminal),
        "reward_bound": mdp.reward_bound,
    }


_REQUIRED = ("gamma", "num_states", "actions", "rewards", "transitions")


def mdp_from_dict(data: dict, *, validate: bool = True) -> TabularMDP:
    if not isinstance(data, dict):
        raise MDPFormatError("top-level JSON value must be an object")
    for key in _REQUIRED:
        if key not in data:
            raise MDPFormatError(f"missing required field {key!r}")
    n = data["num_states"]
    if not isinstance(n, int) or n < 1:
        raise MDPFormatError(f"field 'num_states' must be a positive integer, got {n!r}")
    for key in ("actions", "rewards", "transitions"):
        if not isinstance(data[key], list) or len(data[key]) != n:
            raise MDPFormatError(f"field {key!r} must be a list with num_states={n} entries")
    try:
        gamma = float(data["gamma"])
    except (TypeError, ValueError) as exc:
        raise MDPFormatError(f"field 'gamma' is not a number: {data['gamma']!r}") from exc
    try:
        mdp = TabularMDP.from_nested(
            gamma,
            data["actions"],
            data["rewards"],
            data["transitions"],
            data.get("terminal", []),
            data.get("reward_bound"),
        )
    except (TypeError, ValueError) as exc:
        raise MDPFormatError(f"malformed model arrays: {exc}") from exc
    if validate:
        check_mdp(mdp)
    return mdp


def save_mdp(mdp: TabularMDP, path: str | Path) -> None:
    # json writes floats with repr(), which round-trips exactly
    Path(path).write_text(json.dumps(mdp_to_dict(mdp), indent=1) + "\n", encoding="utf-8")


def load_mdp(path: str | Path, *, validate: bool = True) -> TabularMDP:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MDPFormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return mdp_from_dict(data, validate=validate)
