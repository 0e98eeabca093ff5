"""Benchmark environments: Gambler's problem, FrozenLake and the gap chain."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .bounds import gap_instance
from .core import TabularMDP

GOAL_CAPITAL = 100

FROZENLAKE_8X8 = (
    "SFFFFFFF",
    "FFFFFFFF",
    "FFFHFFFF",
    "FFFFFHFF",
    "FFFHFFFF",
    "FHHFFFHF",
    "FHFFHFHF",
    "FFFHFFFG",
)

# action order follows the usual FrozenLake convention
LEFT, DOWN, RIGHT, UP = range(4)
_MOVES = {LEFT: (0, -1), DOWN: (1, 0), RIGHT: (0, 1), UP: (-1, 0)}
_ACTION_LABELS = ("L", "D", "R", "U")
FROZENLAKE_TEST_P_INTENDED = 0.2


def gamblers(p_h: float, gamma: float) -> TabularMDP:
    """Gambler's problem with capital 0..100 and stakes 0..min(s, 100-s).

    States 0 and 100 are absorbing. A stake ``b`` moves to ``s+b`` with
    probability ``p_h`` and to ``s-b`` otherwise. Rewards are deterministic
    per (s, b), so the unit reward for reaching 100 enters as its expected
    value ``p_h`` on the stakes that can reach 100.
    """
    if not 0.0 < p_h <= 1.0:
        raise ValueError(f"p_h must lie in (0, 1], got {p_h}")
    n = GOAL_CAPITAL + 1
    actions, rewards, rows = [], [], []
    for s in range(n):
        if s in (0, GOAL_CAPITAL):
            actions.append(("0",))
            rewards.append(0.0)
            row = np.zeros(n)
            row[s] = 1.0
            rows.append(row)
            continue
        stakes = range(min(s, GOAL_CAPITAL - s) + 1)
        actions.append(tuple(str(b) for b in stakes))
        for b in stakes:
            row = np.zeros(n)
            row[s + b] += p_h
            row[s - b] += 1.0 - p_h
            rows.append(row)
            rewards.append(p_h if b > 0 and s + b == GOAL_CAPITAL else 0.0)
    return TabularMDP(gamma, tuple(actions), np.array(rewards), np.array(rows),
                      frozenset({0, GOAL_CAPITAL}), reward_bound=1.0)


def parse_map(lines: Sequence[str]) -> tuple[str, ...]:
    grid = tuple(line.strip() for line in lines if line.strip())
    if not grid:
        raise ValueError("empty map")
    width = len(grid[0])
    if any(len(row) != width for row in grid):
        raise ValueError("map rows must all have the same length")
    chars = "".join(grid)
    if set(chars) - set("SFHG"):
        raise ValueError(f"map may only contain S, F, H, G; found {sorted(set(chars) - set('SFHG'))}")
    if chars.count("S") != 1 or chars.count("G") != 1:
        raise ValueError("map must contain exactly one S and exactly one G")
    return grid


def load_map(path: str | Path) -> tuple[str, ...]:
    return parse_map(Path(path).read_text(encoding="utf-8").splitlines())


def frozenlake(p_intended: float, gamma: float, grid: Sequence[str] = FROZENLAKE_8X8) -> TabularMDP:
    """Slippery gridworld; the intended move happens with ``p_intended`` and
    each perpendicular move with half of the rest. Moving into a wall stays
    put. Holes and the goal absorb; entering the goal pays 1, carried as the
    expected reward of each (s, a)."""
    if not 0.0 < p_intended <= 1.0:
        raise ValueError(f"p_intended must lie in (0, 1], got {p_intended}")
    grid = parse_map(grid)
    nrow, ncol = len(grid), len(grid[0])
    n = nrow * ncol
    goal = "".join(grid).index("G")
    terminal = {i for i, c in enumerate("".join(grid)) if c in "HG"}
    slip = (1.0 - p_intended) / 2.0

    def step(s, a):
        r, c = divmod(s, ncol)
        dr, dc = _MOVES[a]
        r2, c2 = r + dr, c + dc
        if not (0 <= r2 < nrow and 0 <= c2 < ncol):
            return s
        return r2 * ncol + c2

    rows, rewards = [], []
    for s in range(n):
        for a in range(4):
            row = np.zeros(n)
            if s in terminal:
                row[s] = 1.0
            else:
                for b, p in ((a, p_intended), ((a - 1) % 4, slip), ((a + 1) % 4, slip)):
                    if p > 0:
                        row[step(s, b)] += p
            rows.append(row)
            rewards.append(0.0 if s in terminal else float(row[goal]))
    return TabularMDP(gamma, (_ACTION_LABELS,) * n, np.array(rewards), np.array(rows),
                      frozenset(terminal), reward_bound=1.0)


def chain(gamma: float) -> TabularMDP:
    """Nominal model of the two-state robustness-gap chain."""
    return gap_instance(gamma)[0]


@dataclass(frozen=True)
class EnvFamily:
    """A parametrized environment with its nominal and test settings.

    ``rho_random_action`` is not part of the transition model; rollouts read
    it from :meth:`rollout_rho` and replace the chosen action by a uniformly
    random one with that probability.
    """

    name: str
    gamma: float
    params: dict = field(default_factory=dict)
    grid: tuple[str, ...] = FROZENLAKE_8X8

    _ALLOWED = {
        "gamblers": {"p_h"},
        "frozenlake": {"p_intended", "rho_random_action"},
        "chain": set(),
    }

    def __post_init__(self):
        if self.name not in self._ALLOWED:
            raise ValueError(f"unknown environment family {self.name!r}")
        unknown = set(self.params) - self._ALLOWED[self.name]
        if unknown:
            raise ValueError(f"unknown parameter(s) for {self.name}: {sorted(unknown)}")
        p = self.params
        if "p_h" in p and not 0.0 < p["p_h"] < 1.0:
            raise ValueError("p_h must lie in (0, 1)")
        if "p_intended" in p and not 0.0 < p["p_intended"] <= 1.0:
            raise ValueError("p_intended must lie in (0, 1]")
        if "rho_random_action" in p and not 0.0 <= p["rho_random_action"] <= 1.0:
            raise ValueError("rho_random_action must lie in [0, 1]")

    def build(self) -> TabularMDP:
        if self.name == "gamblers":
            return gamblers(self.params.get("p_h", 0.6), self.gamma)
        if self.name == "frozenlake":
            return frozenlake(self.params.get("p_intended", 0.4), self.gamma, self.grid)
        return chain(self.gamma)

    @property
    def rollout_rho(self) -> float:
        return float(self.params.get("rho_random_action", 0.0))

    @property
    def goal_states(self) -> frozenset[int]:
        if self.name == "gamblers":
            return frozenset({GOAL_CAPITAL})
        if self.name == "frozenlake":
            return frozenset({"".join(self.grid).index("G")})
        return frozenset()

    def start_states(self) -> np.ndarray:
        """States a rollout starts from, drawn uniformly."""
        if self.name == "gamblers":
            return np.arange(1, GOAL_CAPITAL)
        if self.name == "frozenlake":
            return np.array(["".join(self.grid).index("S")])
        return np.array([0])

    def with_params(self, **params) -> EnvFamily:
        return replace(self, params={**self.params, **params})


def perturb(env: EnvFamily, which: str, value: float) -> EnvFamily:
    """Test variant of ``env`` with one parameter changed.

    For FrozenLake, setting ``rho_random_action`` also switches the model to
    the test slip setting ``p_intended = 0.2``.
    """
    allowed = EnvFamily._ALLOWED[env.name]
    if which not in allowed:
        raise ValueError(f"{env.name} has no parameter {which!r}; choose from {sorted(allowed)}")
    out = env.with_params(**{which: value})
    if env.name == "frozenlake" and which == "rho_random_action":
        out = out.with_params(p_intended=FROZENLAKE_TEST_P_INTENDED)
    return out


NOMINAL = {
    "gamblers": lambda gamma: EnvFamily("gamblers", gamma, {"p_h": 0.6}),
    "frozenlake": lambda gamma: EnvFamily("frozenlake", gamma, {"p_intended": 0.4}),
    "chain": lambda gamma: EnvFamily("chain", gamma),
}


def nominal_family(name: str, gamma: float) -> EnvFamily:
    if name not in NOMINAL:
        raise ValueError(f"unknown environment family {name!r}")
    return NOMINAL[name](gamma)
