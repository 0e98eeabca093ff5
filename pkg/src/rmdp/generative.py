"""Generative-model sampling and the maximum-likelihood kernel estimate."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import TabularMDP
from .rng import inverse_cdf, mix, uniforms


@dataclass(frozen=True, eq=False)
class TransitionCounts:
    """Next-state counts per (s,a) pair, flat pair layout; rows sum to ``n``."""

    counts: np.ndarray
    n: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2:
            raise ValueError("counts must be a (pairs, states) matrix")
        if np.any(counts < 0) or np.any(counts.sum(axis=1) != self.n):
            raise ValueError(f"every count row must be non-negative and sum to n={self.n}")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    def to_dict(self, mdp: TabularMDP) -> dict:
        return {"n": self.n, "counts": [self.counts[mdp.offsets[s]:mdp.offsets[s + 1]].tolist()
                                        for s in range(mdp.num_states)]}

    @classmethod
    def from_dict(cls, data: dict) -> TransitionCounts:
        rows = [row for per_state in data["counts"] for row in per_state]
        return cls(np.array(rows, dtype=np.int64), int(data["n"]))

    def save(self, mdp: TabularMDP, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(mdp)) + "\n", encoding="utf-8")


def pair_stream_key(seed: int, s: int, a: int) -> int:
    return mix(seed, s, a)


def sample_counts(mdp: TabularMDP, n: int, seed: int) -> TransitionCounts:
    """Draw ``n`` next states for every admissible (s,a) from the nominal kernel.

    Pair (s, a) (dense action index) uses its own stream
    ``mix(seed, s, a)``; draw ``i`` is mapped through the row's cumulative
    sum by :func:`rmdp.rng.inverse_cdf`. Results depend only on
    ``(mdp, n, seed)``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    counts = np.zeros(mdp.kernel.shape, dtype=np.int64)
    draws = np.arange(n, dtype=np.uint64)
    for i in range(mdp.num_pairs):
        s = int(mdp.pair_state[i])
        a = i - int(mdp.offsets[s])
        row = mdp.kernel[i]
        nz = np.flatnonzero(row)
        if nz.size == 1:
            counts[i, nz[0]] = n
            continue
        u = uniforms(pair_stream_key(seed, s, a), draws)
        nxt = inverse_cdf(np.cumsum(row), row, u)
        counts[i] = np.bincount(nxt, minlength=mdp.num_states)
    return TransitionCounts(counts, n)


def mle_model(mdp: TabularMDP, counts: TransitionCounts) -> TabularMDP:
    """Copy of ``mdp`` whose kernel rows are the empirical frequencies."""
    if counts.counts.shape != mdp.kernel.shape:
        raise ValueError(f"counts shape {counts.counts.shape} does not match kernel shape {mdp.kernel.shape}")
    return mdp.with_kernel(counts.counts / counts.n)


def estimate(mdp: TabularMDP, n: int, seed: int) -> TabularMDP:
    return mle_model(mdp, sample_counts(mdp, n, seed))
