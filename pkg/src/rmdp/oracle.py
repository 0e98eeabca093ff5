"""Brute-force reference for worst-case expectations on small supports.

Enumerates every point of the probability simplex on a lattice of step
``h`` and keeps the minimum of ``p . v`` over lattice points whose
divergence to the center is at most ``radius + h``. It shares no code with
:mod:`rmdp.ambiguity` and is meant only for cross-checking it.
"""
from __future__ import annotations

import numba
import numpy as np

_KIND_CODES = {"tv": 0, "chi2": 1, "kl": 2}
MAX_DIM = 4


def _tables(kind: int, q: np.ndarray, v: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate divergence terms and objective terms for counts 0..m."""
    p = np.arange(m + 1) / m
    div = np.empty((q.size, m + 1))
    obj = np.empty((q.size, m + 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        for i, (qi, vi) in enumerate(zip(q, v)):
            obj[i] = p * vi
            if kind == 0:
                div[i] = 0.5 * np.abs(p - qi)
            elif kind == 1:
                div[i] = (p - qi) ** 2 / qi if qi > 0 else np.where(p > 0, np.inf, 0.0)
            elif qi > 0:
                div[i] = np.where(p > 0, p * (np.log(p) - np.log(qi)), 0.0)
            else:
                div[i] = np.where(p > 0, np.inf, 0.0)
    return div, obj


@numba.njit(cache=True)
def _grid_min(div, obj, limit, m):
    n = div.shape[0]
    best = np.inf
    if n == 1:
        if div[0, m] <= limit:
            best = obj[0, m]
    elif n == 2:
        for i0 in range(m + 1):
            i1 = m - i0
            if div[0, i0] + div[1, i1] <= limit:
                val = obj[0, i0] + obj[1, i1]
                if val < best:
                    best = val
    elif n == 3:
        for i0 in range(m + 1):
            d0 = div[0, i0]
            o0 = obj[0, i0]
            for i1 in range(m - i0 + 1):
                i2 = m - i0 - i1
                if d0 + div[1, i1] + div[2, i2] <= limit:
                    val = o0 + obj[1, i1] + obj[2, i2]
                    if val < best:
                        best = val
    else:
        for i0 in range(m + 1):
            for i1 in range(m - i0 + 1):
                d01 = div[0, i0] + div[1, i1]
                o01 = obj[0, i0] + obj[1, i1]
                for i2 in range(m - i0 - i1 + 1):
                    i3 = m - i0 - i1 - i2
                    if d01 + div[2, i2] + div[3, i3] <= limit:
                        val = o01 + obj[2, i2] + obj[3, i3]
                        if val < best:
                            best = val
    return best


def sigma_grid_oracle(center, v, radius: float, kind: str, resolution: float) -> float:
    """Exhaustive lattice minimum of ``p . v`` over the divergence ball.

    ``kind`` is one of ``"tv"``, ``"chi2"``, ``"kl"``. ``1/resolution`` is
    rounded to the nearest integer lattice size. The lattice error is at most
    about ``max|v| * n * h`` plus the effect of the ``h`` slack added to the
    radius.
    """
    q = np.asarray(center, dtype=float)
    v = np.asarray(v, dtype=float)
    if q.ndim != 1 or q.shape != v.shape:
        raise ValueError("center and v must be 1-D vectors of equal length")
    if q.size > MAX_DIM:
        raise ValueError(f"grid oracle supports at most {MAX_DIM} states, got {q.size}")
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    kind = str(getattr(kind, "value", kind)).lower()
    if kind not in _KIND_CODES:
        raise ValueError(f"grid oracle kind must be one of {sorted(_KIND_CODES)}, got {kind!r}")
    m = max(1, int(round(1.0 / resolution)))
    div, obj = _tables(_KIND_CODES[kind], q, v, m)
    return float(_grid_min(div, obj, float(radius) + 1.0 / m, m))
