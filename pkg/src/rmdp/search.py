"""Batched golden-section search for concave 1-D maximization."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
MAX_ITERS = 200
REL_WIDTH = 1e-12


def maximize_concave(
    f: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    max_iters: int = MAX_ITERS,
    rel_width: float = REL_WIDTH,
    endpoints: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Maximize elementwise-independent concave functions on ``[lo, hi]``.

    ``f`` maps an array of abscissae (same shape as ``lo``) to values; entry
    ``i`` of the result may depend only on entry ``i`` of the input. Every
    entry is bracketed independently and shrunk until its width is at most
    ``rel_width * (1 + initial width)`` or ``max_iters`` is reached. The
    returned argmax is the best of the final midpoint and, unless
    ``endpoints`` is false (``f`` undefined there), the two original
    endpoints, so maxima sitting on the boundary are found exactly.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    a, b = lo.copy(), hi.copy()
    stop = rel_width * (1.0 + (hi - lo))
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iters):
        if np.all(b - a <= stop):
            break
        left = fc >= fd  # keep [a, d]
        a = np.where(left, a, c)
        b = np.where(left, d, b)
        new_c = b - INV_PHI * (b - a)
        new_d = a + INV_PHI * (b - a)
        # reuse the surviving interior point
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        probe = np.where(left, c_next, d_next)
        fp = f(probe)
        fc_next = np.where(left, fp, fd)
        fd_next = np.where(left, fc, fp)
        c, d, fc, fd = c_next, d_next, fc_next, fd_next
    mid = 0.5 * (a + b)
    if not endpoints:
        return mid, f(mid)
    cands = np.stack([mid, lo, hi])
    vals = np.stack([f(mid), f(lo), f(hi)])
    vals = np.where(np.isnan(vals), -np.inf, vals)
    best = np.argmax(vals, axis=0)
    x = np.take_along_axis(cands, best[None], axis=0)[0]
    fx = np.take_along_axis(vals, best[None], axis=0)[0]
    return x, fx
