"""Counter-based random streams built on the splitmix64 finalizer.

Everything here is specified bit-exactly so results can be reproduced in
any language:

* ``splitmix64(x) = fmix(x + 0x9E3779B97F4A7C15)`` where ``fmix`` is

      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
      z = (z ^ (z >> 27)) * 0x94D049BB133111EB
      z = z ^ (z >> 31)

  with all arithmetic modulo 2**64.
* ``mix(w0, w1, ..., wk) = splitmix64(... splitmix64(splitmix64(w0) ^ w1) ... ^ wk)``
  derives a stream key from a seed and any number of indices (each word
  reduced modulo 2**64 first, so negative seeds wrap).
* Draw ``i`` (``i = 0, 1, ...``) of the stream with key ``k`` is
  ``fmix(k + (i + 1) * 0x9E3779B97F4A7C15) >> 11``, scaled by ``2**-53`` to
  a double in ``[0, 1)``.
"""
from __future__ import annotations

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def _fmix_int(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & MASK
    z = ((z ^ (z >> 27)) * _M2) & MASK
    return z ^ (z >> 31)


def splitmix64(x: int) -> int:
    return _fmix_int((x + GOLDEN) & MASK)


def mix(*words: int) -> int:
    if not words:
        raise ValueError("mix needs at least one word")
    h = splitmix64(int(words[0]) & MASK)
    for w in words[1:]:
        h = splitmix64(h ^ (int(w) & MASK))
    return h


def _fmix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def raw64(key: int, counters) -> np.ndarray:
    counters = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(key & MASK) + (counters + np.uint64(1)) * np.uint64(GOLDEN)
        return _fmix_array(z)


def uniforms(key: int, counters) -> np.ndarray:
    """Doubles in [0, 1) for the given draw indices of stream ``key``."""
    return (raw64(key, counters) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def uniforms_batch(keys, counters) -> np.ndarray:
    """``uniforms`` for many streams at once: shape ``(len(keys), len(counters))``."""
    keys = np.asarray(keys, dtype=np.uint64)[:, None]
    counters = np.asarray(counters, dtype=np.uint64)[None, :]
    with np.errstate(over="ignore"):
        z = keys + (counters + np.uint64(1)) * np.uint64(GOLDEN)
        return (_fmix_array(z) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def inverse_cdf(cdf: np.ndarray, probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Smallest ``j`` with ``u < cdf[j]``; draws beyond the rounded total go
    to the last index with positive probability."""
    idx = np.searchsorted(cdf, u, side="right")
    last = int(np.flatnonzero(probs > 0)[-1])
    return np.minimum(idx, last)
