"""Worst-case expectations over (s,a)-rectangular ambiguity sets.

For a nominal row ``q`` and a value vector ``v`` every routine computes

    sigma(q, v) = inf { p . v : p in simplex, D(p, q) <= radius }

for D the total-variation distance, the chi-square divergence or the KL
divergence, or the minimum over an explicit list of rows. The ``*_rows``
functions work on a whole matrix of rows against one value vector, which is
what a Bellman sweep needs; the scalar functions wrap them and return a
:class:`SigmaResult` with the minimizing distribution.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import AmbiguitySetSpec, SetKind, validate_distribution
from .search import maximize_concave


@dataclass(frozen=True)
class SigmaResult:
    value: float
    worst_case: np.ndarray
    dual_info: dict = field(default_factory=dict)


def _check(P: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or P.shape[1] != v.size:
        raise ValueError(f"dimension mismatch: rows of length {P.shape[1]} against a value vector of shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("value vector must be finite")
    return P, v


# -- divergences --------------------------------------------------------------

def tv_distance(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


def chi2_divergence(p, q) -> float:
    p, q = np.asarray(p, float), np.asarray(q, float)
    supp = q > 0
    if np.any(p[~supp] > 0):
        return float("inf")
    return float(np.sum((p[supp] - q[supp]) ** 2 / q[supp]))


def kl_divergence(p, q) -> float:
    p, q = np.asarray(p, float), np.asarray(q, float)
    if np.any((q <= 0) & (p > 0)):
        return float("inf")
    m = p > 0
    return float(np.sum(p[m] * np.log(p[m] / q[m])))


# -- total variation ----------------------------------------------------------

def tv_rows(P, v, radius: float, worst: bool = False):
    """Greedy mass transport: move up to ``radius`` mass from the highest
    values onto the lowest-index minimizer of ``v``."""
    P, v = _check(P, v)
    if radius < 0:
        raise ValueError("radius must be non-negative")
    j = int(np.argmin(v))
    budget = np.minimum(radius, 1.0 - P[:, j])
    budget = np.maximum(budget, 0.0)
    order = np.argsort(-v, kind="stable")
    donors = order[order != j]
    Pd = P[:, donors]
    ahead = np.cumsum(Pd, axis=1) - Pd
    removed = np.clip(budget[:, None] - ahead, 0.0, Pd)
    values = P @ v - removed @ v[donors] + budget * v[j]
    # the whole ball reaches the point mass on the minimizer
    full = radius >= 1.0 - P[:, j]
    values[full] = v[j]
    if radius == 0:
        values = P @ v
    if not worst:
        return values
    W = P.copy()
    W[:, donors] -= removed
    W[:, j] += budget
    W[full] = 0.0
    W[full, j] = 1.0
    return values, W, budget


def sigma_tv(center, v, radius: float) -> SigmaResult:
    q = validate_distribution(center)
    vals, W, moved = tv_rows(q[None], v, radius, worst=True)
    return SigmaResult(float(vals[0]), W[0], {"mass_moved": float(moved[0])})


# -- chi-square ---------------------------------------------------------------

def _argmin_support_mass(P: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rows of ``P`` restricted to (and renormalized on) their support
    minimizers of ``v``."""
    vs = np.where(P > 0, v[None, :], np.inf)
    mins = vs.min(axis=1, keepdims=True)
    W = np.where(vs == mins, P, 0.0)
    return W / W.sum(axis=1, keepdims=True)


def chi2_rows(P, v, radius: float, worst: bool = False):
    """Threshold form of the variance-penalized dual.

    The dual maximizes ``E[w] - sqrt(radius * Var(w))`` over ``w = min(v, t)``.
    Between consecutive distinct values of ``v`` this is concave in ``t``, so
    each segment is searched separately and the best segment wins.
    """
    P, v = _check(P, v)
    if radius < 0:
        raise ValueError("radius must be non-negative")
    rows = P.shape[0]
    if radius == 0:
        vals = P @ v
        return (vals, P.copy(), np.full(rows, np.max(v))) if worst else vals
    vmin = float(v.min())
    u = v - vmin
    order = np.argsort(u, kind="stable")
    us = u[order]
    Ps = P[:, order]
    knots = np.unique(us)
    if knots.size == 1:
        vals = P @ v
        return (vals, P.copy(), np.full(rows, vmin)) if worst else vals

    cnt = np.searchsorted(us, knots[:-1], side="right")
    zero = np.zeros((rows, 1))
    cumP = np.hstack([zero, np.cumsum(Ps, axis=1)])
    cumA = np.hstack([zero, np.cumsum(Ps * us, axis=1)])
    cumC = np.hstack([zero, np.cumsum(Ps * us * us, axis=1)])
    sufP = np.hstack([np.cumsum(Ps[:, ::-1], axis=1)[:, ::-1], zero])
    L = cumP[:, cnt]
    A = cumA[:, cnt]
    C = cumC[:, cnt]
    B = sufP[:, cnt]
    safe_L = np.where(L > 0, L, 1.0)
    mean_low = np.where(L > 0, A / safe_L, 0.0)
    within = np.where(L > 0, np.maximum(C - A * A / safe_L, 0.0), 0.0)

    def f(t):
        var = within + L * B * (t - mean_low) ** 2
        return A + B * t - np.sqrt(radius * var)

    lo = np.broadcast_to(knots[:-1], L.shape)
    hi = np.broadcast_to(knots[1:], L.shape)
    # segments below a row's support are increasing and those above it are
    # flat, so only segments with mass on both sides need a search
    ft = np.maximum(f(lo), f(hi))
    inner = (L > 0) & (B > 0)
    if np.any(inner):
        Li, Bi, Ai, Wi, Mi = L[inner], B[inner], A[inner], within[inner], mean_low[inner]

        def f_inner(t):
            return Ai + Bi * t - np.sqrt(radius * (Wi + Li * Bi * (t - Mi) ** 2))

        _, fi = maximize_concave(f_inner, lo[inner], hi[inner])
        ft[inner] = np.maximum(ft[inner], fi)
    best = np.argmax(ft, axis=1)
    idx = np.arange(rows)
    vals = vmin + ft[idx, best]
    if not worst:
        return vals
    # the searched threshold is only accurate to ~sqrt(eps); snap it to the
    # stationary point L(t-m)/sd = 1/sqrt(radius) of the winning segment
    Lb, Bb, Wb, mb = L[idx, best], B[idx, best], within[idx, best], mean_low[idx, best]
    denom = Lb * (radius * Lb - Bb)
    with np.errstate(divide="ignore", invalid="ignore"):
        tsnap = mb + np.sqrt(np.where(denom > 0, Wb / denom, np.inf))
    tsnap = np.clip(np.where(np.isfinite(tsnap), tsnap, hi[idx, best]), lo[idx, best], hi[idx, best])
    fsnap = f(np.broadcast_to(tsnap[:, None], L.shape))[idx, best]
    tstar = tsnap
    vals = np.maximum(vals, vmin + fsnap)
    w = np.minimum(u[None, :], tstar[:, None])
    Ew = np.sum(P * w, axis=1, keepdims=True)
    var = np.sum(P * (w - Ew) ** 2, axis=1)
    span = float(u.max())
    flat = var <= (1e-12 * (1.0 + span)) ** 2
    sd = np.sqrt(np.where(flat, 1.0, var))[:, None]
    W = P * (1.0 - np.sqrt(radius) * (w - Ew) / sd)
    W = np.maximum(W, 0.0)
    W /= W.sum(axis=1, keepdims=True)
    if np.any(flat):
        W[flat] = _argmin_support_mass(P[flat], v)
    return vals, W, vmin + tstar


def sigma_chi2(center, v, radius: float) -> SigmaResult:
    q = validate_distribution(center)
    vals, W, thr = chi2_rows(q[None], v, radius, worst=True)
    return SigmaResult(float(vals[0]), W[0], {"threshold": float(thr[0])})


# -- Kullback-Leibler ---------------------------------------------------------

def kl_rows(P, v, radius: float, worst: bool = False):
    """One-dimensional dual over the temperature ``lam``:

        max_{lam > 0}  -radius*lam - lam*log E_q[exp(-v/lam)]

    evaluated on the support of each row, with ``v`` shifted to a zero
    support minimum. The search interval is ``(0, span/radius]``; the
    ``lam -> 0`` limit (the support minimum) is compared separately.
    """
    P, v = _check(P, v)
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if radius == 0:
        vals = P @ v
        return (vals, P.copy(), np.zeros(P.shape[0])) if worst else vals
    supp = P > 0
    vmin = np.where(supp, v[None, :], np.inf).min(axis=1)
    U = np.where(supp, v[None, :] - vmin[:, None], 0.0)
    span = U.max(axis=1)
    active = span > 0
    with np.errstate(divide="ignore"):
        logP = np.where(supp, np.log(np.where(supp, P, 1.0)), -np.inf)
    Ua, logPa = U[active], logP[active]

    def g(lam):
        z = logPa - Ua / lam[:, None]
        zmax = z.max(axis=1)
        lse = zmax + np.log(np.exp(z - zmax[:, None]).sum(axis=1))
        return -radius * lam - lam * lse

    lam = np.zeros(P.shape[0])
    gain = np.zeros(P.shape[0])
    if np.any(active):
        hi = span[active] / radius
        lam_a, g_a = maximize_concave(g, np.zeros_like(hi), hi, endpoints=False)
        pos = g_a > 0
        lam[active] = np.where(pos, lam_a, 0.0)
        gain[active] = np.where(pos, g_a, 0.0)
    vals = vmin + gain
    if not worst:
        return vals
    W = _argmin_support_mass(P, v)
    tilt = lam > 0
    if np.any(tilt):
        lam_t = _kl_stationary(logP[tilt], U[tilt], span[tilt] / radius, radius)
        z = logP[tilt] - U[tilt] / lam_t[:, None]
        z = np.exp(z - z.max(axis=1, keepdims=True))
        W[tilt] = z / z.sum(axis=1, keepdims=True)
        lam[tilt] = lam_t
    return vals, W, lam


def _kl_stationary(logP, U, hi, radius, iters=200):
    """Bisect for KL(tilted row, row) = radius, the dual's stationarity
    condition; the tilt's divergence decreases as the temperature grows."""
    lo = np.zeros_like(hi)
    hi = hi.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        z = logP - U / mid[:, None]
        zmax = z.max(axis=1, keepdims=True)
        e = np.exp(z - zmax)
        Z = e.sum(axis=1)
        p = e / Z[:, None]
        # KL(p || q) = E_p[-U/lam] - log E_q[exp(-U/lam)]
        kl = np.sum(np.where(p > 0, p * (-U / mid[:, None]), 0.0), axis=1) - (zmax[:, 0] + np.log(Z))
        too_far = kl > radius
        lo = np.where(too_far, mid, lo)
        hi = np.where(too_far, hi, mid)
        if np.all(hi - lo <= 1e-15 * hi):
            break
    return hi


def sigma_kl(center, v, radius: float) -> SigmaResult:
    if radius <= 0:
        raise ValueError("KL radius must be positive; use sigma_kl_zero_radius for radius 0")
    q = validate_distribution(center)
    vals, W, lam = kl_rows(q[None], v, radius, worst=True)
    return SigmaResult(float(vals[0]), W[0], {"lambda": float(lam[0])})


def sigma_kl_zero_radius(center, v) -> SigmaResult:
    q = validate_distribution(center)
    q, v = _check(q, v)
    return SigmaResult(float(q[0] @ v), q[0].copy(), {"lambda": 0.0})


# -- finite model list --------------------------------------------------------

def finite_rows(models: np.ndarray, v, worst: bool = False):
    """``models`` has shape (n_models, rows, n); min over the first axis."""
    models = np.asarray(models, dtype=float)
    if models.ndim == 2:
        models = models[:, None, :]
    if models.shape[0] == 0:
        raise ValueError("empty model list")
    if models.shape[-1] != np.asarray(v).size:
        raise ValueError("dimension mismatch between models and value vector")
    v = np.asarray(v, dtype=float)
    vals_all = models @ v
    k = np.argmin(vals_all, axis=0)
    vals = vals_all.min(axis=0)
    if not worst:
        return vals
    W = models[k, np.arange(models.shape[1])]
    return vals, W, k


def sigma_finite_set(models: Sequence[Sequence[float]], v) -> SigmaResult:
    if len(models) == 0:
        raise ValueError("empty model list")
    M = np.array([validate_distribution(m) for m in models])
    vals, W, k = finite_rows(M[:, None, :], v, worst=True)
    return SigmaResult(float(vals[0]), W[0], {"model": int(k[0])})


# -- dispatch -----------------------------------------------------------------

def sigma_rows(P, v, spec: AmbiguitySetSpec, models: np.ndarray | None = None) -> np.ndarray:
    """Worst-case expectation of ``v`` for every row of ``P`` under ``spec``.

    For finite sets ``models`` (shape (n_models, rows, n)) replaces ``P``; it
    defaults to ``spec.models`` stacked.
    """
    kind = spec.kind
    if kind is SetKind.NONE:
        return tv_rows(P, v, 0.0)
    if kind is SetKind.TV:
        return tv_rows(P, v, spec.radius)
    if kind is SetKind.CHI2:
        return chi2_rows(P, v, spec.radius)
    if kind is SetKind.KL:
        return kl_rows(P, v, spec.radius)
    if kind is SetKind.FINITE:
        if models is None:
            models = np.stack(spec.models)
        return finite_rows(models, v)
    raise ValueError(f"unknown set kind {kind!r}")


def sigma(center, v, spec: AmbiguitySetSpec) -> SigmaResult:
    """Scalar dispatcher matching :func:`sigma_rows`."""
    kind = spec.kind
    if kind is SetKind.NONE:
        return sigma_tv(center, v, 0.0)
    if kind is SetKind.TV:
        return sigma_tv(center, v, spec.radius)
    if kind is SetKind.CHI2:
        return sigma_chi2(center, v, spec.radius)
    if kind is SetKind.KL:
        if spec.radius == 0:
            return sigma_kl_zero_radius(center, v)
        return sigma_kl(center, v, spec.radius)
    if kind is SetKind.FINITE:
        return sigma_finite_set(list(spec.models), v)
    raise ValueError(f"unknown set kind {kind!r}")
