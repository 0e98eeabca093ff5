"""Acceptance suite: one check per criterion, each reporting PASS or FAIL.

Run under pytest (a summary line per criterion is printed at the end) or
directly with ``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import functools
import hashlib
import io
import json
import math
import sys
import time
from contextlib import redirect_stdout
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from _fuzz import random_case, random_mdp_arrays  # noqa: E402
from rmdp.ambiguity import chi2_rows, finite_rows, kl_rows, sigma_kl_zero_radius, tv_rows  # noqa: E402
from rmdp.bounds import ComplexityInputs, gap_lower_bound, gap_values, k0, n_chi2, n_kl, n_tv  # noqa: E402
from rmdp.cli import run  # noqa: E402
from rmdp.core import AmbiguitySetSpec  # noqa: E402
from rmdp.envs import nominal_family  # noqa: E402
from rmdp.generative import estimate  # noqa: E402
from rmdp.harness import (  # noqa: E402
    convergence_vs_iterations,
    convergence_vs_samples,
    iterations_for,
    optimal_robust_values,
    robustness_eval,
    train_policies,
)
from rmdp.oracle import sigma_grid_oracle  # noqa: E402
from rmdp.robustdp import (  # noqa: E402
    bellman_apply,
    greedy_policy,
    revi,
    robust_policy_evaluation,
    robust_value_iteration,
)

RESULTS: dict[int, tuple[bool, str]] = {}
FIXTURES = json.loads((Path(__file__).parent / "fixtures" / "bounds_fixtures.json").read_text())


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = (bool(ok), detail)


def summary_lines() -> list[str]:
    return [f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}" for n, (ok, detail) in sorted(RESULTS.items())]


def fast_value(kind, q, v, c, models=None) -> float:
    P = q[None, :]
    if kind == "tv":
        return float(tv_rows(P, v, c)[0])
    if kind == "chi2":
        return float(chi2_rows(P, v, c)[0])
    if kind == "kl":
        return sigma_kl_zero_radius(q, v).value if c == 0 else float(kl_rows(P, v, c)[0])
    return float(finite_rows(np.array(models), v)[0])


# -- 1: robustness gap -----------------------------------------------------------

def check_gap():
    t0 = time.perf_counter()
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = run(["gap", "--gamma", "0.9"])
    out = buf.getvalue()
    g = 0.9
    exact = g / (99 * (1 - g * g))
    gv = gap_values(g)
    problems = []
    if code != 0:
        problems.append(f"exit {code}")
    for needle in ("V*(0) = 0", "gap = 0.0478468899"):
        if needle not in out:
            problems.append(f"missing {needle!r}")
    if gv.v_robust_opt != 0 or abs(gv.v_nonrobust_worst + exact) > 1e-9 or abs(gv.gap - exact) > 1e-9:
        problems.append("values at 0.9")
    if gv.max_discrepancy > 1e-9:
        problems.append(f"numeric path off by {gv.max_discrepancy:.2e}")
    rng = np.random.default_rng(2024)
    worst_margin = math.inf
    for gamma in rng.uniform(0.02, 0.999, 50):
        gr = gap_values(float(gamma))
        worst_margin = min(worst_margin, gr.gap - gap_lower_bound(float(gamma)))
        if gr.max_discrepancy > 1e-9:
            problems.append(f"numeric path at {gamma:.4f}")
    if worst_margin < 0:
        problems.append("lower bound violated")
    dt = time.perf_counter() - t0
    if dt >= 1.0:
        problems.append(f"runtime {dt:.2f}s")
    return not problems, f"gap(0.9)={gv.gap:.12g} min margin={worst_margin:.3g} {dt:.2f}s {' '.join(problems)}"


# -- 2: oracle equivalence -------------------------------------------------------

def check_oracle():
    t0 = time.perf_counter()
    h = 1e-4
    rng = np.random.default_rng(11)
    worst, bad = 0.0, 0
    for kind in ("tv", "chi2", "kl"):
        for _ in range(200):
            q, v, c, _ = random_case(rng, kind, n=3)
            err = abs(fast_value(kind, q, v, c) - sigma_grid_oracle(q, v, c, kind, h))
            tol = np.abs(v).max() * 3 * h + 5 * h
            worst = max(worst, err / tol)
            bad += err > tol
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 120
    return ok, f"600 instances, {bad} violations, max err/tol={worst:.3f}, {dt:.1f}s"


# -- 3: property suite -----------------------------------------------------------

def property_violations(kind, rng):
    """Each of the seven properties on 1000 fresh cases; one base value per case."""
    bad = dict.fromkeys(("lipschitz", "translation", "homogeneity", "monotone", "sandwich",
                         "radius", "radius_zero"), 0)
    for _ in range(1000):
        q, v, c, models = random_case(rng, kind)
        s = fast_value(kind, q, v, c, models)
        scale = np.abs(v).max()

        v2 = v + rng.normal(scale=rng.uniform(0.01, 3), size=v.size)
        bad["lipschitz"] += abs(s - fast_value(kind, q, v2, c, models)) > np.abs(v - v2).max() + 1e-9

        t = rng.uniform(-50, 50)
        bad["translation"] += abs(fast_value(kind, q, v + t, c, models) - (s + t)) > 1e-8

        alpha = rng.uniform(0, 20)
        bad["homogeneity"] += abs(fast_value(kind, q, alpha * v, c, models) - alpha * s) > 1e-8 * (1 + alpha * scale)

        up = v + rng.exponential(size=v.size) * (rng.random(v.size) < 0.5)
        bad["monotone"] += s > fast_value(kind, q, up, c, models) + 1e-10

        bad["sandwich"] += not (v.min() - 1e-10 <= s <= q @ v + 1e-10)

        if kind == "finite":
            # more models can only lower the value
            bigger = models + [random_case(rng, "tv", n=q.size)[0]]
            bad["radius"] += fast_value(kind, q, v, c, bigger) > s + 1e-10
            zero = fast_value(kind, q, v, 0.0, [q])
        else:
            c2 = c * rng.uniform(1, 3)
            bad["radius"] += s < fast_value(kind, q, v, c2) - 1e-10
            zero = fast_value(kind, q, v, 0.0)
        bad["radius_zero"] += abs(zero - q @ v) > 1e-15 * (1 + scale)
    return bad


def check_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    totals = {}
    for kind in ("tv", "chi2", "kl", "finite"):
        for name, n in property_violations(kind, rng).items():
            totals[f"{kind}/{name}"] = n
    dt = time.perf_counter() - t0
    failing = {k: n for k, n in totals.items() if n}
    ok = not failing and dt < 60
    return ok, f"7 properties x 1000 cases x 4 kinds, violations={failing or 0}, {dt:.1f}s"


# -- 4: contraction and convergence ----------------------------------------------

def random_spec(kind, mdp, rng):
    if kind == "none":
        return AmbiguitySetSpec.none()
    if kind == "tv":
        return AmbiguitySetSpec.tv(rng.uniform(0, 1))
    if kind == "chi2":
        return AmbiguitySetSpec.chi2(rng.uniform(0, 2))
    if kind == "kl":
        return AmbiguitySetSpec.kl(rng.uniform(0.05, 1))
    extra = []
    for _ in range(2):
        K = mdp.kernel * rng.uniform(0.2, 1.0, size=mdp.kernel.shape) + 0.1 * rng.random(mdp.kernel.shape)
        extra.append(K / K.sum(axis=1, keepdims=True))
    return AmbiguitySetSpec.finite([mdp.kernel, *extra])


def contraction_case(mdp, spec, rng, k_max=50):
    """Largest slack (positive = violation) in each of the three inequalities."""
    g = mdp.gamma
    v1 = rng.normal(scale=3, size=mdp.num_states)
    v2 = rng.normal(scale=3, size=mdp.num_states)
    contraction = (np.abs(bellman_apply(mdp, spec, v1)[0] - bellman_apply(mdp, spec, v2)[0]).max()
                   - g * np.abs(v1 - v2).max() - 1e-9)

    star = robust_value_iteration(mdp, spec, tol=1e-10)
    rep = revi(mdp, spec, k_max, keep_values=True)
    vs = [np.zeros(mdp.num_states), *rep.value_history]
    revi_slack = -math.inf
    amp_slack = -math.inf
    cache = {}
    for k in range(1, k_max + 1):
        v_k, q_k = bellman_apply(mdp, spec, vs[k - 1])
        revi_slack = max(revi_slack, np.abs(q_k - star.q).max() - g**k / (1 - g) - 1e-6)
        pol = tuple(greedy_policy(mdp, q_k))
        if pol not in cache:
            cache[pol] = robust_policy_evaluation(mdp, spec, np.array(pol), tol=1e-10)
        gap = np.abs(star.values - cache[pol]).max()
        amp_slack = max(amp_slack, gap - 2 * g / (1 - g) * np.abs(v_k - star.values).max() - 1e-6)
    return contraction, revi_slack, amp_slack


def check_contraction():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst = np.full(3, -math.inf)
    fails = 0
    for _ in range(100):
        mdp = random_mdp_arrays(rng)
        for kind in ("none", "tv", "chi2", "kl", "finite"):
            slack = np.array(contraction_case(mdp, random_spec(kind, mdp, rng), rng))
            worst = np.maximum(worst, slack)
            fails += bool(np.any(slack > 0))
    dt = time.perf_counter() - t0
    return fails == 0, (f"100 MDPs x 5 kinds, {fails} failing; max slack contraction={worst[0]:.2e} "
                        f"revi={worst[1]:.2e} greedy={worst[2]:.2e}, {dt:.1f}s")


# -- 5: calculators --------------------------------------------------------------

def check_calculators():
    t0 = time.perf_counter()
    worst = 0.0
    ineq_ok = True
    for row in FIXTURES:
        inp = ComplexityInputs(row["gamma"], row["eps"], row["delta"], row["states"], row["actions"],
                               row["radius"], row["lambda_kl"])
        got = {"k0": k0(inp.gamma, inp.eps), "n_tv": n_tv(inp), "n_chi2": n_chi2(inp), "n_kl": n_kl(inp)}
        for name, val in got.items():
            ref = float(row[name])
            worst = max(worst, abs(val - ref) / abs(ref))
        g, e = inp.gamma, inp.eps
        ineq_ok &= g ** got["k0"] <= e * (1 - g) ** 2 / (8 * g) * (1 + 1e-12)
    dt = time.perf_counter() - t0
    ok = worst <= 5e-11 and ineq_ok and dt < 1.0
    return ok, f"{len(FIXTURES)} points, max rel err={worst:.2e}, k0 inequality {'holds' if ineq_ok else 'FAILS'}, {dt:.3f}s"


# -- 6: experiments --------------------------------------------------------------

GAMBLERS_GAMMA = 0.99
FROZENLAKE_GAMMA = 0.9
SAMPLES_K = 100
SEED = 0

# first-run values, frozen
GOLDEN_MEDIANS = (0.07128273610160407, 0.03511987626423494, 0.012343248676748506, 0.009806272514376074)
GOLDEN_GAMBLERS_WINS = ((0.428, 0.498), (0.349, 0.489))
GOLDEN_FROZENLAKE_WINS = ((0.0, 0.0, 0.0), (0.085, 0.043, 0.03))


@functools.lru_cache(maxsize=None)
def samples_medians():
    env = nominal_family("gamblers", GAMBLERS_GAMMA)
    recs = convergence_vs_samples(env, AmbiguitySetSpec.tv(0.4), [100, 500, 3000, 5000], list(range(10)), SAMPLES_K)
    by_n = {}
    for r in recs:
        by_n.setdefault(r.x, []).append(r.metric_value)
    return tuple(float(np.median(by_n[n])) for n in (100, 500, 3000, 5000))


def geometric_check(name, gamma, spec, n=5000, k_max=100):
    env = nominal_family(name, gamma)
    e = np.array([r.metric_value for r in convergence_vs_iterations(env, spec, n, SEED, k_max)])
    v_star = optimal_robust_values(env, spec)
    v_hat = robust_value_iteration(estimate(env.build(), n, SEED), spec, tol=1e-10).values
    floor = float(np.abs(v_hat - v_star).max())
    # pairs still dominated by the optimization error
    idx = [k for k in range(len(e) - 5) if e[k] > 0 and e[k] >= 10 * floor]
    ratios = [e[k + 5] / e[k] for k in idx]
    bad = [k + 1 for k, r in zip(idx, ratios) if r > gamma**5 + 0.05]
    return idx and not bad, f"{name}: {len(idx)} pairs above floor {floor:.3g}, max ratio {max(ratios, default=math.nan):.3f}"


@functools.lru_cache(maxsize=None)
def robustness_wins(name):
    if name == "gamblers":
        env, spec, which, sweep = nominal_family("gamblers", GAMBLERS_GAMMA), AmbiguitySetSpec.tv(0.4), "p_h", (0.45, 0.5)
    else:
        env = nominal_family("frozenlake", FROZENLAKE_GAMMA)
        spec, which, sweep = AmbiguitySetSpec.tv(0.7), "rho_random_action", (0.2, 0.3, 0.4)
    pols = train_policies(env, spec, 3000, SEED, iterations_for(env.gamma))
    recs = robustness_eval(pols, env, which, sweep, 1000, 1000, SEED)
    robust = tuple(r.metric_value for r in recs[: len(sweep)])
    baseline = tuple(r.metric_value for r in recs[len(sweep):])
    return robust, baseline


def check_experiments():
    t0 = time.perf_counter()
    parts, ok = [], True

    med = samples_medians()
    inversions = sum(b > a for a, b in zip(med, med[1:]))
    ok &= inversions <= 1
    parts.append(f"(a) medians {[round(m, 4) for m in med]} inversions={inversions}")

    good, text = geometric_check("gamblers", GAMBLERS_GAMMA, AmbiguitySetSpec.tv(0.4))
    ok &= bool(good)
    parts.append(f"(b) {text}")

    rob, base = robustness_wins("gamblers")
    good = all(r > b for r, b in zip(rob, base))
    ok &= good
    parts.append(f"(c) gamblers robust {rob} vs nominal {base} {'ok' if good else 'NOT strictly higher'}")
    rob_f, base_f = robustness_wins("frozenlake")
    good = all(r >= b for r, b in zip(rob_f, base_f))
    ok &= good
    parts.append(f"(c) frozenlake robust {rob_f} vs nominal {base_f} {'ok' if good else 'robust BELOW nominal'}")

    golden = [(GOLDEN_MEDIANS, med), (GOLDEN_GAMBLERS_WINS, (rob, base)), (GOLDEN_FROZENLAKE_WINS, (rob_f, base_f))]
    drift = [g is not None and not np.allclose(np.array(g, dtype=float), np.array(v, dtype=float), rtol=0, atol=1e-12)
             for g, v in golden]
    ok &= not any(drift)
    parts.append("golden " + ("drift" if any(drift) else "match"))
    dt = time.perf_counter() - t0
    ok &= dt < 600
    parts.append(f"{dt:.0f}s")
    return ok, "; ".join(parts)


# -- 7: determinism --------------------------------------------------------------

def cli_hash(args, out):
    with redirect_stdout(io.StringIO()):
        code = run(args + ["--out", str(out)])
    assert code == 0
    return hashlib.sha256(Path(out).read_bytes()).hexdigest()


def check_determinism(tmp):
    runs = {
        "gamblers samples": ["experiment", "gamblers", "--mode", "samples", "--set", "tv", "--radius", "0.4",
                             "--seed", "3", "--n-grid", "100,500", "--seeds", "3,4,5", "--iters", "40"],
        "frozenlake robustness": ["experiment", "frozenlake", "--mode", "robustness", "--set", "tv",
                                  "--radius", "0.7", "--seed", "3", "--trials", "200"],
        "chain iters": ["experiment", "chain", "--mode", "iters", "--set", "chi2", "--radius", "0.3",
                        "--seed", "3", "--k-max", "50"],
    }
    mismatched = []
    for name, args in runs.items():
        a = cli_hash(args + ["--workers", "1"], Path(tmp) / "a.csv")
        b = cli_hash(args + ["--workers", "8"], Path(tmp) / "b.csv")
        if a != b:
            mismatched.append(name)
    return not mismatched, f"{len(runs)} experiments hashed at workers=1 and 8, mismatched={mismatched or 'none'}"


# -- pytest entry points ---------------------------------------------------------

def _assert(n, result):
    ok, detail = result
    record(n, ok, detail)
    assert ok, detail


def test_criterion_1_robustness_gap():
    _assert(1, check_gap())


def test_criterion_2_oracle_equivalence():
    _assert(2, check_oracle())


def test_criterion_3_property_suite():
    _assert(3, check_properties())


def test_criterion_4_contraction_and_convergence():
    _assert(4, check_contraction())


def test_criterion_5_calculators():
    _assert(5, check_calculators())


@pytest.mark.slow
def test_criterion_6_experiments():
    _assert(6, check_experiments())


def test_criterion_7_determinism(tmp_path):
    _assert(7, check_determinism(tmp_path))


if __name__ == "__main__":
    import tempfile

    checks = [check_gap, check_oracle, check_properties, check_contraction, check_calculators, check_experiments]
    for n, fn in enumerate(checks, start=1):
        record(n, *fn())
        print(summary_lines()[-1], flush=True)
    with tempfile.TemporaryDirectory() as tmp:
        record(7, *check_determinism(tmp))
    print(summary_lines()[-1])
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
