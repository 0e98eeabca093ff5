"""Command-line entry point: ``rmdp {solve,revi,bounds,gap,experiment}``.

Exit status is 0 on success, 2 on usage errors and 1 when the input fails
validation or a computation raises.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import bounds, harness
from .core import AmbiguitySetSpec, MDPFormatError, MDPValidationError, SetKind, load_mdp
from .envs import EnvFamily, load_map, nominal_family
from .generative import estimate
from .robustdp import revi, robust_value_iteration

SET_CHOICES = ("tv", "chi2", "kl", "none")

DEFAULT_GAMMA = {"gamblers": 0.99, "frozenlake": 0.9, "chain": 0.9}
DEFAULT_SWEEP = {
    "gamblers": ("p_h", [0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6]),
    "frozenlake": ("rho_random_action", [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]),
}
DEFAULT_N_GRID = [100, 500, 3000, 5000]


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def default_workers() -> int:
    env = os.environ.get("RMDP_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"RMDP_WORKERS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _spec(kind: str, radius: float | None) -> AmbiguitySetSpec:
    if kind == "none":
        return AmbiguitySetSpec.none()
    if radius is None:
        raise UsageError(f"--radius is required for --set {kind}")
    if kind == "kl" and radius == 0:
        raise UsageError("--set kl needs a positive --radius (use --set none for the nominal model)")
    return AmbiguitySetSpec(SetKind(kind), radius)


def _write_json(data, out: str | None) -> None:
    text = json.dumps(data, indent=1) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    mdp = load_mdp(args.mdp)
    rep = robust_value_iteration(mdp, _spec(args.set, args.radius), tol=args.tol, max_iters=args.max_iters)
    _write_json(rep.to_dict(mdp), args.out)
    if args.out:
        print(f"solved in {rep.iterations} iterations (residual {rep.residual:.3g}, converged={rep.converged})")
    return 0 if rep.converged else 1


def cmd_revi(args) -> int:
    mdp = load_mdp(args.mdp)
    spec = _spec(args.set, args.radius)
    mdp_hat = estimate(mdp, args.samples, args.seed)
    rep = revi(mdp_hat, spec, args.iters)
    data = rep.to_dict(mdp_hat)
    data.update(samples=args.samples, seed=args.seed)
    _write_json(data, args.out)
    return 0


def cmd_bounds(args) -> int:
    inputs = bounds.ComplexityInputs(args.gamma, args.eps, args.delta, args.states, args.actions,
                                     args.radius or 0.0, args.lambda_kl)
    k = bounds.k0(args.gamma, args.eps)
    if args.set == "tv":
        n, label = bounds.n_tv(inputs), "N_tv"
    elif args.set == "chi2":
        n, label = bounds.n_chi2(inputs), "N_chi2"
    elif args.set == "kl":
        n, label = bounds.n_kl(inputs), "N_kl"
    else:
        raise UsageError("bounds needs --set tv, chi2 or kl")
    print(f"K0 = {k:.10g} (run at least {math.ceil(k)} iterations)")
    print(f"{label} = {n:.10g} samples per state-action pair")
    return 0


def cmd_gap(args) -> int:
    g = bounds.gap_values(args.gamma)
    print(f"V*(0) = {g.v_robust_opt:.12g}")
    print(f"V^pi_o(0) = {g.v_nonrobust_worst:.12g}")
    print(f"gap = {g.gap:.12g}")
    print(f"lower bound gamma/(198(1-gamma)) = {bounds.gap_lower_bound(args.gamma):.12g}")
    print(f"numeric check: max |analytic - numeric| = {g.max_discrepancy:.3g} (ok)")
    return 0


def _family(args) -> EnvFamily:
    gamma = args.gamma if args.gamma is not None else DEFAULT_GAMMA[args.family]
    env = nominal_family(args.family, gamma)
    if args.map:
        if args.family != "frozenlake":
            raise UsageError("--map only applies to frozenlake")
        env = EnvFamily(env.name, env.gamma, dict(env.params), load_map(args.map))
    return env


def cmd_experiment(args) -> int:
    if args.seed is None:
        raise UsageError("experiment needs an explicit --seed")
    env = _family(args)
    spec = _spec(args.set, args.radius)
    workers = args.workers if args.workers is not None else default_workers()
    k = args.iters if args.iters is not None else harness.iterations_for(env.gamma)
    if args.mode == "iters":
        records = harness.convergence_vs_iterations(env, spec, args.samples or 5000, args.seed,
                                                    args.k_max)
    elif args.mode == "samples":
        seeds = args.seeds if args.seeds is not None else list(range(args.seed, args.seed + 10))
        records = harness.convergence_vs_samples(env, spec, args.n_grid or DEFAULT_N_GRID, seeds, k, workers)
    else:
        if env.name not in DEFAULT_SWEEP:
            raise UsageError(f"{env.name} has no perturbation parameter to sweep")
        param, sweep = DEFAULT_SWEEP[env.name]
        if args.param:
            param = args.param
        if args.sweep is not None:
            sweep = args.sweep
        policies = harness.train_policies(env, spec, args.samples or 3000, args.seed, k)
        records = harness.robustness_eval(policies, env, param, sweep, args.trials, args.horizon,
                                          args.seed, workers)
    harness.write_csv(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rmdp", description="Robust MDP solvers and REVI experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def set_flags(sp, required=True):
        sp.add_argument("--set", choices=SET_CHOICES, required=required, help="ambiguity set kind")
        sp.add_argument("--radius", type=float, help="ambiguity radius c_r (not needed for --set none)")

    s = sub.add_parser("solve", help="robust value iteration on an MDP file")
    s.add_argument("--mdp", required=True)
    set_flags(s)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--max-iters", type=_positive_int, default=100_000)
    s.add_argument("--out", help="output JSON path (stdout if omitted)")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("revi", help="sample a model and run REVI for a fixed number of iterations")
    s.add_argument("--mdp", required=True)
    set_flags(s)
    s.add_argument("--samples", type=_positive_int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--iters", type=_positive_int, required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_revi)

    s = sub.add_parser("bounds", help="iteration and sample-count thresholds")
    s.add_argument("--set", choices=("tv", "chi2", "kl"), required=True)
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--states", type=_positive_int, required=True)
    s.add_argument("--actions", type=_positive_int, required=True)
    s.add_argument("--radius", type=float)
    s.add_argument("--lambda-kl", type=float)
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("gap", help="robustness gap of the two-state chain")
    s.add_argument("--gamma", type=float, required=True)
    s.set_defaults(func=cmd_gap)

    s = sub.add_parser("experiment", help="convergence and robustness experiments, written as CSV")
    s.add_argument("family", choices=("gamblers", "frozenlake", "chain"))
    s.add_argument("--mode", choices=("iters", "samples", "robustness"), required=True)
    set_flags(s)
    s.add_argument("--seed", type=int)
    s.add_argument("--gamma", type=float, help="discount (default: gamblers 0.99, others 0.9)")
    s.add_argument("--map", help="FrozenLake map file")
    s.add_argument("--samples", type=_positive_int, help="samples per pair (iters: 5000, robustness: 3000)")
    s.add_argument("--k-max", type=_positive_int, default=100, help="iterations recorded in iters mode")
    s.add_argument("--iters", type=_positive_int, help="REVI iterations K for samples/robustness modes")
    s.add_argument("--n-grid", type=_ints, help="comma-separated sample sizes (samples mode)")
    s.add_argument("--seeds", type=_ints, help="comma-separated seeds (samples mode; default seed..seed+9)")
    s.add_argument("--param", help="perturbed parameter (robustness mode)")
    s.add_argument("--sweep", type=_floats, help="comma-separated parameter values (robustness mode)")
    s.add_argument("--trials", type=_positive_int, default=1000)
    s.add_argument("--horizon", type=_positive_int, default=harness.DEFAULT_HORIZON)
    s.add_argument("--workers", type=_positive_int, help="worker processes (default: RMDP_WORKERS or CPU count)")
    s.add_argument("--out", required=True, help="CSV output path")
    s.set_defaults(func=cmd_experiment)
    return p


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"rmdp: error: {exc}", file=sys.stderr)
        return 2
    except MDPValidationError as exc:
        print(f"rmdp: invalid MDP:\n{exc}", file=sys.stderr)
        return 1
    except (MDPFormatError, ValueError, ArithmeticError, OSError) as exc:
        print(f"rmdp: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
