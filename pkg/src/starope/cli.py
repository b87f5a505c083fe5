"""Command-line entry point: ``star-ope {generate,estimate,truth,sweep,summarize}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .abstraction import identity_abstraction, kmeans_fit, single_abstraction
from .env import exact_return_dp, load_dataset, monte_carlo_return, sample_trajectories, save_dataset
from .env.data import fmt
from .estimators import ESTIMATORS, run_estimator
from .harness.config import SweepConfig, _clip
from .harness.registry import make_env, make_policy
from .harness.report import read_trials
from .harness.sweep import run_sweep, write_summaries


def _common(p: argparse.ArgumentParser, seed_default=0):
    p.add_argument("--seed", type=int, default=seed_default, help="master seed")
    p.add_argument("--out-dir", help="output directory")
    p.add_argument("--trials", type=int, help="trials per configuration")
    p.add_argument("--workers", type=int, help="worker processes")


def cmd_generate(args) -> int:
    env = make_env(args.env)
    pi = make_policy(args.policy, env)
    ds = sample_trajectories(env, pi, args.n, args.seed)
    out = Path(args.out or Path(args.out_dir or ".") / f"dataset_n{args.n}_s{args.seed}.txt")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out)
    print(out)
    return 0


def cmd_estimate(args) -> int:
    ds = load_dataset(args.dataset)
    env_spec = args.env or ds.provenance.env_id
    if not env_spec:
        raise SystemExit("estimate: --env is required when the dataset does not record one")
    env = make_env(env_spec)
    pi_e = make_policy(args.evaluation, env)
    num_states = env.num_states if env.tabular else None
    phi = None
    if args.estimator == "star" or (args.estimator == "mbased" and not env.tabular):
        kind = args.abstraction or ("identity" if env.tabular and args.num_abstract is None else "kmeans")
        if kind == "identity":
            if not env.tabular:
                raise SystemExit("estimate: identity abstraction needs a tabular environment")
            phi = identity_abstraction(env.num_states)
        elif kind == "single":
            phi = single_abstraction()
        else:
            if args.num_abstract is None:
                raise SystemExit("estimate: --num-abstract is required for a k-means abstraction")
            phi = kmeans_fit(ds.flat_states(), args.num_abstract, args.seed, num_states=num_states)
    value = run_estimator(args.estimator, ds, pi_e, abstraction=phi, clip_c=_clip(args.clip_c),
                          num_states=num_states)
    print(fmt(value))
    return 0


def cmd_truth(args) -> int:
    env = make_env(args.env)
    pi = make_policy(args.policy, env)
    if env.tabular and not args.monte_carlo:
        print(fmt(exact_return_dp(env, pi)))
    else:
        mean, se = monte_carlo_return(env, pi, args.episodes, args.seed)
        print(f"{fmt(mean)}\t{fmt(se)}")
    return 0


def cmd_sweep(args) -> int:
    overrides = dict(seed=args.seed, out_dir=args.out_dir, trials=args.trials, workers=args.workers)
    if args.sizes:
        overrides["sizes"] = args.sizes
    if args.no_figures:
        overrides["figures"] = False
    if args.config:
        config = SweepConfig.from_toml(args.config, **overrides)
    else:
        if not (args.env and args.behavior and args.evaluation):
            raise SystemExit("sweep: give --config or all of --env, --behavior, --evaluation")
        config = SweepConfig(env=args.env, behavior=args.behavior, evaluation=args.evaluation,
                             **{k: v for k, v in overrides.items() if v is not None})
    for name, path in run_sweep(config).items():
        print(f"{name}\t{path}")
    return 0


def cmd_summarize(args) -> int:
    results = read_trials(args.trials_csv)
    out = Path(args.out_dir or Path(args.trials_csv).parent)
    for name, path in write_summaries(results, out, figures=not args.no_figures).items():
        print(f"{name}\t{path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="star-ope", description="Off-policy evaluation with abstract reward processes.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a dataset from an environment and behavior policy")
    p.add_argument("--env", required=True, help="environment spec, e.g. twostate or cartpole:horizon_cap=50")
    p.add_argument("--policy", required=True, help="behavior policy spec, e.g. uniform or lean:p=0.9")
    p.add_argument("-n", type=int, required=True, help="number of episodes")
    p.add_argument("--out", help="dataset file (default: <out-dir>/dataset_n<n>_s<seed>.txt)")
    _common(p)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("estimate", help="run one estimator on a dataset file and print the estimate")
    p.add_argument("dataset")
    p.add_argument("--env", help="environment spec (default: the one recorded in the dataset)")
    p.add_argument("--evaluation", required=True, help="evaluation policy spec")
    p.add_argument("--estimator", choices=ESTIMATORS, default="star")
    p.add_argument("--abstraction", choices=("identity", "single", "kmeans"))
    p.add_argument("--num-abstract", type=int, help="|Z| for a k-means abstraction")
    p.add_argument("--clip-c", default="unclipped", help="clip window (integer >= 1) or 'unclipped'")
    _common(p)
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("truth", help="oracle value of a policy (DP if tabular, else Monte Carlo)")
    p.add_argument("--env", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--episodes", type=int, default=1_000_000, help="Monte Carlo episodes")
    p.add_argument("--monte-carlo", action="store_true", help="use Monte Carlo even for tabular environments")
    _common(p)
    p.set_defaults(fn=cmd_truth)

    p = sub.add_parser("sweep", help="run a resumable (|Z|, c) sweep")
    p.add_argument("--config", help="TOML sweep configuration")
    p.add_argument("--env")
    p.add_argument("--behavior")
    p.add_argument("--evaluation")
    p.add_argument("--sizes", type=int, nargs="+")
    p.add_argument("--no-figures", action="store_true")
    _common(p, seed_default=None)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("summarize", help="trial CSV to summary, selection and heatmap CSVs")
    p.add_argument("trials_csv")
    p.add_argument("--no-figures", action="store_true")
    _common(p)
    p.set_defaults(fn=cmd_summarize)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"star-ope: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
