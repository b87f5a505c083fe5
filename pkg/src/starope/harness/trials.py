"""Single trials: sample a dataset, fit abstractions, run estimators."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from ..abstraction import Abstraction, kmeans_fit
from ..env import Environment, exact_return_dp, monte_carlo_return, sample_trajectories
from ..env.data import Dataset
from ..estimators import run_estimator
from .config import SweepConfig, derive_seed
from .registry import make_env, make_policy

log = logging.getLogger(__name__)

TRUTH_REL_STDERR = 0.01


@dataclass(frozen=True)
class TrialResult:
    estimator: str
    num_abstract: int | None
    clip_c: int | None
    n: int
    trial: int
    seed: int
    estimate: float
    truth: float
    sq_error: float

    @classmethod
    def make(cls, estimator, num_abstract, clip_c, n, trial, seed, estimate, truth):
        estimate, truth = float(estimate), float(truth)
        return cls(estimator, num_abstract, clip_c, int(n), int(trial), int(seed),
                   estimate, truth, (estimate - truth) ** 2)

    @property
    def key(self):
        return (self.estimator, self.num_abstract, self.clip_c, self.n)


@dataclass(frozen=True)
class TrialFailure:
    estimator: str
    num_abstract: int | None
    clip_c: int | None
    n: int
    trial: int
    error: str


class TrialError(RuntimeError):
    """An estimator failed; carries the trial coordinates."""

    def __init__(self, failure: TrialFailure):
        super().__init__(f"{failure.estimator} (|Z|={failure.num_abstract}, c={failure.clip_c}, "
                         f"n={failure.n}, trial={failure.trial}): {failure.error}")
        self.failure = failure


@dataclass(frozen=True)
class Truth:
    value: float
    stderr: float
    method: str


def compute_truth(config: SweepConfig) -> Truth:
    env = make_env(config.env)
    pi_e = make_policy(config.evaluation, env)
    if env.tabular:
        return Truth(exact_return_dp(env, pi_e), 0.0, "dp")
    mean, se = monte_carlo_return(env, pi_e, config.truth_episodes,
                                  derive_seed(config.seed, config.env, "truth"))
    if se > TRUTH_REL_STDERR * abs(mean):
        raise ValueError(f"Monte Carlo truth too noisy: stderr {se:.3g} vs |truth| {abs(mean):.3g}")
    return Truth(mean, se, "monte-carlo")


def data_seed(config: SweepConfig, n: int, trial: int) -> int:
    return derive_seed(config.seed, config.env, "data", n, trial)


def abstraction_seed(config: SweepConfig, k: int, n: int, trial: int) -> int:
    return derive_seed(config.seed, config.env, "kmeans", k, n, trial)


def sample_trial_data(config: SweepConfig, env: Environment, n: int, trial: int) -> Dataset:
    pi_b = make_policy(config.behavior, env)
    return sample_trajectories(env, pi_b, n, data_seed(config, n, trial))


def fit_abstraction(config: SweepConfig, env: Environment, ds: Dataset, k: int, trial: int) -> Abstraction:
    return kmeans_fit(ds.flat_states(), k, abstraction_seed(config, k, ds.n, trial),
                      max_iters=config.kmeans_max_iters, tol=config.kmeans_tol,
                      standardize=config.standardize,
                      num_states=env.num_states if env.tabular else None)


def run_block(config: SweepConfig, n: int, trial: int, truth: float):
    """All estimators on one shared dataset.

    Returns ``(results, failures)``.  Each k-means abstraction is fit once
    and reused for every clip value and for the discretized model baseline.
    """
    env = make_env(config.env)
    pi_e = make_policy(config.evaluation, env)
    ds = sample_trial_data(config, env, n, trial)
    seed = data_seed(config, n, trial)
    results, failures = [], []

    def attempt(est, k, c, fn):
        try:
            results.append(TrialResult.make(est, k, c, n, trial, seed, fn(), truth))
        except Exception as exc:  # recorded, the sweep continues
            log.warning("trial failure %s |Z|=%s c=%s n=%s trial=%s: %s", est, k, c, n, trial, exc)
            failures.append(TrialFailure(est, k, c, n, trial, f"{type(exc).__name__}: {exc}"))

    phis = {}
    for k in config.num_abstract:
        try:
            phis[k] = fit_abstraction(config, env, ds, k, trial)
        except Exception as exc:
            for c in config.clip:
                failures.append(TrialFailure("star", k, c, n, trial, f"{type(exc).__name__}: {exc}"))
    for k in config.num_abstract:
        if k not in phis:
            continue
        for c in config.clip:
            attempt("star", k, c, lambda: run_estimator("star", ds, pi_e, abstraction=phis[k], clip_c=c))
    for est in config.baselines:
        if est == "mbased" and not env.tabular:
            for k in config.num_abstract:
                if k in phis:
                    attempt(est, k, None, lambda: run_estimator(est, ds, pi_e, abstraction=phis[k]))
        elif est == "mbased":
            attempt(est, None, None, lambda: run_estimator(est, ds, pi_e, num_states=env.num_states))
        else:
            attempt(est, None, None, lambda: run_estimator(est, ds, pi_e))
    return results, failures


def run_trial(config: SweepConfig, estimator: str, n: int, trial: int, *,
              num_abstract: int | None = None, clip_c: int | None = None,
              truth: float | None = None) -> TrialResult:
    """One estimator on the dataset of trial ``trial``; identical to the row ``run_block`` writes."""
    env = make_env(config.env)
    pi_e = make_policy(config.evaluation, env)
    if truth is None:
        truth = compute_truth(config).value
    ds = sample_trial_data(config, env, n, trial)
    seed = data_seed(config, n, trial)
    try:
        phi = None
        if estimator == "star" or (estimator == "mbased" and not env.tabular):
            if num_abstract is None:
                raise ValueError(f"{estimator} needs num_abstract")
            phi = fit_abstraction(config, env, ds, num_abstract, trial)
        est = run_estimator(estimator, ds, pi_e, abstraction=phi, clip_c=clip_c,
                            num_states=env.num_states if env.tabular else None)
    except Exception as exc:
        raise TrialError(TrialFailure(estimator, num_abstract, clip_c, n, trial,
                                      f"{type(exc).__name__}: {exc}")) from exc
    return TrialResult.make(estimator, num_abstract if phi is not None else None,
                            clip_c if estimator == "star" else None, n, trial, seed, est, truth)
