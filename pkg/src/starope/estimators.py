"""Off-policy estimators: STAR's weighted-MLE ARPs and the baselines.

Importance weights are laid out like the dataset, ``[n, T_max]``.  Padding
steps carry a per-step ratio of 1, so a cumulative weight stays frozen at its
final value past the end of an episode (as if the episode sat in an
absorbing state with zero reward).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .abstraction import Abstraction
from .arp import PIVOT_TOL, Arp, arp_expected_return, assemble
from .env.data import Dataset
from .env.policy import Policy

BPROB_FLOOR = 1e-12
UNCLIPPED = None

ESTIMATORS = ("star", "is", "pdis", "wis", "wpdis", "mbased")


class SupportError(ValueError):
    """The behavior policy does not cover an action the evaluation policy takes."""


@dataclass(frozen=True)
class StarConfig:
    abstraction: Abstraction
    clip_c: int | None = UNCLIPPED
    pi_e: Policy | None = None

    def __post_init__(self):
        if self.clip_c is not None and int(self.clip_c) < 1:
            raise ValueError("clip_c must be >= 1 or None for unclipped")


@dataclass(frozen=True, eq=False)
class WeightTable:
    weights: np.ndarray  # [n, T_max], padding frozen at the last real weight
    mask: np.ndarray
    clip_c: int | None

    @property
    def mode(self) -> str:
        return "full" if self.clip_c is None else f"clipped:{self.clip_c}"

    @property
    def max(self) -> float:
        return float(self.weights[self.mask].max())

    @property
    def ess(self) -> float:
        w = self.weights[self.mask]
        sq = float((w * w).sum())
        return float(w.sum()) ** 2 / sq if sq > 0 else 0.0


def step_ratios(ds: Dataset, pi_e: Policy) -> np.ndarray:
    """Per-step ratios pi_e(s, a) / pi_b(s, a); 1 on padding."""
    flat = ds.flat_states()
    pe = np.asarray(pi_e.probs(flat), dtype=float)
    a = ds.actions[ds.mask]
    pe = pe[np.arange(len(a)), a]
    pb = ds.bprobs[ds.mask]
    if np.any(~np.isfinite(pe)) or np.any(pe < 0):
        raise ValueError("evaluation policy produced a negative or non-finite probability")
    if np.any(~np.isfinite(pb)) or np.any(pb < 0):
        raise ValueError("dataset holds a negative or non-finite behavior probability")
    bad = (pe > 0) & (pb < BPROB_FLOOR)
    if np.any(bad):
        i, t = np.argwhere(ds.mask)[np.flatnonzero(bad)[0]]
        raise SupportError(f"support violation at episode {i}, timestep {t}: "
                           f"pi_e={pe[np.flatnonzero(bad)[0]]!r} but behavior prob below {BPROB_FLOOR}")
    ratios = np.ones(ds.actions.shape)
    ratios[ds.mask] = np.where(pe > 0, pe / np.where(pb > 0, pb, 1.0), 0.0)
    return ratios


def compute_weights(ds: Dataset, pi_e: Policy, clip_c: int | None = UNCLIPPED) -> WeightTable:
    """rho_{0:t} (unclipped) or rho_{(t-c+1)^+:t} (clipped to the ``c`` latest ratios)."""
    ratios = step_ratios(ds, pi_e)
    if clip_c is None:
        w = np.cumprod(ratios, axis=1)
    else:
        c = int(clip_c)
        if c < 1:
            raise ValueError("clip_c must be >= 1")
        w = ratios.copy()
        for k in range(1, c):
            w[:, k:] *= ratios[:, :-k]
        # past the end, hold the final step's window weight
        last = w[np.arange(ds.n), ds.lengths - 1]
        w = np.where(ds.mask, w, last[:, None])
    return WeightTable(w, ds.mask, clip_c)


def _weighted_arp(ds: Dataset, phi: Abstraction, w: np.ndarray) -> Arp:
    Z = phi.num_abstract
    z = phi.apply(ds)
    m = ds.mask
    fin = ds.final_mask
    zm, wm = z[m], w[m]
    mass = np.bincount(zm, weights=wm, minlength=Z)
    term = np.bincount(z[fin], weights=w[fin], minlength=Z)
    reward_sum = np.bincount(zm, weights=wm * ds.rewards[m], minlength=Z)
    # continuing transitions: real steps that are not final
    nf = m[:, :-1] & ~fin[:, :-1]
    pair = z[:, :-1][nf] * Z + z[:, 1:][nf]
    joint = np.bincount(pair, weights=w[:, :-1][nf], minlength=Z * Z).reshape(Z, Z)
    eta = np.bincount(z[:, 0], minlength=Z) / ds.n
    counts = np.bincount(zm, minlength=Z)
    zero_weight = np.flatnonzero((counts > 0) & (mass <= 0))
    meta = {"zero_weight_states": zero_weight.tolist()} if zero_weight.size else {}
    return assemble(mass, term, reward_sum, joint, eta, meta)


def estimate_arp_on_policy(ds: Dataset, phi: Abstraction) -> Arp:
    """Count-based maximum-likelihood ARP."""
    return _weighted_arp(ds, phi, np.ones(ds.actions.shape))


def estimate_arp_off_policy(ds: Dataset, config: StarConfig) -> Arp:
    """Importance-weighted maximum-likelihood ARP for ``config.pi_e``."""
    if config.pi_e is None:
        raise ValueError("StarConfig.pi_e is required for off-policy estimation")
    wt = compute_weights(ds, config.pi_e, config.clip_c)
    return _weighted_arp(ds, config.abstraction, wt.weights)


def star_estimate(ds: Dataset, config: StarConfig) -> float:
    """Weights, then weighted-MLE ARP, then its closed-form return."""
    return arp_expected_return(estimate_arp_off_policy(ds, config))


# -- importance-sampling baselines ------------------------------------------

def _full_weights(ds: Dataset, pi_e: Policy) -> np.ndarray:
    return compute_weights(ds, pi_e, UNCLIPPED).weights


def is_estimate(ds: Dataset, pi_e: Policy) -> float:
    w = _full_weights(ds, pi_e)[:, -1]
    return float((w * ds.returns).sum() / ds.n)


def pdis_estimate(ds: Dataset, pi_e: Policy) -> float:
    w = _full_weights(ds, pi_e)
    return float((w * ds.rewards).sum() / ds.n)


def wis_estimate(ds: Dataset, pi_e: Policy) -> float:
    w = _full_weights(ds, pi_e)[:, -1]
    den = w.sum()
    return float((w * ds.returns).sum() / den) if den > 0 else 0.0


def wpdis_estimate(ds: Dataset, pi_e: Policy) -> float:
    """Per-timestep self-normalized IS.

    Episodes that already ended keep their final weight in the denominator
    and contribute zero reward, which makes the estimator exact on-policy
    for variable-length episodes.
    """
    w = _full_weights(ds, pi_e)
    num = (w * ds.rewards).sum(axis=0)
    den = w.sum(axis=0)
    per_t = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return float(per_t.sum())


# -- model-based baseline ---------------------------------------------------

def model_based_estimate(ds: Dataset, pi_e: Policy, num_states: int | None = None,
                         abstraction: Abstraction | None = None) -> float:
    """Maximum-likelihood tabular MDP evaluated under ``pi_e``.

    Fits p(s, a, s'), r(s, a) and an end-of-episode probability beta(s, a)
    from counts, then solves the resulting absorbing chain exactly.  An
    unvisited (s, a) is a zero-reward dead end, worth the same as the
    self-loop with reward 0.  With ``abstraction`` the logged states are
    first discretized and ``pi_e`` on a cell is its average over the
    logged states in that cell.
    """
    if abstraction is not None:
        S = abstraction.num_abstract
        s = abstraction.apply(ds)
        flat = ds.flat_states()
        pe_flat = np.asarray(pi_e.probs(flat), dtype=float)
        cell = s[ds.mask]
        A = pe_flat.shape[1]
        sums = np.zeros((S, A))
        np.add.at(sums, cell, pe_flat)
        cnt = np.bincount(cell, minlength=S)
        pi = np.full((S, A), 1.0 / A)
        seen = cnt > 0
        pi[seen] = sums[seen] / cnt[seen, None]
    else:
        if not ds.tabular:
            raise ValueError("model_based_estimate needs tabular states or an abstraction")
        S = int(num_states if num_states is not None else ds.states[ds.mask].max() + 1)
        s = np.asarray(ds.states, dtype=np.int64)
        pi = np.asarray(pi_e.probs(np.arange(S)), dtype=float)
        A = pi.shape[1]
    A = max(A, int(ds.actions[ds.mask].max()) + 1)
    if pi.shape[1] < A:
        raise ValueError("evaluation policy has fewer actions than the data")

    m, fin = ds.mask, ds.final_mask
    sa = s * A + ds.actions
    n_sa = np.bincount(sa[m], minlength=S * A).astype(float)
    r_sum = np.bincount(sa[m], weights=ds.rewards[m], minlength=S * A)
    end = np.bincount(sa[fin], minlength=S * A).astype(float)
    nf = m[:, :-1] & ~fin[:, :-1]
    trans = np.bincount(sa[:, :-1][nf] * S + s[:, 1:][nf], minlength=S * A * S).astype(float)
    trans = trans.reshape(S * A, S)

    seen = n_sa > 0
    r_hat = np.where(seen, r_sum / np.where(seen, n_sa, 1.0), 0.0)
    beta = np.where(seen, end / np.where(seen, n_sa, 1.0), 1.0)
    rows = trans.sum(axis=1)
    p_hat = np.zeros_like(trans)
    has = rows > 0
    p_hat[has] = trans[has] / rows[has, None]

    pi_flat = pi.reshape(S * A)
    r_pi = (pi_flat * r_hat).reshape(S, A).sum(axis=1)
    kernel = ((pi_flat * (1.0 - beta))[:, None] * p_hat).reshape(S, A, S).sum(axis=1)
    eta = np.bincount(s[:, 0], minlength=S) / ds.n

    M = np.eye(S) - kernel
    lu, piv = linalg.lu_factor(M)
    if np.min(np.abs(np.diag(lu))) < PIVOT_TOL:
        raise ValueError("non-terminating model: estimated MDP never ends under pi_e")
    return float(eta @ linalg.lu_solve((lu, piv), r_pi))


def run_estimator(name: str, ds: Dataset, pi_e: Policy, *, abstraction: Abstraction | None = None,
                  clip_c: int | None = UNCLIPPED, num_states: int | None = None) -> float:
    """Dispatch on a stable estimator id."""
    if name == "star":
        if abstraction is None:
            raise ValueError("star needs an abstraction")
        return star_estimate(ds, StarConfig(abstraction, clip_c, pi_e))
    if name == "mbased":
        return model_based_estimate(ds, pi_e, num_states, abstraction)
    fn = {"is": is_estimate, "pdis": pdis_estimate, "wis": wis_estimate,
          "wpdis": wpdis_estimate}.get(name)
    if fn is None:
        raise ValueError(f"unknown estimator {name!r}; expected one of {ESTIMATORS}")
    return fn(ds, pi_e)
