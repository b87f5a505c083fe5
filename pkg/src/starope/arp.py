"""Abstract reward processes: construction, closed-form return and rollouts.

Termination is carried by a per-abstract-state probability ``beta`` rather
than an explicit absorbing state.  ``P`` is the transition matrix
conditioned on continuing, so the absorbing-state kernel is
``diag(1 - beta) @ P`` and the expected return is

    J = eta @ solve(I - diag(1 - beta) @ P, R).
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .abstraction import Abstraction
from .env.data import fmt
from .env.policy import Policy
from .env.tabular import TabularMdp, state_distributions

ROW_ATOL = 1e-10
PIVOT_TOL = 1e-12


class NonTerminatingArp(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Arp:
    P: np.ndarray
    R: np.ndarray
    eta: np.ndarray
    beta: np.ndarray
    visited: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        Z = P.shape[0]
        if P.shape != (Z, Z):
            raise ValueError("P must be square")
        for name in ("R", "eta", "beta"):
            if np.asarray(getattr(self, name)).shape != (Z,):
                raise ValueError(f"{name} must have shape [{Z}]")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > ROW_ATOL):
            raise ValueError("rows of P must be probability vectors")
        eta = np.asarray(self.eta, dtype=float)
        if np.any(eta < 0) or abs(eta.sum() - 1.0) > ROW_ATOL:
            raise ValueError("eta must be a probability vector")
        beta = np.asarray(self.beta, dtype=float)
        if np.any(beta < 0) or np.any(beta > 1):
            raise ValueError("beta entries must lie in [0, 1]")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float))
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "visited", np.asarray(self.visited, dtype=bool))

    @property
    def num_abstract(self) -> int:
        return self.P.shape[0]

    def relabel(self, perm) -> "Arp":
        """ARP with abstract state ``perm[i]`` renamed to ``i``."""
        perm = np.asarray(perm)
        return Arp(self.P[np.ix_(perm, perm)], self.R[perm], self.eta[perm],
                   self.beta[perm], self.visited[perm], dict(self.meta))


def assemble(mass, term, reward_sum, joint, eta, meta=None) -> Arp:
    """Build an ARP from accumulated per-abstract-state statistics.

    ``mass`` is visitation mass, ``term`` the part of it on final steps,
    ``reward_sum`` reward mass and ``joint[z, z']`` continuing-transition
    mass.  States with zero mass get a self-loop, zero reward and certain
    termination; states whose mass is all terminal get a self-loop row.
    """
    Z = len(mass)
    visited = mass > 0
    safe = np.where(visited, mass, 1.0)
    R = np.where(visited, reward_sum / safe, 0.0)
    beta = np.where(visited, np.minimum(term / safe, 1.0), 1.0)
    rows = joint.sum(axis=1)
    P = np.zeros((Z, Z))
    has = rows > 0
    P[has] = joint[has] / rows[has, None]
    idx = np.flatnonzero(~has)
    P[idx, idx] = 1.0
    return Arp(P, R, eta, beta, visited, dict(meta or {}))


def ground_truth_arp(mdp: TabularMdp, policy: Policy, phi: Abstraction) -> Arp:
    """Exact ARP of ``policy`` on ``mdp`` under ``phi``, summed over all timesteps."""
    S = mdp.num_states
    zs = phi(np.arange(S))
    Z = phi.num_abstract
    onehot = np.zeros((S, Z))
    onehot[np.arange(S), zs] = 1.0
    pi = mdp.policy_matrix(policy)
    r_pi = (pi * mdp.reward).sum(axis=1)
    cont = 1.0 - mdp.termination

    mass = np.zeros(Z)
    term = np.zeros(Z)
    reward_sum = np.zeros(Z)
    joint = np.zeros((Z, Z))
    for t, d, end, p_pi in state_distributions(mdp, policy):
        mass += d @ onehot
        term += (d * end) @ onehot
        reward_sum += (d * r_pi) @ onehot
        if t < mdp.horizon_cap - 1:
            flow = d[:, None] * p_pi * cont[None, :]
            joint += onehot.T @ flow @ onehot
    eta = mdp.initial_dist @ onehot
    return assemble(mass, term, reward_sum, joint, eta)


def arp_expected_return(arp: Arp) -> float:
    """Closed-form expected return via an LU solve."""
    Z = arp.num_abstract
    A = np.eye(Z) - (1.0 - arp.beta)[:, None] * arp.P
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(A, check_finite=True)
    if np.min(np.abs(np.diag(lu))) < PIVOT_TOL:
        raise NonTerminatingArp("non-terminating ARP: I - diag(1 - beta) P is singular")
    v = linalg.lu_solve((lu, piv), arp.R)
    return float(arp.eta @ v)


def arp_rollout_returns(arp: Arp, n: int, seed: int, step_cap: int = 100_000) -> np.ndarray:
    """Per-episode returns of ``n`` simulated ARP episodes."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    cdf_eta = np.cumsum(arp.eta)
    cdf_eta /= cdf_eta[-1]
    cdf_P = np.cumsum(arp.P, axis=1)
    cdf_P /= cdf_P[:, -1:]
    z = np.minimum(np.searchsorted(cdf_eta, rng.random(n), side="right"), arp.num_abstract - 1)
    returns = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    for _ in range(step_cap):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        zi = z[idx]
        returns[idx] += arp.R[zi]
        stop = rng.random(idx.size) < arp.beta[zi]
        u = rng.random(idx.size)
        nxt = (cdf_P[zi] <= u[:, None]).sum(axis=1)
        z[idx] = nxt
        alive[idx[stop]] = False
    truncated = int(alive.sum())
    if truncated:
        warnings.warn(f"{truncated} ARP rollouts truncated at step_cap={step_cap}", RuntimeWarning)
    return returns


def arp_rollout_return(arp: Arp, n: int, seed: int, step_cap: int = 100_000) -> float:
    return float(arp_rollout_returns(arp, n, seed, step_cap).mean())


# -- persistence ------------------------------------------------------------

def dumps_arp(arp: Arp) -> str:
    Z = arp.num_abstract
    lines = ["#star-arp\tversion=1", f"num_abstract {Z}"]
    lines += ["P " + " ".join(fmt(v) for v in row) for row in arp.P]
    lines.append("R " + " ".join(fmt(v) for v in arp.R))
    lines.append("eta " + " ".join(fmt(v) for v in arp.eta))
    lines.append("beta " + " ".join(fmt(v) for v in arp.beta))
    lines.append("visited " + " ".join("1" if v else "0" for v in arp.visited))
    return "\n".join(lines) + "\n"


def loads_arp(text: str) -> Arp:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#star-arp"):
        raise ValueError("missing ARP header")
    Z = int(lines[1].split()[1])
    rows, vec = [], {}
    for ln in lines[2:]:
        key, *vals = ln.split()
        if key == "P":
            rows.append([float(v) for v in vals])
        elif key == "visited":
            vec[key] = np.array([v == "1" for v in vals])
        else:
            vec[key] = np.array([float(v) for v in vals])
    if len(rows) != Z:
        raise ValueError("ARP file has the wrong number of P rows")
    return Arp(np.array(rows), vec["R"], vec["eta"], vec["beta"], vec["visited"])


def save_arp(arp: Arp, path) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w") as f:
        f.write(dumps_arp(arp))
    os.replace(tmp, path)


def load_arp(path) -> Arp:
    with open(path) as f:
        return loads_arp(f.read())
