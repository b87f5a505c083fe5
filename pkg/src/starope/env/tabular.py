"""Finite MDPs and the exact dynamic-programming return oracle."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import Environment
from .policy import Policy, TabularPolicy, inverse_cdf

STOCHASTIC_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class TabularMdp(Environment):
    """Finite MDP with per-state termination and a hard horizon cap.

    ``termination[s]`` is the probability that the episode ends upon entering
    ``s`` through a transition; initial states always produce at least one
    step.  Rewards are the deterministic expectations ``reward[s, a]``.
    """

    transition: np.ndarray
    reward: np.ndarray
    initial_dist: np.ndarray
    termination: np.ndarray
    horizon_cap: int
    name: str = "mdp"
    state_shape: tuple = field(default=(), init=False)
    reset_noise_dim = 1
    step_noise_dim = 2

    def __post_init__(self):
        p = np.array(self.transition, dtype=float)
        r = np.array(self.reward, dtype=float)
        eta = np.array(self.initial_dist, dtype=float)
        term = np.array(self.termination, dtype=float)
        if p.ndim != 3 or p.shape[0] != p.shape[2]:
            raise ValueError("transition must have shape [S, A, S]")
        S, A, _ = p.shape
        if r.shape != (S, A):
            raise ValueError("reward must have shape [S, A]")
        if eta.shape != (S,) or term.shape != (S,):
            raise ValueError("initial_dist and termination must have shape [S]")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=2) - 1.0) > STOCHASTIC_ATOL):
            raise ValueError("transition rows must be probability vectors")
        if np.any(eta < 0) or abs(eta.sum() - 1.0) > STOCHASTIC_ATOL:
            raise ValueError("initial_dist must be a probability vector")
        if np.any(term < 0) or np.any(term > 1):
            raise ValueError("termination entries must lie in [0, 1]")
        if not np.all(np.isfinite(r)):
            raise ValueError("rewards must be finite")
        if int(self.horizon_cap) < 1:
            raise ValueError("horizon_cap must be positive")
        for name, arr in (("transition", p), ("reward", r),
                          ("initial_dist", eta), ("termination", term)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "horizon_cap", int(self.horizon_cap))

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    def reset_batch(self, u):
        n = u.shape[0]
        return inverse_cdf(np.broadcast_to(self.initial_dist, (n, self.num_states)), u[:, 0])

    def step_batch(self, states, actions, u):
        nxt = inverse_cdf(self.transition[states, actions], u[:, 0])
        rewards = self.reward[states, actions]
        done = u[:, 1] < self.termination[nxt]
        return nxt, rewards, done

    def policy_matrix(self, policy: Policy) -> np.ndarray:
        pi = np.asarray(policy.probs(np.arange(self.num_states)), dtype=float)
        if pi.shape != (self.num_states, self.num_actions):
            raise ValueError("policy is not compatible with this MDP")
        return pi


def state_distributions(mdp: TabularMdp, policy: Policy):
    """Yield ``(t, d_t, end_t, P_pi)`` for t = 0..T-1.

    ``d_t[s]`` is the probability that step ``t`` happens in state ``s``;
    ``end_t[s]`` is the probability that the episode ends right after that
    step.  Mass that terminates is removed before propagating.
    """
    pi = mdp.policy_matrix(policy)
    p_pi = np.einsum("sa,sat->st", pi, mdp.transition)
    cont = 1.0 - mdp.termination
    end_prob = p_pi @ mdp.termination
    d = mdp.initial_dist.copy()
    T = mdp.horizon_cap
    for t in range(T):
        last = t == T - 1
        yield t, d, (np.ones_like(d) if last else end_prob), p_pi
        if last:
            break
        d = (d @ p_pi) * cont


def exact_return_dp(mdp: TabularMdp, policy: Policy) -> float:
    """Expected undiscounted return ``sum_t E[R_t]`` by forward propagation."""
    pi = mdp.policy_matrix(policy)
    r_pi = (pi * mdp.reward).sum(axis=1)
    total = 0.0
    for _, d, _, _ in state_distributions(mdp, policy):
        total += float(d @ r_pi)
    return total


def two_state_mdp(horizon: int = 2) -> TabularMdp:
    """States {0, 1}; action 0 stays, action 1 switches; reward 1 in state 1."""
    p = np.zeros((2, 2, 2))
    p[0, 0, 0] = p[1, 0, 1] = 1.0
    p[0, 1, 1] = p[1, 1, 0] = 1.0
    r = np.array([[0.0, 0.0], [1.0, 1.0]])
    return TabularMdp(p, r, [1.0, 0.0], [0.0, 0.0], horizon, name="twostate")


def random_mdp(num_states: int, num_actions: int, horizon: int, seed: int = 0,
               termination: float = 0.05, branching: int | None = None,
               name: str | None = None) -> TabularMdp:
    """Random MDP with Dirichlet transitions and uniform [0, 1] rewards.

    ``branching`` limits each (s, a) to that many successor states.
    """
    rng = np.random.default_rng(seed)
    S, A = num_states, num_actions
    p = np.zeros((S, A, S))
    k = S if branching is None else min(branching, S)
    for s in range(S):
        for a in range(A):
            succ = rng.choice(S, size=k, replace=False)
            p[s, a, succ] = rng.dirichlet(np.ones(k))
    r = rng.random((S, A))
    eta = rng.dirichlet(np.ones(S))
    term = np.full(S, float(termination))
    return TabularMdp(p, r, eta, term, horizon,
                      name=name or f"random-mdp-{S}x{A}-h{horizon}-s{seed}")


def random_policy(num_states: int, num_actions: int, seed: int = 0,
                  concentration: float = 1.0) -> TabularPolicy:
    rng = np.random.default_rng(seed)
    m = rng.dirichlet(np.full(num_actions, concentration), size=num_states)
    m /= m.sum(axis=1, keepdims=True)
    return TabularPolicy(m, name=f"random-s{seed}")


def skewed_policy(num_states: int, num_actions: int, p: float = 0.8,
                  seed: int = 0) -> TabularPolicy:
    """Puts mass ``p`` on one randomly chosen action per state, the rest uniform."""
    if num_actions == 1:
        return TabularPolicy(np.ones((num_states, 1)), name="skewed")
    rng = np.random.default_rng(seed)
    m = np.full((num_states, num_actions), (1.0 - p) / (num_actions - 1))
    m[np.arange(num_states), rng.integers(num_actions, size=num_states)] = p
    return TabularPolicy(m, name=f"skewed-p{p}-s{seed}")
