"""Logged episodes, trajectory sampling and the dataset text format.

Episodes are stored padded: arrays of shape ``[n, T_max]`` (states get an
extra trailing dimension for continuous environments) plus per-episode
lengths.  Padding uses action 0, reward 0 and behavior probability 1.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .base import Environment
from .policy import Policy, check_rows, inverse_cdf

FORMAT_VERSION = 1


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def episode_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for episode ``index`` under master ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


@dataclass(frozen=True)
class Provenance:
    env_id: str = ""
    policy_id: str = ""
    seed: int | None = None


@dataclass(frozen=True, eq=False)
class Episode:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    bprobs: np.ndarray

    def __len__(self):
        return len(self.actions)

    @property
    def ret(self) -> float:
        return float(self.rewards.sum())


@dataclass(frozen=True, eq=False)
class Dataset:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    bprobs: np.ndarray
    lengths: np.ndarray
    provenance: Provenance = Provenance()

    def __post_init__(self):
        n, T = self.actions.shape
        if n < 1:
            raise ValueError("dataset must contain at least one episode")
        if self.states.shape[:2] != (n, T) or self.rewards.shape != (n, T) \
                or self.bprobs.shape != (n, T) or self.lengths.shape != (n,):
            raise ValueError("inconsistent dataset array shapes")
        if np.any(self.lengths < 1) or np.any(self.lengths > T):
            raise ValueError("episode lengths must be in [1, T_max]")
        bp = self.bprobs[self.mask]
        if np.any(~np.isfinite(bp)) or np.any(bp <= 0) or np.any(bp > 1):
            raise ValueError("behavior probabilities must lie in (0, 1]")
        for arr in (self.states, self.actions, self.rewards, self.bprobs, self.lengths):
            arr.setflags(write=False)

    @classmethod
    def from_episodes(cls, episodes, provenance: Provenance = Provenance()) -> "Dataset":
        episodes = list(episodes)
        if not episodes:
            raise ValueError("dataset must contain at least one episode")
        lengths = np.array([len(e) for e in episodes], dtype=np.int64)
        n, T = len(episodes), int(lengths.max())
        first = np.asarray(episodes[0].states)
        states = np.zeros((n, T) + first.shape[1:], dtype=first.dtype)
        actions = np.zeros((n, T), dtype=np.int64)
        rewards = np.zeros((n, T))
        bprobs = np.ones((n, T))
        for i, e in enumerate(episodes):
            L = lengths[i]
            states[i, :L] = e.states
            actions[i, :L] = e.actions
            rewards[i, :L] = e.rewards
            bprobs[i, :L] = e.bprobs
        return cls(states, actions, rewards, bprobs, lengths, provenance)

    @property
    def n(self) -> int:
        return self.actions.shape[0]

    @property
    def max_len(self) -> int:
        return self.actions.shape[1]

    @property
    def tabular(self) -> bool:
        return self.states.ndim == 2

    @cached_property
    def mask(self) -> np.ndarray:
        """``[n, T_max]`` true where a real step exists."""
        return np.arange(self.max_len)[None, :] < self.lengths[:, None]

    @cached_property
    def final_mask(self) -> np.ndarray:
        return np.arange(self.max_len)[None, :] == (self.lengths[:, None] - 1)

    @cached_property
    def returns(self) -> np.ndarray:
        return self.rewards.sum(axis=1)

    @property
    def episodes(self) -> list[Episode]:
        return [
            Episode(self.states[i, :L], self.actions[i, :L], self.rewards[i, :L], self.bprobs[i, :L])
            for i, L in enumerate(self.lengths)
        ]

    def flat_states(self) -> np.ndarray:
        """States of all real steps, episode-major."""
        return self.states[self.mask]

    def scaled(self, kappa: float) -> "Dataset":
        return Dataset(self.states, self.actions, self.rewards * kappa, self.bprobs,
                       self.lengths, self.provenance)


def simulate(env: Environment, policy: Policy, seed: int, start: int, stop: int):
    """Simulate episodes ``start..stop-1``; returns padded arrays and lengths."""
    n = stop - start
    T = env.horizon_cap
    k0, k = env.reset_noise_dim, env.step_noise_dim
    u0 = np.empty((n, k0))
    us = np.empty((n, T, 1 + k))
    for j in range(n):
        g = episode_rng(seed, start + j)
        u0[j] = g.random(k0)
        us[j] = g.random((T, 1 + k))

    s = np.asarray(env.reset_batch(u0), dtype=env.state_dtype)
    states = np.zeros((n, T) + env.state_shape, dtype=env.state_dtype)
    actions = np.zeros((n, T), dtype=np.int64)
    rewards = np.zeros((n, T))
    bprobs = np.ones((n, T))
    lengths = np.zeros(n, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    for t in range(T):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        st = s[idx]
        p = np.asarray(policy.probs(st), dtype=float)
        if p.shape != (idx.size, env.num_actions):
            raise ValueError("policy is not compatible with the environment's action space")
        check_rows(p)
        a = inverse_cdf(p, us[idx, t, 0])
        nxt, r, done = env.step_batch(st, a, us[idx, t, 1:])
        states[idx, t] = st
        actions[idx, t] = a
        rewards[idx, t] = r
        bprobs[idx, t] = p[np.arange(idx.size), a]
        lengths[idx] = t + 1
        s[idx] = nxt
        alive[idx[np.asarray(done, dtype=bool)]] = False
    return states, actions, rewards, bprobs, lengths


def sample_trajectories(env: Environment, policy: Policy, n: int, seed: int) -> Dataset:
    """Roll out ``n`` episodes of ``policy``; episode ``i`` uses stream ``(seed, i)``."""
    if n < 1:
        raise ValueError("n must be positive")
    states, actions, rewards, bprobs, lengths = simulate(env, policy, seed, 0, n)
    T = int(lengths.max())
    prov = Provenance(env.name, getattr(policy, "name", type(policy).__name__), int(seed))
    return Dataset(states[:, :T], actions[:, :T], rewards[:, :T], bprobs[:, :T], lengths, prov)


def monte_carlo_returns(env: Environment, policy: Policy, n: int, seed: int,
                        chunk: int = 50_000) -> np.ndarray:
    out = np.empty(n)
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        _, _, rewards, _, _ = simulate(env, policy, seed, lo, hi)
        out[lo:hi] = rewards.sum(axis=1)
    return out


def monte_carlo_return(env: Environment, policy: Policy, n: int, seed: int) -> tuple[float, float]:
    """Mean episode return and its standard error over ``n`` rollouts."""
    if n < 2:
        raise ValueError("n must be at least 2")
    g = monte_carlo_returns(env, policy, n, seed)
    return float(g.mean()), float(g.std(ddof=1) / np.sqrt(n))


# -- text format ------------------------------------------------------------

def dumps_dataset(ds: Dataset) -> str:
    prov = ds.provenance
    kind = "tabular" if ds.tabular else f"continuous:{ds.states.shape[2]}"
    seed = "" if prov.seed is None else str(prov.seed)
    buf = io.StringIO()
    buf.write(f"#star-dataset\tversion={FORMAT_VERSION}\tstate={kind}\t"
              f"env={prov.env_id}\tpolicy={prov.policy_id}\tseed={seed}\n")
    for i, L in enumerate(ds.lengths):
        recs = []
        for t in range(L):
            if ds.tabular:
                s = str(int(ds.states[i, t]))
            else:
                s = ",".join(fmt(v) for v in ds.states[i, t])
            recs.append(f"{s}|{int(ds.actions[i, t])}|{fmt(ds.rewards[i, t])}|{fmt(ds.bprobs[i, t])}")
        buf.write(";".join(recs))
        buf.write("\n")
    return buf.getvalue()


def loads_dataset(text: str) -> Dataset:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#star-dataset"):
        raise ValueError("missing dataset header")
    meta = dict(f.split("=", 1) for f in lines[0].split("\t")[1:])
    if int(meta.get("version", -1)) != FORMAT_VERSION:
        raise ValueError(f"unsupported dataset version {meta.get('version')!r}")
    tabular = meta["state"] == "tabular"
    episodes = []
    for line in lines[1:]:
        if not line.strip():
            continue
        s, a, r, b = [], [], [], []
        for rec in line.split(";"):
            fs, fa, fr, fb = rec.split("|")
            s.append(int(fs) if tabular else [float(v) for v in fs.split(",")])
            a.append(int(fa))
            r.append(float(fr))
            b.append(float(fb))
        episodes.append(Episode(np.asarray(s, dtype=np.int64 if tabular else float),
                                np.asarray(a, dtype=np.int64), np.asarray(r), np.asarray(b)))
    seed = int(meta["seed"]) if meta.get("seed") else None
    return Dataset.from_episodes(episodes, Provenance(meta.get("env", ""), meta.get("policy", ""), seed))


def save_dataset(ds: Dataset, path) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w") as f:
        f.write(dumps_dataset(ds))
    os.replace(tmp, path)


def load_dataset(path) -> Dataset:
    with open(path) as f:
        return loads_dataset(f.read())
