"""State abstractions: total maps from states to ``range(num_abstract)``."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .env.data import Dataset, fmt

KINDS = ("identity", "single", "lookup", "centroid")


@dataclass(frozen=True, eq=False)
class Abstraction:
    """A discrete abstraction phi.

    ``kind`` selects how states are mapped:

    * ``identity`` -- tabular state ``s`` maps to ``s``.
    * ``single`` -- everything maps to 0.
    * ``lookup`` -- tabular state ``s`` maps to ``table[s]``.
    * ``centroid`` -- nearest row of ``centroids`` in Euclidean distance,
      lowest index on ties.  Tabular states are first one-hot encoded over
      ``one_hot`` states; ``shift``/``scale`` standardize features when set.
    """

    kind: str
    num_abstract: int
    table: np.ndarray | None = None
    centroids: np.ndarray | None = None
    one_hot: int | None = None
    shift: np.ndarray | None = None
    scale: np.ndarray | None = None
    inertia_history: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown abstraction kind {self.kind!r}")
        if self.num_abstract < 1:
            raise ValueError("num_abstract must be positive")
        if self.kind == "lookup":
            t = np.asarray(self.table, dtype=np.int64)
            if t.ndim != 1 or np.any(t < 0) or np.any(t >= self.num_abstract):
                raise ValueError("lookup table entries must lie in [0, num_abstract)")
            object.__setattr__(self, "table", t)
        if self.kind == "centroid":
            c = np.asarray(self.centroids, dtype=float)
            if c.ndim != 2 or c.shape[0] != self.num_abstract:
                raise ValueError("centroids must have shape [num_abstract, dim]")
            object.__setattr__(self, "centroids", c)

    def features(self, states) -> np.ndarray:
        x = np.asarray(states)
        if self.one_hot is not None:
            x = x.astype(np.int64)
            if np.any(x < 0) or np.any(x >= self.one_hot):
                raise ValueError("state outside the one-hot range")
            x = np.eye(self.one_hot)[x]
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if self.shift is not None:
            x = (x - self.shift) / self.scale
        return x

    def __call__(self, states) -> np.ndarray:
        """Map a batch of states to abstract indices."""
        states = np.asarray(states)
        if self.kind == "single":
            return np.zeros(states.shape[0], dtype=np.int64)
        if self.kind == "identity":
            s = states.astype(np.int64)
            if np.any(s < 0) or np.any(s >= self.num_abstract):
                raise ValueError("state outside the identity range")
            return s
        if self.kind == "lookup":
            return self.table[states.astype(np.int64)]
        return nearest(self.features(states), self.centroids)

    def map_one(self, state) -> int:
        return int(self(np.asarray([state]))[0])

    def apply(self, ds: Dataset) -> np.ndarray:
        """Abstract indices as a padded ``[n, T_max]`` array (padding maps to 0)."""
        z = np.zeros(ds.actions.shape, dtype=np.int64)
        z[ds.mask] = self(ds.flat_states())
        return z


def nearest(x: np.ndarray, centroids: np.ndarray, chunk: int = 4096) -> np.ndarray:
    out = np.empty(len(x), dtype=np.int64)
    for lo in range(0, len(x), chunk):
        out[lo:lo + chunk] = cdist(x[lo:lo + chunk], centroids, "sqeuclidean").argmin(axis=1)
    return out


def identity_abstraction(num_states: int) -> Abstraction:
    return Abstraction("identity", int(num_states))


def single_abstraction() -> Abstraction:
    return Abstraction("single", 1)


def lookup_abstraction(table, num_abstract: int | None = None) -> Abstraction:
    table = np.asarray(table, dtype=np.int64)
    return Abstraction("lookup", int(num_abstract if num_abstract is not None else table.max() + 1), table=table)


# -- k-means ----------------------------------------------------------------

def lloyd(x: np.ndarray, k: int, rng: np.random.Generator, max_iters: int = 300,
          tol: float = 1e-10):
    """Lloyd's algorithm from k distinct data points chosen uniformly.

    Returns ``(centroids, labels, inertia_history)``; the history holds the
    inertia of each assignment step and never increases.  A cluster that
    loses all its points is reseeded at the point farthest from its current
    centroid.
    """
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        raise ValueError("cannot cluster an empty set of states")
    if k < 1:
        raise ValueError("k must be positive")
    distinct = np.unique(x, axis=0)
    if len(distinct) < k:
        raise ValueError(f"insufficient distinct states: {len(distinct)} < k={k}")
    centroids = distinct[np.sort(rng.choice(len(distinct), size=k, replace=False))].copy()

    history = []
    labels = None
    for _ in range(max_iters):
        d = np.empty((len(x), k))
        for lo in range(0, len(x), 4096):
            d[lo:lo + 4096] = cdist(x[lo:lo + 4096], centroids, "sqeuclidean")
        labels = d.argmin(axis=1)
        point_d = d[np.arange(len(x)), labels]
        history.append(float(point_d.sum()))

        counts = np.bincount(labels, minlength=k)
        new = np.zeros_like(centroids)
        np.add.at(new, labels, x)
        nonempty = counts > 0
        new[nonempty] /= counts[nonempty, None]
        taken = set()
        for j in np.flatnonzero(~nonempty):
            order = np.argsort(-point_d, kind="stable")
            far = next(int(i) for i in order if int(i) not in taken)
            taken.add(far)
            new[j] = x[far]
            point_d[far] = 0.0
        shift = float(np.sqrt(((new - centroids) ** 2).sum(axis=1)).max())
        centroids = new
        if shift < tol:
            break

    d = np.empty((len(x), k))
    for lo in range(0, len(x), 4096):
        d[lo:lo + 4096] = cdist(x[lo:lo + 4096], centroids, "sqeuclidean")
    labels = d.argmin(axis=1)
    final = float(d[np.arange(len(x)), labels].sum())
    if final <= history[-1]:
        history.append(final)
    return centroids, labels, history


def kmeans_fit(states, k: int, seed: int, max_iters: int = 300, tol: float = 1e-10,
               standardize: bool = False, num_states: int | None = None) -> Abstraction:
    """Fit a nearest-centroid abstraction with ``k`` abstract states.

    Tabular states (1-D integer input with ``num_states`` given) are clustered
    as one-hot vectors.
    """
    states = np.asarray(states)
    if states.shape[0] == 0:
        raise ValueError("cannot cluster an empty set of states")
    proto = Abstraction("centroid", 1, centroids=np.zeros((1, 1)),
                        one_hot=None if num_states is None else int(num_states))
    x = proto.features(states)
    shift = scale = None
    if standardize:
        shift = x.mean(axis=0)
        scale = x.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        x = (x - shift) / scale
    centroids, _, history = lloyd(x, int(k), np.random.default_rng(seed), max_iters, tol)
    return Abstraction("centroid", int(k), centroids=centroids, one_hot=proto.one_hot,
                       shift=shift, scale=scale, inertia_history=tuple(history))


# -- Markov diagnostic ------------------------------------------------------

def _tv(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def markov_violation_score(ds: Dataset, phi: Abstraction, c: int) -> float:
    """Empirical check of c-th order Markovness of ``phi`` on logged data.

    For each non-final step, the successor abstract state is conditioned on
    the last ``c`` abstract states and on the last ``c + 1`` (histories are
    truncated at the episode start, and a truncated history is its own key).
    The score is the visit-weighted mean total-variation distance between
    the two conditional distributions; 0 means indistinguishable.
    """
    if c < 1:
        raise ValueError("c must be positive")
    z = phi.apply(ds)
    long_counts: dict = {}
    for i, L in enumerate(ds.lengths):
        zi = z[i, :L].tolist()
        for t in range(L - 1):
            h = tuple(zi[max(0, t - c):t + 1])
            long_counts.setdefault(h, {})
            nxt = zi[t + 1]
            long_counts[h][nxt] = long_counts[h].get(nxt, 0) + 1
    if not long_counts:
        return 0.0
    short_counts: dict = {}
    for h, outs in long_counts.items():
        hs = h[-c:]
        bucket = short_counts.setdefault(hs, {})
        for k, v in outs.items():
            bucket[k] = bucket.get(k, 0) + v

    def normalize(d):
        tot = sum(d.values())
        return {k: v / tot for k, v in d.items()}, tot

    short = {h: normalize(d)[0] for h, d in short_counts.items()}
    total = 0
    score = 0.0
    for h in sorted(long_counts):
        p, m = normalize(long_counts[h])
        score += m * _tv(p, short[h[-c:]])
        total += m
    return float(min(1.0, max(0.0, score / total)))


# -- persistence ------------------------------------------------------------

def dumps_abstraction(phi: Abstraction) -> str:
    lines = ["#star-abstraction\tversion=1", f"kind {phi.kind}", f"num_abstract {phi.num_abstract}"]
    if phi.kind == "lookup":
        lines.append("table " + " ".join(str(int(v)) for v in phi.table))
    if phi.kind == "centroid":
        if phi.one_hot is not None:
            lines.append(f"one_hot {phi.one_hot}")
        if phi.shift is not None:
            lines.append("shift " + " ".join(fmt(v) for v in phi.shift))
            lines.append("scale " + " ".join(fmt(v) for v in phi.scale))
        for row in phi.centroids:
            lines.append("centroid " + " ".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def loads_abstraction(text: str) -> Abstraction:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#star-abstraction"):
        raise ValueError("missing abstraction header")
    kw: dict = {}
    cents = []
    for line in lines[1:]:
        if not line.strip():
            continue
        key, _, rest = line.partition(" ")
        if key == "centroid":
            cents.append([float(v) for v in rest.split()])
        elif key in ("kind",):
            kw[key] = rest.strip()
        elif key in ("num_abstract", "one_hot"):
            kw[key] = int(rest)
        elif key == "table":
            kw[key] = np.array([int(v) for v in rest.split()], dtype=np.int64)
        elif key in ("shift", "scale"):
            kw[key] = np.array([float(v) for v in rest.split()])
        else:
            raise ValueError(f"unknown abstraction field {key!r}")
    if cents:
        kw["centroids"] = np.array(cents)
    return Abstraction(**kw)


def save_abstraction(phi: Abstraction, path) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w") as f:
        f.write(dumps_abstraction(phi))
    os.replace(tmp, path)


def load_abstraction(path) -> Abstraction:
    with open(path) as f:
        return loads_abstraction(f.read())
