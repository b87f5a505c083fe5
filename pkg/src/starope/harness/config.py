from __future__ import annotations

import hashlib
import sys
from dataclasses import asdict, dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .registry import format_spec

DEFAULT_BASELINES = ("is", "pdis", "wis", "wpdis", "mbased")


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary labelled parts."""
    digest = hashlib.sha256("|".join(map(str, parts)).encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def _clip(v):
    if v is None or (isinstance(v, str) and v.lower() in ("unclipped", "none", "inf")):
        return None
    v = int(v)
    if v < 1:
        raise ValueError("clip values must be >= 1 or 'unclipped'")
    return v


@dataclass
class SweepConfig:
    env: str
    behavior: str
    evaluation: str
    sizes: list = field(default_factory=lambda: [100, 1000])
    num_abstract: list = field(default_factory=lambda: [2, 4, 8, 16, 32, 64, 128])
    clip: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    trials: int = 200
    seed: int = 0
    out_dir: str = "runs/sweep"
    baselines: list = field(default_factory=lambda: list(DEFAULT_BASELINES))
    standardize: bool = False
    kmeans_max_iters: int = 300
    kmeans_tol: float = 1e-10
    truth_episodes: int = 1_000_000
    workers: int = 1
    figures: bool = True

    def __post_init__(self):
        self.env = format_spec(self.env)
        self.behavior = format_spec(self.behavior)
        self.evaluation = format_spec(self.evaluation)
        self.sizes = [int(n) for n in self.sizes]
        self.num_abstract = [int(z) for z in self.num_abstract]
        self.clip = [_clip(c) for c in self.clip]
        if self.trials < 2:
            raise ValueError("trials must be at least 2")
        if not self.sizes or not self.num_abstract or not self.clip:
            raise ValueError("sizes, num_abstract and clip grids must be non-empty")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])) or self.sizes[0] < 1:
            raise ValueError("dataset sizes must be positive and strictly increasing")
        if any(z < 1 for z in self.num_abstract):
            raise ValueError("num_abstract entries must be positive")
        unknown = set(self.baselines) - set(DEFAULT_BASELINES)
        if unknown:
            raise ValueError(f"unknown baselines {sorted(unknown)}")

    @classmethod
    def from_toml(cls, path, **overrides) -> "SweepConfig":
        with open(path, "rb") as f:
            raw = tomllib.load(f)
        return cls.from_dict(raw, **overrides)

    @classmethod
    def from_dict(cls, raw: dict, **overrides) -> "SweepConfig":
        """Flatten the nested TOML layout (``[env]``, ``[policies]``, ``[sweep]``, ...)."""
        raw = dict(raw)
        flat = {}
        env = raw.pop("env", None)
        if isinstance(env, dict):
            env = dict(env)
            name = env.pop("id")
            flat["env"] = name + (":" + ",".join(f"{k}={v}" for k, v in env.items()) if env else "")
        elif env is not None:
            flat["env"] = env
        pol = raw.pop("policies", {})
        for key in ("behavior", "evaluation"):
            if key in pol:
                flat[key] = format_spec(pol[key])
        for section, mapping in (("sweep", {}), ("abstraction", {"max_iters": "kmeans_max_iters",
                                                                 "tol": "kmeans_tol"}),
                                 ("truth", {"episodes": "truth_episodes"})):
            for k, v in raw.pop(section, {}).items():
                flat[mapping.get(k, k)] = v
        flat.update(raw)
        flat.update({k: v for k, v in overrides.items() if v is not None})
        names = {f.name for f in fields(cls)}
        unknown = set(flat) - names
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**flat)

    def to_dict(self) -> dict:
        return asdict(self)
