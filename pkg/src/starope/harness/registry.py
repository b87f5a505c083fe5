"""Build environments and policies from short spec strings.

A spec is ``name`` or ``name:key=value,key=value``, e.g.
``random-mdp:num_states=5,horizon=100,seed=2`` or ``lean:p=0.9``.
"""

from __future__ import annotations

import numpy as np

from ..env import (
    CartPole,
    Environment,
    LeanPolicy,
    Policy,
    TabularPolicy,
    UniformPolicy,
    random_mdp,
    random_policy,
    skewed_policy,
    two_state_mdp,
)


def parse_spec(spec) -> tuple[str, dict]:
    if isinstance(spec, dict):
        spec = dict(spec)
        return str(spec.pop("id")), spec
    name, _, rest = str(spec).partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        params[key.strip()] = _coerce(val.strip())
    return name.strip(), params


def format_spec(spec) -> str:
    name, params = parse_spec(spec)
    if not params:
        return name
    return name + ":" + ",".join(f"{k}={params[k]}" for k in sorted(params))


def _coerce(val: str):
    for cast in (int, float):
        try:
            return cast(val)
        except ValueError:
            pass
    if val.lower() in ("true", "false"):
        return val.lower() == "true"
    return val


def make_env(spec) -> Environment:
    name, kw = parse_spec(spec)
    if name == "twostate":
        return two_state_mdp(**kw)
    if name == "random-mdp":
        kw.setdefault("num_states", 5)
        kw.setdefault("num_actions", 2)
        kw.setdefault("horizon", 100)
        return random_mdp(**kw, name=format_spec(spec))
    if name == "cartpole":
        return CartPole(**kw)
    raise ValueError(f"unknown environment {name!r}")


def make_policy(spec, env: Environment) -> Policy:
    name, kw = parse_spec(spec)
    A = env.num_actions
    if name == "uniform":
        return UniformPolicy(A)
    if name == "lean":
        return LeanPolicy(p_right_when_left=kw.get("p", 0.9), left_sign=kw.get("left_sign", 1),
                          name=format_spec(spec))
    if not env.tabular:
        raise ValueError(f"policy {name!r} needs a tabular environment")
    S = env.num_states
    if name in ("switch", "action"):
        a = int(kw.get("a", 1))
        m = np.zeros((S, A))
        m[:, a] = 1.0
        return TabularPolicy(m, name=format_spec(spec))
    if name == "random":
        p = random_policy(S, A, seed=kw.get("seed", 0), concentration=kw.get("concentration", 1.0))
        return TabularPolicy(p.matrix, name=format_spec(spec))
    if name == "skewed":
        p = skewed_policy(S, A, p=kw.get("p", 0.8), seed=kw.get("seed", 0))
        return TabularPolicy(p.matrix, name=format_spec(spec))
    raise ValueError(f"unknown policy {name!r}")
