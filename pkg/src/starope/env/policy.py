"""Policies: state-conditional action distributions.

Every policy is evaluated in batches through :meth:`Policy.probs`, which maps
an array of states to an ``[N, num_actions]`` matrix.  The scalar
:meth:`Policy.prob` and :meth:`Policy.sample` are thin wrappers, so a logged
behavior probability and a later evaluation of the same policy on the same
state agree bit-for-bit.
"""

from __future__ import annotations

import numpy as np

PROB_ATOL = 1e-12


def inverse_cdf(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise categorical draw: first index whose cumulative mass exceeds ``u``."""
    cdf = np.cumsum(probs, axis=-1)
    cdf = cdf / cdf[..., -1:]
    return (cdf <= u[..., None]).sum(axis=-1)


class Policy:
    """Base class; subclasses implement :meth:`probs`."""

    name = "policy"

    def __init__(self, num_actions: int):
        if num_actions < 1:
            raise ValueError("num_actions must be positive")
        self.num_actions = int(num_actions)

    def probs(self, states) -> np.ndarray:
        raise NotImplementedError

    def prob(self, state, action: int) -> float:
        return float(self.probs(np.asarray([state]))[0, action])

    def sample(self, state, rng: np.random.Generator) -> int:
        row = self.probs(np.asarray([state]))
        check_rows(row)
        return int(inverse_cdf(row, np.asarray([rng.random()]))[0])

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


def check_rows(p: np.ndarray) -> None:
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError("policy produced negative or non-finite probabilities")
    if np.any(p.sum(axis=-1) <= PROB_ATOL):
        raise ValueError("degenerate policy: zero probability for every action")


class TabularPolicy(Policy):
    """Policy given by an explicit ``[num_states, num_actions]`` matrix."""

    def __init__(self, matrix, name: str = "tabular"):
        matrix = np.array(matrix, dtype=float)
        if matrix.ndim != 2:
            raise ValueError("policy matrix must be 2-D")
        if np.any(matrix < 0) or not np.all(np.isfinite(matrix)):
            raise ValueError("policy matrix must be finite and non-negative")
        if np.any(np.abs(matrix.sum(axis=1) - 1.0) > PROB_ATOL):
            raise ValueError("policy rows must sum to 1")
        super().__init__(matrix.shape[1])
        matrix.setflags(write=False)
        self.matrix = matrix
        self.name = name

    @property
    def num_states(self) -> int:
        return self.matrix.shape[0]

    def probs(self, states) -> np.ndarray:
        states = np.asarray(states)
        if states.dtype.kind not in "iu":
            raise TypeError("tabular policy needs integer states")
        return self.matrix[states]


class UniformPolicy(Policy):
    """Uniform over actions, for any state space."""

    def __init__(self, num_actions: int, name: str = "uniform"):
        super().__init__(num_actions)
        self.name = name

    def probs(self, states) -> np.ndarray:
        n = np.asarray(states).shape[0]
        return np.full((n, self.num_actions), 1.0 / self.num_actions)


class LeanPolicy(Policy):
    """Two-action rule for cart-pole style states.

    Pushes right (action 1) with probability ``p_right_when_left`` when the pole
    leans left and with probability ``1 - p_right_when_left`` otherwise.  The
    lean is read from ``state[angle_index]``; ``left_sign`` says which sign of
    that component counts as leaning left.
    """

    def __init__(self, p_right_when_left: float = 0.9, angle_index: int = 2,
                 left_sign: int = 1, name: str = "lean"):
        super().__init__(2)
        if not 0.0 <= p_right_when_left <= 1.0:
            raise ValueError("p_right_when_left must be a probability")
        if left_sign not in (-1, 1):
            raise ValueError("left_sign must be +1 or -1")
        self.p_right_when_left = float(p_right_when_left)
        self.angle_index = int(angle_index)
        self.left_sign = int(left_sign)
        self.name = name

    def probs(self, states) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        left = self.left_sign * states[:, self.angle_index] > 0
        p_right = np.where(left, self.p_right_when_left, 1.0 - self.p_right_when_left)
        return np.stack([1.0 - p_right, p_right], axis=1)
