from __future__ import annotations

import numpy as np


class Environment:
    """Episodic environment driven by explicit uniform noise.

    Subclasses implement the batched :meth:`reset_batch` / :meth:`step_batch`
    pair, which consume ``reset_noise_dim`` and ``step_noise_dim`` uniforms
    per episode.  Feeding the noise in from outside is what lets the sampler
    give every episode its own RNG stream while simulating a whole batch at
    once.  The scalar :meth:`reset` and :meth:`step` draw the same amount of
    noise from ``rng`` and defer to the batched versions.

    An episode ends when ``step`` reports ``terminated`` (the entered state is
    not recorded) or after ``horizon_cap`` actions.
    """

    name = "env"
    num_actions: int
    horizon_cap: int
    state_shape: tuple = ()
    state_dtype = np.int64
    reset_noise_dim = 1
    step_noise_dim = 0

    @property
    def tabular(self) -> bool:
        return self.state_shape == ()

    def reset_batch(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def step_batch(self, states: np.ndarray, actions: np.ndarray, u: np.ndarray):
        """Return ``(next_states, rewards, terminated)`` for a batch."""
        raise NotImplementedError

    def reset(self, rng: np.random.Generator):
        return self.reset_batch(rng.random((1, self.reset_noise_dim)))[0]

    def step(self, state, action: int, rng: np.random.Generator):
        nxt, r, done = self.step_batch(
            np.asarray([state], dtype=self.state_dtype),
            np.asarray([action]),
            rng.random((1, self.step_noise_dim)),
        )
        return nxt[0], float(r[0]), bool(done[0])
