from __future__ import annotations

import math

import numpy as np

from .base import Environment


class CartPole(Environment):
    """Classic cart-pole balancing with Euler integration.

    State is ``(x, x_dot, theta, theta_dot)``; action 0 pushes left and 1
    pushes right.  Every step pays reward 1.  The episode fails when the
    pole passes 12 degrees or the cart leaves ``[-2.4, 2.4]``.
    """

    gravity = 9.8
    masscart = 1.0
    masspole = 0.1
    length = 0.5  # half the pole length
    force_mag = 10.0
    tau = 0.02
    theta_threshold = 12 * 2 * math.pi / 360
    x_threshold = 2.4

    num_actions = 2
    state_shape = (4,)
    state_dtype = np.float64
    reset_noise_dim = 4
    step_noise_dim = 0

    def __init__(self, horizon_cap: int = 50, name: str = "cartpole"):
        if horizon_cap < 1:
            raise ValueError("horizon_cap must be positive")
        self.horizon_cap = int(horizon_cap)
        self.name = name

    @property
    def state_dim(self) -> int:
        return 4

    def reset_batch(self, u):
        return -0.05 + 0.1 * np.asarray(u, dtype=float)

    def step_batch(self, states, actions, u=None):
        x, x_dot, theta, theta_dot = np.asarray(states, dtype=float).T
        force = np.where(np.asarray(actions) == 1, self.force_mag, -self.force_mag)
        total_mass = self.masspole + self.masscart
        polemass_length = self.masspole * self.length
        cos, sin = np.cos(theta), np.sin(theta)
        temp = (force + polemass_length * theta_dot**2 * sin) / total_mass
        theta_acc = (self.gravity * sin - cos * temp) / (
            self.length * (4.0 / 3.0 - self.masspole * cos**2 / total_mass)
        )
        x_acc = temp - polemass_length * theta_acc * cos / total_mass
        x = x + self.tau * x_dot
        x_dot = x_dot + self.tau * x_acc
        theta = theta + self.tau * theta_dot
        theta_dot = theta_dot + self.tau * theta_acc
        nxt = np.stack([x, x_dot, theta, theta_dot], axis=1)
        done = (np.abs(x) > self.x_threshold) | (np.abs(theta) > self.theta_threshold)
        return nxt, np.ones(len(nxt)), done
