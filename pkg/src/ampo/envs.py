"""CartPole and Acrobot with the classic-control equations of motion.

Both environments are stateless objects acting on ``EnvState`` values, and
every operation is vectorized over a leading batch axis.  A single
environment is just a batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError

__all__ = ["EnvState", "CartPole", "Acrobot", "make_env", "ENV_NAMES", "rollout_returns"]

MAX_STEPS = 500


@dataclass(frozen=True)
class EnvState:
    """Physical coordinates ``(n, 4)`` and per-episode step counters ``(n,)``."""

    x: np.ndarray
    steps: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[0]


def _check_actions(action, n_actions: int, n: int) -> np.ndarray:
    a = np.asarray(action)
    a = np.broadcast_to(a, (n,)) if a.ndim == 0 else a
    if a.shape != (n,) or not np.issubdtype(a.dtype, np.integer) or np.any((a < 0) | (a >= n_actions)):
        raise ValueError(f"actions must be integers in [0, {n_actions}), got {action!r}")
    return a


class CartPole:
    """Cart with a hinged pole; +1 reward per step, Euler integration at tau = 0.02."""

    name = "cartpole"
    n_actions = 2
    obs_dim = 4
    gravity = 9.8
    masscart = 1.0
    masspole = 0.1
    length = 0.5  # half the pole length
    force_mag = 10.0
    tau = 0.02
    x_limit = 2.4
    theta_limit = 12 * 2 * np.pi / 360

    def reset(self, rng: np.random.Generator, n: int = 1) -> EnvState:
        return EnvState(rng.uniform(-0.05, 0.05, size=(n, 4)), np.zeros(n, dtype=int))

    def observe(self, state: EnvState) -> np.ndarray:
        return state.x.copy()

    def terminated(self, state: EnvState) -> np.ndarray:
        x, th = state.x[:, 0], state.x[:, 2]
        return (np.abs(x) > self.x_limit) | (np.abs(th) > self.theta_limit)

    def step(self, state: EnvState, action):
        a = _check_actions(action, 2, state.n)
        x, x_dot, th, th_dot = state.x.T
        force = np.where(a == 1, self.force_mag, -self.force_mag)
        total = self.masscart + self.masspole
        pml = self.masspole * self.length
        cos, sin = np.cos(th), np.sin(th)
        temp = (force + pml * th_dot**2 * sin) / total
        th_acc = (self.gravity * sin - cos * temp) / (self.length * (4.0 / 3.0 - self.masspole * cos**2 / total))
        x_acc = temp - pml * th_acc * cos / total
        nxt = np.stack(
            [x + self.tau * x_dot, x_dot + self.tau * x_acc, th + self.tau * th_dot, th_dot + self.tau * th_acc],
            axis=1,
        )
        out = EnvState(nxt, state.steps + 1)
        done = self.terminated(out) | (out.steps >= MAX_STEPS)
        return out, np.ones(state.n), done


class Acrobot:
    """Two-link pendulum actuated at the elbow; -1 reward per step, RK4 at tau = 0.2.

    Angles are 0 when hanging straight down.  The goal is reached when the tip
    rises one link length above the pivot: ``-cos(th1) - cos(th1 + th2) > 1``.
    """

    name = "acrobot"
    n_actions = 3
    obs_dim = 6
    dt = 0.2
    link_length_1 = 1.0
    link_mass_1 = 1.0
    link_mass_2 = 1.0
    link_com_1 = 0.5
    link_com_2 = 0.5
    link_moi = 1.0
    gravity = 9.8
    max_vel_1 = 4 * np.pi
    max_vel_2 = 9 * np.pi
    torques = np.array([-1.0, 0.0, 1.0])

    def reset(self, rng: np.random.Generator, n: int = 1) -> EnvState:
        return EnvState(rng.uniform(-0.1, 0.1, size=(n, 4)), np.zeros(n, dtype=int))

    def observe(self, state: EnvState) -> np.ndarray:
        th1, th2, d1, d2 = state.x.T
        return np.stack([np.cos(th1), np.sin(th1), np.cos(th2), np.sin(th2), d1, d2], axis=1)

    def terminated(self, state: EnvState) -> np.ndarray:
        th1, th2 = state.x[:, 0], state.x[:, 1]
        return -np.cos(th1) - np.cos(th1 + th2) > 1.0

    def _mass_terms(self, th2):
        m1, m2, l1 = self.link_mass_1, self.link_mass_2, self.link_length_1
        lc1, lc2, I = self.link_com_1, self.link_com_2, self.link_moi
        d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * np.cos(th2)) + 2 * I
        d2 = m2 * (lc2**2 + l1 * lc2 * np.cos(th2)) + I
        return d1, d2

    def derivatives(self, s: np.ndarray, torque: np.ndarray) -> np.ndarray:
        m1, m2, l1 = self.link_mass_1, self.link_mass_2, self.link_length_1
        lc1, lc2, I, g = self.link_com_1, self.link_com_2, self.link_moi, self.gravity
        th1, th2, dth1, dth2 = s.T
        d1, d2 = self._mass_terms(th2)
        phi2 = m2 * lc2 * g * np.cos(th1 + th2 - np.pi / 2)
        phi1 = (
            -m2 * l1 * lc2 * dth2**2 * np.sin(th2)
            - 2 * m2 * l1 * lc2 * dth2 * dth1 * np.sin(th2)
            + (m1 * lc1 + m2 * l1) * g * np.cos(th1 - np.pi / 2)
            + phi2
        )
        ddth2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dth1**2 * np.sin(th2) - phi2) / (
            m2 * lc2**2 + I - d2**2 / d1
        )
        ddth1 = -(d2 * ddth2 + phi1) / d1
        return np.stack([dth1, dth2, ddth1, ddth2], axis=1)

    def integrate(self, s: np.ndarray, torque: np.ndarray) -> np.ndarray:
        """One classical RK4 step of length ``dt`` with the torque held fixed."""
        h = self.dt
        k1 = self.derivatives(s, torque)
        k2 = self.derivatives(s + h / 2 * k1, torque)
        k3 = self.derivatives(s + h / 2 * k2, torque)
        k4 = self.derivatives(s + h * k3, torque)
        return s + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    def energy(self, s: np.ndarray) -> np.ndarray:
        """Kinetic plus potential energy of the unclipped dynamics."""
        m1, m2, l1 = self.link_mass_1, self.link_mass_2, self.link_length_1
        lc1, lc2, I, g = self.link_com_1, self.link_com_2, self.link_moi, self.gravity
        th1, th2, dth1, dth2 = np.atleast_2d(s).T
        d1, d2 = self._mass_terms(th2)
        d3 = m2 * lc2**2 + I
        kinetic = 0.5 * (d1 * dth1**2 + 2 * d2 * dth1 * dth2 + d3 * dth2**2)
        potential = -(m1 * lc1 + m2 * l1) * g * np.cos(th1) - m2 * lc2 * g * np.cos(th1 + th2)
        return kinetic + potential

    def step(self, state: EnvState, action):
        a = _check_actions(action, 3, state.n)
        s = self.integrate(state.x, self.torques[a])
        s[:, 0] = _wrap(s[:, 0])
        s[:, 1] = _wrap(s[:, 1])
        s[:, 2] = np.clip(s[:, 2], -self.max_vel_1, self.max_vel_1)
        s[:, 3] = np.clip(s[:, 3], -self.max_vel_2, self.max_vel_2)
        out = EnvState(s, state.steps + 1)
        done = self.terminated(out) | (out.steps >= MAX_STEPS)
        return out, -np.ones(state.n), done


def _wrap(th):
    return (th + np.pi) % (2 * np.pi) - np.pi


ENV_NAMES = ("cartpole", "acrobot")


def make_env(name: str):
    if name == "cartpole":
        return CartPole()
    if name == "acrobot":
        return Acrobot()
    raise ConfigError(f"unknown environment {name!r}; choose from {ENV_NAMES}")


def rollout_returns(env, policy, n_episodes: int, rng: np.random.Generator) -> np.ndarray:
    """Undiscounted returns of ``n_episodes`` run in lockstep.

    ``policy(obs, rng)`` maps a batch of observations to integer actions.
    """
    state = env.reset(rng, n_episodes)
    live = np.ones(n_episodes, dtype=bool)
    returns = np.zeros(n_episodes)
    while live.any():
        idx = np.flatnonzero(live)
        sub = EnvState(state.x[idx], state.steps[idx])
        nxt, r, done = env.step(sub, policy(env.observe(sub), rng))
        returns[idx] += r
        state.x[idx] = nxt.x
        state.steps[idx] = nxt.steps
        live[idx[done]] = False
    return returns
