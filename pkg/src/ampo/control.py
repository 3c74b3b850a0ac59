"""AMPO actor-critic for the classic-control environments.

The actor is an MLP producing one score per action, ``f(s, .)``; the policy
is the Bregman projection of ``eta * f(s, .)``.  Each update collects a
rollout from vectorized environments, estimates advantages with GAE and
regresses the actor onto

    A(s, a) + eta_t^-1 max(eta_{t-1} f^t(s, a), phi^-1(0) - lam^t_s)

on the sampled pairs, where ``f^t`` and ``lam^t`` are frozen at collection
time.  Advantages stand in for Q; the two differ by a per-state constant,
which the projection ignores.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .engine import Constant, gae_advantages
from .envs import EnvState, make_env
from .exceptions import ConfigError, NumericalError
from .mirror_maps import OmegaPotential, parse_mirror_map
from .projection import DEFAULT_PRECISION, project

__all__ = ["Mlp", "Adam", "ControlConfig", "ControlResult", "train", "train_seeds", "final_window_mean"]


class Mlp:
    """Tanh MLP with orthogonal initialization and hand-written backprop."""

    def __init__(self, sizes, rng: np.random.Generator, out_scale: float = 1.0):
        self.params = []
        n_layers = len(sizes) - 1
        for i, (m, n) in enumerate(zip(sizes, sizes[1:])):
            gain = out_scale if i == n_layers - 1 else math.sqrt(2.0)
            q, r = np.linalg.qr(rng.normal(size=(max(m, n), min(m, n))))
            q = q * np.sign(np.diag(r))
            W = gain * (q if m >= n else q.T)[:m, :n]
            self.params += [W, np.zeros(n)]

    def forward(self, x):
        acts = [np.asarray(x, dtype=float)]
        h = acts[0]
        n_layers = len(self.params) // 2
        for i in range(n_layers):
            h = h @ self.params[2 * i] + self.params[2 * i + 1]
            if i < n_layers - 1:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, acts, dout):
        """Gradients of ``sum(dout * output)`` w.r.t. every parameter."""
        grads = [None] * len(self.params)
        n_layers = len(self.params) // 2
        g = dout
        for i in range(n_layers - 1, -1, -1):
            grads[2 * i] = acts[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            if i:
                g = (g @ self.params[2 * i].T) * (1.0 - acts[i] ** 2)
        return grads


class Adam:
    def __init__(self, params, lr: float, betas=(0.9, 0.999), eps: float = 1e-5):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.k = 0

    def step(self, params, grads, lr: float | None = None):
        lr = self.lr if lr is None else lr
        self.k += 1
        c1 = 1 - self.b1**self.k
        c2 = 1 - self.b2**self.k
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _clip_by_norm(grads, max_norm):
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if not math.isfinite(norm):
        raise NumericalError("non-finite gradient")
    if max_norm and norm > max_norm:
        grads = [g * (max_norm / norm) for g in grads]
    return grads


@dataclass
class ControlConfig:
    """Hyperparameters of one control run.

    ``inner`` selects the regression solver: ``"adam"`` runs minibatch Adam
    epochs; ``"sgd"`` runs plain single-sample SGD over the rollout.
    """

    env: str = "cartpole"
    mirror: OmegaPotential = field(default_factory=lambda: OmegaPotential("entropy"))
    schedule: object = field(default_factory=lambda: Constant(1.0))
    total_steps: int = 500_000
    n_envs: int = 16
    n_steps: int = 128
    epochs: int = 4
    minibatches: int = 4
    gamma: float = 0.99
    gae_lambda: float = 0.95
    lr: float = 2.5e-3
    anneal_lr: bool = True
    hidden: int = 64
    max_grad_norm: float = 0.5
    normalize_advantages: bool = True
    inner: str = "adam"
    sgd_rate: float = 1e-3
    precision: float = DEFAULT_PRECISION
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.mirror, str):
            self.mirror = parse_mirror_map(self.mirror)
        make_env(self.env)
        if self.inner not in ("adam", "sgd"):
            raise ConfigError(f"inner must be 'adam' or 'sgd', got {self.inner!r}")
        if self.total_steps < self.n_envs * self.n_steps:
            raise ConfigError("total_steps must cover at least one rollout")
        if (self.n_envs * self.n_steps) % self.minibatches:
            raise ConfigError("rollout size must be divisible by the number of minibatches")
        if not 0 <= self.gamma < 1 or not 0 <= self.gae_lambda <= 1:
            raise ConfigError("gamma must lie in [0, 1) and gae_lambda in [0, 1]")

    @property
    def n_updates(self) -> int:
        return self.total_steps // (self.n_envs * self.n_steps)


@dataclass
class ControlResult:
    """Per-update mean return of the episodes finished during that update (NaN if none)."""

    returns: np.ndarray
    episodes: np.ndarray  # number of finished episodes per update
    steps: np.ndarray  # environment steps taken by the end of each update


def _policy(cfg: ControlConfig, actor: Mlp, obs, eta: float):
    scores = actor(obs)
    proj = project(eta * scores, cfg.mirror, cfg.precision)
    return scores, proj.dist, np.atleast_1d(proj.lam)


def _sample(dist, rng):
    cdf = np.cumsum(dist, axis=1)
    u = rng.random(len(dist)) * cdf[:, -1]
    return np.minimum((cdf < u[:, None]).sum(axis=1), dist.shape[1] - 1)


def train(cfg: ControlConfig) -> ControlResult:
    """Run one seeded AMPO training loop and return its learning curve."""
    env = make_env(cfg.env)
    rng = np.random.default_rng(cfg.seed)
    actor = Mlp([env.obs_dim, cfg.hidden, cfg.hidden, env.n_actions], rng, out_scale=0.01)
    critic = Mlp([env.obs_dim, cfg.hidden, cfg.hidden, 1], rng, out_scale=1.0)
    opt_a = Adam(actor.params, cfg.lr)
    opt_c = Adam(critic.params, cfg.lr)
    floor0 = float(cfg.mirror.phi_inv(0.0))

    state = env.reset(rng, cfg.n_envs)
    ep_ret = np.zeros(cfg.n_envs)
    N, T = cfg.n_envs, cfg.n_steps
    curve = np.full(cfg.n_updates, np.nan)
    counts = np.zeros(cfg.n_updates, dtype=int)
    eta_prev = float(cfg.schedule(0))

    for u in range(cfg.n_updates):
        eta = float(cfg.schedule(u))
        obs_buf = np.empty((T, N, env.obs_dim))
        act_buf = np.empty((T, N), dtype=int)
        rew_buf = np.empty((T, N))
        done_buf = np.empty((T, N))
        val_buf = np.empty((T, N))
        old_buf = np.empty((T, N))  # eta_{t-1} f^t(s, a) at collection time
        lam_buf = np.empty((T, N))
        boot_buf = np.zeros((T, N))  # value of the truncated next state
        finished = []
        for k in range(T):
            obs = env.observe(state)
            # pi^t is the projection of eta_{t-1} f^t
            scores, dist, lam = _policy(cfg, actor, obs, eta_prev)
            a = _sample(dist, rng)
            obs_buf[k], act_buf[k] = obs, a
            val_buf[k] = critic(obs)[:, 0]
            old_buf[k] = eta_prev * scores[np.arange(N), a]
            lam_buf[k] = lam
            state, r, done = env.step(state, a)
            ep_ret += r
            rew_buf[k] = r
            term = env.terminated(state)
            trunc = done & ~term
            if trunc.any():
                # bootstrap through the time limit rather than treating it as failure
                boot_buf[k, trunc] = critic(env.observe(EnvState(state.x[trunc], state.steps[trunc])))[:, 0]
            done_buf[k] = done
            if done.any():
                finished.extend(ep_ret[done].tolist())
                ep_ret[done] = 0.0
                fresh = env.reset(rng, int(done.sum()))
                state.x[done] = fresh.x
                state.steps[done] = 0
        last_v = critic(env.observe(state))[:, 0]
        rew_boot = rew_buf + cfg.gamma * boot_buf
        adv = gae_advantages(rew_boot, val_buf, cfg.gamma, cfg.gae_lambda, last_value=last_v, dones=done_buf)
        returns = adv + val_buf
        if finished:
            curve[u] = float(np.mean(finished))
            counts[u] = len(finished)

        B = N * T
        obs_f = obs_buf.reshape(B, -1)
        act_f = act_buf.reshape(B)
        adv_f = adv.reshape(B)
        if cfg.normalize_advantages:
            adv_f = (adv_f - adv_f.mean()) / (adv_f.std() + 1e-8)
        # the AMPO regression target, frozen for this update
        target = adv_f + np.maximum(old_buf.reshape(B), floor0 - lam_buf.reshape(B)) / eta
        ret_f = returns.reshape(B)
        lr = cfg.lr * (1.0 - u / cfg.n_updates) if cfg.anneal_lr else cfg.lr
        if cfg.inner == "adam":
            mb = B // cfg.minibatches
            for _ in range(cfg.epochs):
                perm = rng.permutation(B)
                for j in range(cfg.minibatches):
                    idx = perm[j * mb : (j + 1) * mb]
                    _actor_update(actor, opt_a, obs_f[idx], act_f[idx], target[idx], lr, cfg.max_grad_norm)
                    _critic_update(critic, opt_c, obs_f[idx], ret_f[idx], lr, cfg.max_grad_norm)
        else:
            for _ in range(cfg.epochs):
                for i in rng.permutation(B):
                    _actor_sgd(actor, obs_f[i : i + 1], act_f[i : i + 1], target[i : i + 1], cfg.sgd_rate)
                perm = rng.permutation(B)
                mb = B // cfg.minibatches
                for j in range(cfg.minibatches):
                    idx = perm[j * mb : (j + 1) * mb]
                    _critic_update(critic, opt_c, obs_f[idx], ret_f[idx], lr, cfg.max_grad_norm)
        eta_prev = eta
    steps = (np.arange(cfg.n_updates) + 1) * N * T
    return ControlResult(curve, counts, steps)


def _actor_grads(actor: Mlp, obs, act, target):
    out, acts = actor.forward(obs)
    rows = np.arange(len(act))
    resid = out[rows, act] - target
    dout = np.zeros_like(out)
    dout[rows, act] = 2.0 * resid / len(act)
    return actor.backward(acts, dout)


def _actor_update(actor, opt, obs, act, target, lr, max_norm):
    opt.step(actor.params, _clip_by_norm(_actor_grads(actor, obs, act, target), max_norm), lr)


def _actor_sgd(actor, obs, act, target, rate):
    grads = _actor_grads(actor, obs, act, target)
    for p, g in zip(actor.params, grads):
        p -= rate * 0.5 * g  # gradient of the squared residual, halved
    if not np.isfinite(actor.params[-1]).all():
        raise NumericalError("actor SGD diverged")


def _critic_update(critic, opt, obs, ret, lr, max_norm):
    out, acts = critic.forward(obs)
    dout = 2.0 * (out[:, 0] - ret)[:, None] / len(ret)
    opt.step(critic.params, _clip_by_norm(critic.backward(acts, dout), max_norm), lr)


def train_seeds(cfg: ControlConfig, seeds, workers: int = 1) -> list[ControlResult]:
    """Independent runs per seed; each worker thread owns its run."""
    from dataclasses import replace

    cfgs = [replace(cfg, seed=int(s)) for s in seeds]
    if workers <= 1:
        return [train(c) for c in cfgs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(train, cfgs))


def final_window_mean(result: ControlResult, frac: float = 0.1) -> float:
    """Mean return over episodes finished in the last ``frac`` of updates."""
    n = len(result.returns)
    lo = n - max(1, int(round(frac * n)))
    r, c = result.returns[lo:], result.episodes[lo:]
    m = c > 0
    if not m.any():
        return float("nan")
    return float(np.sum(r[m] * c[m]) / np.sum(c[m]))
