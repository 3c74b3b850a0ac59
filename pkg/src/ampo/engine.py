"""The AMPO outer loop on tabular MDPs.

Each iteration regresses scores onto ``Q^t + eta_t^-1 grad h(pi^t)`` and then
projects ``eta_t f^{t+1}`` state by state onto the simplex.  The regression
target is built from the previous scores and normalizers,

    Q^t + eta_t^-1 max(eta_{t-1} f^t, phi^-1(0) - lam^t),

which equals ``grad h(pi^t)`` up to a per-state constant and never evaluates
``phi^-1`` at zero probabilities.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from .approx import RegressionProblem, ShallowRelu, fit_exact, fit_sgd, pair_features, weighted_loss
from .exceptions import ConfigError, NumericalError, SupportError
from .mdp import (
    TabularMdp,
    concentrability,
    exact_evaluate,
    optimal_policy,
    ratio_sup,
    uniform_policy,
    visitation_distribution,
)
from .mirror_maps import OmegaPotential, bregman_divergence_extended, check_simplex, parse_mirror_map
from .projection import DEFAULT_PRECISION, project

__all__ = [
    "Constant",
    "Sequence",
    "Geometric",
    "parse_schedule",
    "AmpoConfig",
    "AmpoState",
    "IterationRecord",
    "init_state",
    "regression_target_general",
    "regression_target_potential",
    "ampo_step",
    "iterate",
    "run",
    "mc_q_sample",
    "mc_q_samples",
    "gae_advantages",
    "CSV_COLUMNS",
    "records_to_csv",
    "write_csv",
    "read_csv",
]


# step-size schedules


@dataclass(frozen=True)
class Constant:
    eta0: float

    def __call__(self, t: int) -> float:
        return self.eta0


@dataclass(frozen=True)
class Sequence:
    """Explicit non-decreasing step-sizes; the last one repeats past the end."""

    etas: tuple

    def __post_init__(self):
        etas = tuple(float(e) for e in self.etas)
        if not etas or any(e <= 0 for e in etas):
            raise ConfigError("step-sizes must be positive")
        if any(b < a for a, b in zip(etas, etas[1:])):
            raise ConfigError("step-size sequence must be non-decreasing")
        object.__setattr__(self, "etas", etas)

    def __call__(self, t: int) -> float:
        return self.etas[min(t, len(self.etas) - 1)]


@dataclass(frozen=True)
class Geometric:
    """``eta_t = eta0 * ratio**t``."""

    eta0: float
    ratio: float

    def __post_init__(self):
        if self.ratio < 1:
            raise ConfigError(f"geometric ratio must be >= 1, got {self.ratio}")

    @classmethod
    def from_mismatch(cls, eta0: float, nu: float) -> "Geometric":
        """Ratio ``nu / (nu - 1)``, the slowest growth giving the linear rate for mismatch ``nu``."""
        if not nu > 1:
            raise ConfigError(f"mismatch bound must exceed 1, got {nu}")
        return cls(eta0, nu / (nu - 1.0))

    def __call__(self, t: int) -> float:
        return self.eta0 * self.ratio**t


def parse_schedule(token: str, eta0: float = 1.0):
    """``"constant"`` or ``"geometric:<nu>"`` (ratio nu/(nu-1))."""
    name, sep, arg = token.strip().partition(":")
    if eta0 <= 0:
        raise ConfigError("eta0 must be positive")
    if name == "constant" and not sep:
        return Constant(eta0)
    if name == "geometric" and sep:
        try:
            nu = float(arg)
        except ValueError:
            raise ConfigError(f"bad schedule token {token!r}") from None
        return Geometric.from_mismatch(eta0, nu)
    raise ConfigError(f"unknown schedule {token!r}")


@dataclass
class AmpoConfig:
    """Inputs of one AMPO run on a tabular MDP.

    ``sampling`` is ``"uniform"`` (over state-action pairs), ``"onpolicy"``
    (``d^t(s) pi^t(a|s)``) or an explicit (S, A) weight table.
    ``evaluation`` is ``"exact"`` or ``"mc"`` (``mc_samples`` unbiased
    rollouts per pair).
    """

    mirror: OmegaPotential = field(default_factory=lambda: OmegaPotential("entropy"))
    schedule: object = field(default_factory=lambda: Constant(1.0))
    family: str = "tabular"
    features: np.ndarray | None = None
    evaluation: str = "exact"
    mc_samples: int = 100
    sampling: object = "uniform"
    precision: float = DEFAULT_PRECISION
    iters: int = 50
    seed: int = 0
    init_policy: np.ndarray | None = None
    width: int = 64
    eps_a: float = 1.0
    sgd_steps: int = 2000
    sgd_rate: float = 0.05

    def __post_init__(self):
        if isinstance(self.mirror, str):
            self.mirror = parse_mirror_map(self.mirror)
        if self.iters < 1:
            raise ConfigError("iters must be >= 1")
        if self.family not in ("tabular", "linear", "relu"):
            raise ConfigError(f"unknown approximator family {self.family!r}")
        if self.family == "linear" and self.features is None:
            raise ConfigError("the linear family needs a feature table")
        if self.evaluation not in ("exact", "mc"):
            raise ConfigError(f"unknown evaluation mode {self.evaluation!r}")
        if isinstance(self.sampling, str) and self.sampling not in ("uniform", "onpolicy"):
            raise ConfigError(f"unknown sampling distribution {self.sampling!r}")


@dataclass
class AmpoState:
    t: int
    pi: np.ndarray
    scores: np.ndarray | None  # f^t on every (s, a)
    lam: np.ndarray | None  # lam^t per state
    eta_prev: float
    net: ShallowRelu | None = None


@dataclass
class IterationRecord:
    """Diagnostics of iteration t (policy pi^t and the step that produced pi^{t+1}).

    ``nu`` is the mismatch ``max_s d*(s) / d^{t+1}(s)``; ``c_v`` is the largest of
    ``c_v_pairs``, the concentrability of v^t against (d*, pi*), (d^{t+1},
    pi^{t+1}), (d*, pi^t) and (d^{t+1}, pi^t).
    """

    t: int
    eta: float
    value: float
    gap: float
    bregman_to_opt: float
    eps_approx: float
    c_v: float
    nu: float
    wall_ms: float
    c_v_pairs: tuple = ()
    lam: np.ndarray | None = None
    policy: np.ndarray | None = None
    next_policy: np.ndarray | None = None
    next_scores: np.ndarray | None = None


def init_state(mdp: TabularMdp, cfg: AmpoConfig) -> AmpoState:
    """Initial policy (uniform by default) with ``f^0 = phi^-1(pi^0)``, ``lam^0 = 0``, ``eta_{-1} = 1``."""
    S, A = mdp.n_states, mdp.n_actions
    pi0 = uniform_policy(S, A) if cfg.init_policy is None else check_simplex(cfg.init_policy).copy()
    if pi0.shape != (S, A):
        raise ConfigError(f"initial policy has shape {pi0.shape}, expected {(S, A)}")
    f0 = cfg.mirror.phi_inv(pi0)
    net = None
    if cfg.family == "relu":
        feats = _features(mdp, cfg)
        net = ShallowRelu.init(cfg.width, feats.shape[-1], cfg.seed, cfg.eps_a)
    if np.all(np.isfinite(f0)):
        return AmpoState(0, pi0, f0, np.zeros(S), 1.0, net)
    # boundary start under an entropy-like map: only the general target is available
    return AmpoState(0, pi0, None, None, 1.0, net)


def regression_target_general(q_est, pi_t, eta_t: float, p: OmegaPotential) -> np.ndarray:
    """``Q + eta_t^-1 phi^-1(pi^t)``; needs finite ``phi^-1`` on every entry of pi^t."""
    g = p.phi_inv(check_simplex(pi_t))
    if not np.all(np.isfinite(g)):
        raise SupportError(
            f"{p.token}: pi^t has zero-probability actions; use regression_target_potential"
        )
    return np.asarray(q_est, dtype=float) + g / eta_t


def regression_target_potential(q_est, f_t, eta_prev: float, eta_t: float, lam_t, p: OmegaPotential) -> np.ndarray:
    """``Q + eta_t^-1 max(eta_{t-1} f^t, phi^-1(0) - lam^t)`` (per-state constant dropped)."""
    f_t = np.asarray(f_t, dtype=float)
    lam_t = np.asarray(lam_t, dtype=float)
    if not np.all(np.isfinite(f_t)) or not np.all(np.isfinite(lam_t)):
        raise NumericalError("previous scores and normalizers must be finite")
    floor = float(p.phi_inv(0.0)) - lam_t[..., None]
    target = np.asarray(q_est, dtype=float) + np.maximum(eta_prev * f_t, floor) / eta_t
    if not np.all(np.isfinite(target)):
        raise NumericalError("regression target is not finite")
    return target


def _features(mdp: TabularMdp, cfg: AmpoConfig) -> np.ndarray:
    if cfg.features is not None:
        return np.asarray(cfg.features, dtype=float)
    return pair_features(mdp.n_states, mdp.n_actions)


def _sampling_weights(cfg: AmpoConfig, mdp: TabularMdp, pi: np.ndarray) -> np.ndarray:
    if isinstance(cfg.sampling, str):
        if cfg.sampling == "uniform":
            return np.full(pi.shape, 1.0 / pi.size)
        w = visitation_distribution(mdp, pi)[:, None] * pi
        return w / w.sum()
    w = np.asarray(cfg.sampling, dtype=float)
    if w.shape != pi.shape:
        raise ConfigError(f"sampling table has shape {w.shape}, expected {pi.shape}")
    return w / w.sum()


@dataclass
class _Context:
    pi_star: np.ndarray
    v_star: float
    d_star: np.ndarray
    rng: np.random.Generator


def _make_context(mdp: TabularMdp, cfg: AmpoConfig) -> _Context:
    pi_star, vt = optimal_policy(mdp)
    return _Context(
        pi_star,
        float(mdp.mu @ vt.v),
        visitation_distribution(mdp, pi_star),
        np.random.default_rng(cfg.seed),
    )


def _estimate_q(mdp: TabularMdp, cfg: AmpoConfig, pi: np.ndarray, q_exact: np.ndarray, rng) -> np.ndarray:
    if cfg.evaluation == "exact":
        return q_exact
    q = np.empty_like(q_exact)
    for s in range(mdp.n_states):
        for a in range(mdp.n_actions):
            q[s, a] = mc_q_samples(mdp, pi, s, a, cfg.mc_samples, rng).mean()
    return q


def bregman_to_opt(p: OmegaPotential, pi_star, pi, d_star) -> float:
    """``E_{s ~ d*}[D_h(pi*_s, pi_s)]``, ``inf`` when pi misses part of pi*'s support."""
    div = bregman_divergence_extended(p, pi_star, pi)
    m = d_star > 0
    if np.any(np.isinf(div[m])):
        return math.inf
    return float(d_star[m] @ div[m])


def ampo_step(state: AmpoState, cfg: AmpoConfig, mdp: TabularMdp, ctx: _Context | None = None):
    """One AMPO iteration; returns ``(next_state, record)``."""
    tic = time.perf_counter()
    ctx = ctx or _make_context(mdp, cfg)
    p = cfg.mirror
    t = state.t
    eta = float(cfg.schedule(t))
    if not eta > 0 or not math.isfinite(eta):
        raise NumericalError(f"iteration {t}: invalid step-size {eta}")
    vt = exact_evaluate(mdp, state.pi)
    zeros = np.zeros_like(vt.q)
    if state.scores is not None:
        mirror = regression_target_potential(zeros, state.scores, state.eta_prev, eta, state.lam, p)
    else:
        mirror = regression_target_general(zeros, state.pi, eta, p)
    exact_target = vt.q + mirror

    weights = _sampling_weights(cfg, mdp, state.pi)
    net = state.net
    if cfg.family == "relu":
        feats = _features(mdp, cfg)
        sampler = _relu_sampler(mdp, cfg, state.pi, feats, weights, vt.q, mirror)
        net = fit_sgd(net, sampler, cfg.sgd_steps, cfg.sgd_rate, seed=cfg.seed * 100_003 + t)
        scores = net(feats)
    else:
        target = _estimate_q(mdp, cfg, state.pi, vt.q, ctx.rng) + mirror
        problem = RegressionProblem(weights, target)
        if cfg.family == "tabular":
            scores = fit_exact(problem, "tabular", prior=state.scores).table()
        else:
            scores = fit_exact(problem, "linear", features=cfg.features).table()

    proj = project(eta * scores, p, cfg.precision)
    pi_next, lam_next = proj.dist, proj.lam

    eps_approx = weighted_loss(scores, RegressionProblem(weights, exact_target))
    d_next = visitation_distribution(mdp, pi_next)
    pairs = [(ctx.d_star, ctx.pi_star), (d_next, pi_next), (ctx.d_star, state.pi), (d_next, state.pi)]
    c_pairs = tuple(concentrability(weights, pairs))
    value = float(mdp.mu @ vt.v)
    record = IterationRecord(
        t=t,
        eta=eta,
        value=value,
        gap=ctx.v_star - value,
        bregman_to_opt=bregman_to_opt(p, ctx.pi_star, state.pi, ctx.d_star),
        eps_approx=eps_approx,
        c_v=max(c_pairs),
        nu=ratio_sup(ctx.d_star, d_next),
        wall_ms=0.0,
        c_v_pairs=c_pairs,
        lam=lam_next,
        policy=state.pi,
        next_policy=pi_next,
        next_scores=scores,
    )
    for name in ("value", "gap", "eps_approx"):
        if not math.isfinite(getattr(record, name)):
            raise NumericalError(f"iteration {t}: non-finite {name}")
    nxt = AmpoState(t + 1, pi_next, scores, np.asarray(lam_next, dtype=float), eta, net)
    record.wall_ms = (time.perf_counter() - tic) * 1e3
    return nxt, record


def _relu_sampler(mdp, cfg, pi, feats, weights, q_exact, mirror):
    flat_w = weights.ravel()
    A = mdp.n_actions
    X = feats.reshape(flat_w.size, -1)
    m = mirror.ravel()
    q = q_exact.ravel()
    exact = cfg.evaluation == "exact"

    def draw(rng):
        i = rng.choice(flat_w.size, p=flat_w)
        if exact:
            return X[i], q[i] + m[i]
        s, a = divmod(i, A)
        # one unbiased rollout estimate of Q plus the mirror term
        return X[i], mc_q_sample(mdp, pi, s, a, rng=rng) + m[i]

    return draw


def iterate(cfg: AmpoConfig, mdp: TabularMdp) -> Iterator[tuple[AmpoState, IterationRecord]]:
    """Yield ``(state_after_step, record)`` for t = 0, ..., iters - 1."""
    ctx = _make_context(mdp, cfg)
    state = init_state(mdp, cfg)
    for _ in range(cfg.iters):
        state, rec = ampo_step(state, cfg, mdp, ctx)
        yield state, rec


def run(cfg: AmpoConfig, mdp: TabularMdp) -> list[IterationRecord]:
    """Run ``cfg.iters`` AMPO iterations and return one record per iteration."""
    return [rec for _, rec in iterate(cfg, mdp)]


# sampling-based Q estimates


def _sample_rows(probs: np.ndarray, rng) -> np.ndarray:
    """One categorical draw per row of ``probs`` by inverse CDF."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[0]) * cdf[:, -1]
    return np.minimum((cdf < u[:, None]).sum(axis=1), probs.shape[1] - 1)


def mc_q_sample(mdp: TabularMdp, pi, s0: int, a0: int, gamma: float | None = None, rng=None,
                max_steps: int = 1_000_000) -> float:
    """Unbiased estimate of Q^pi(s0, a0).

    Rewards are summed undiscounted; after each step the rollout continues
    with probability gamma, so the expected length is 1 / (1 - gamma).
    ``pi`` is a policy table or a callable ``pi(state, rng) -> action``.
    """
    gamma = mdp.gamma if gamma is None else gamma
    if not 0 <= gamma < 1:
        raise ConfigError(f"gamma must lie in [0, 1), got {gamma}")
    rng = rng if rng is not None else np.random.default_rng()
    act = pi if callable(pi) else (lambda s, g: g.choice(mdp.n_actions, p=pi[s]))
    s, a = s0, a0
    total = float(mdp.reward[s, a])
    for _ in range(max_steps):
        if rng.random() >= gamma:
            return total
        s = rng.choice(mdp.n_states, p=mdp.transition[s, a])
        a = act(s, rng)
        total += float(mdp.reward[s, a])
    raise NumericalError(f"Q sampler exceeded {max_steps} steps")


def mc_q_samples(mdp: TabularMdp, pi, s0: int, a0: int, n: int, rng, gamma: float | None = None,
                 max_steps: int = 1_000_000) -> np.ndarray:
    """``n`` independent draws of ``mc_q_sample`` computed in lockstep."""
    gamma = mdp.gamma if gamma is None else gamma
    pi = np.asarray(pi, dtype=float)
    s = np.full(n, s0)
    a = np.full(n, a0)
    total = np.full(n, float(mdp.reward[s0, a0]))
    alive = np.arange(n)
    for _ in range(max_steps):
        alive = alive[rng.random(alive.size) < gamma]
        if alive.size == 0:
            return total
        s[alive] = _sample_rows(mdp.transition[s[alive], a[alive]], rng)
        a[alive] = _sample_rows(pi[s[alive]], rng)
        total[alive] += mdp.reward[s[alive], a[alive]]
    raise NumericalError(f"Q sampler exceeded {max_steps} steps")


def gae_advantages(rewards, values, gamma: float, lam: float, last_value=0.0, dones=None) -> np.ndarray:
    """Generalized advantage estimates by the backward recursion.

    ``delta_t = r_t + gamma * v_{t+1} - v_t`` and ``A_t = delta_t + gamma * lam * A_{t+1}``,
    with ``v_T = last_value``.  ``dones[t]`` marks the last step of an episode:
    it zeroes the bootstrap and stops the recursion.  Leading axis is time.
    """
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    if r.shape != v.shape or r.shape[0] == 0:
        raise ValueError("rewards and values must be non-empty and of equal shape")
    notdone = np.ones_like(r) if dones is None else 1.0 - np.asarray(dones, dtype=float)
    next_v = np.concatenate([v[1:], np.asarray(last_value, dtype=float)[None] * np.ones_like(v[:1])])
    delta = r + gamma * next_v * notdone - v
    adv = np.empty_like(r)
    acc = np.zeros_like(r[0])
    for t in range(len(r) - 1, -1, -1):
        acc = delta[t] + gamma * lam * notdone[t] * acc
        adv[t] = acc
    return adv


# CSV output

CSV_COLUMNS = ("t", "eta", "value", "gap", "bregman_to_opt", "eps_approx", "c_v", "nu", "wall_ms")


def _cell(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        raise NumericalError("NaN in metrics output")
    return f"{x:.17g}"


def records_to_csv(records, timing: bool = True) -> str:
    """CSV text with a header row; ``timing=False`` writes 0 for wall_ms."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        row = [getattr(r, c) for c in CSV_COLUMNS]
        if not timing:
            row[-1] = 0.0
        w.writerow([_cell(x) for x in row])
    return buf.getvalue()


def write_csv(records, path, timing: bool = True) -> None:
    Path(path).write_text(records_to_csv(records, timing))


def read_csv(path) -> dict[str, np.ndarray]:
    """Column name -> float array (``t`` as int)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        vals = [float(r[j]) for r in body]
        cols[name] = np.array(vals, dtype=int if name == "t" else float)
    return cols
