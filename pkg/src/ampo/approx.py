"""Score functions f(s, a) and the regression fits that produce them.

Three families are provided:

* ``TabularScores``: one free score per (state, action) pair.
* ``LinearScores``: ``f(s, a) = features[s, a] @ theta``.
* ``ShallowRelu``: ``f(x) = c @ relu((W0 + W) x + b)`` where only ``W`` is
  trained; ``W0``, ``b`` and ``c`` stay at their random initialization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, NumericalError, SimplexError

__all__ = [
    "TabularScores",
    "LinearScores",
    "ShallowRelu",
    "RegressionProblem",
    "RankDeficiencyWarning",
    "evaluate",
    "fit_exact",
    "fit_sgd",
    "table_sampler",
    "weighted_loss",
    "encode_state_action",
    "pair_features",
    "save_net",
    "load_net",
]


class RankDeficiencyWarning(RuntimeWarning):
    """The weighted Gram matrix was ill-conditioned and a ridge term was added."""


@dataclass(frozen=True)
class TabularScores:
    theta: np.ndarray

    def table(self) -> np.ndarray:
        return np.asarray(self.theta, dtype=float)


@dataclass(frozen=True)
class LinearScores:
    features: np.ndarray  # (S, A, d)
    theta: np.ndarray  # (d,)

    def __post_init__(self):
        if self.features.ndim != 3 or self.features.shape[-1] != np.shape(self.theta)[0]:
            raise ValueError(f"features {self.features.shape} do not match theta {np.shape(self.theta)}")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")

    def table(self) -> np.ndarray:
        return self.features @ self.theta


@dataclass
class ShallowRelu:
    """Two-layer ReLU network trained on its first-layer weights only.

    ``W0`` and ``b`` are drawn from N(0, 1/m) and ``c`` from N(0, eps_a);
    ``W`` is the trainable offset from ``W0`` and starts at zero.
    """

    W0: np.ndarray
    W: np.ndarray
    b: np.ndarray
    c: np.ndarray
    seed: int = 0

    @classmethod
    def init(cls, width: int, dim: int, seed: int, eps_a: float = 1.0) -> "ShallowRelu":
        if width < 1 or dim < 1:
            raise ConfigError("width and input dimension must be positive")
        if not 0 < eps_a <= 1:
            raise ConfigError(f"eps_a must lie in (0, 1], got {eps_a}")
        rng = np.random.default_rng(seed)
        W0 = rng.normal(0.0, np.sqrt(1.0 / width), size=(width, dim))
        b = rng.normal(0.0, np.sqrt(1.0 / width), size=width)
        c = rng.normal(0.0, np.sqrt(eps_a), size=width)
        return cls(W0, np.zeros_like(W0), b, c, seed)

    @property
    def width(self) -> int:
        return self.W0.shape[0]

    @property
    def dim(self) -> int:
        return self.W0.shape[1]

    def pre_activation(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ (self.W0 + self.W).T + self.b

    def __call__(self, x) -> np.ndarray:
        """Network output for inputs ``x`` of shape (..., d)."""
        return np.maximum(self.pre_activation(x), 0.0) @ self.c

    def grad_W(self, x) -> np.ndarray:
        """Gradient of f(x) w.r.t. W for a single input (ReLU'(0) taken as 0)."""
        x = np.asarray(x, dtype=float)
        active = self.pre_activation(x) > 0
        return np.outer(self.c * active, x)

    def table(self, features) -> np.ndarray:
        return self(features)


@dataclass(frozen=True)
class RegressionProblem:
    """Weighted least squares over a finite set of (state, action) pairs.

    ``weights`` is a distribution over pairs (same shape as ``targets``).
    """

    weights: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        y = np.asarray(self.targets, dtype=float)
        if w.shape != y.shape:
            raise ValueError(f"weights {w.shape} and targets {y.shape} differ in shape")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise SimplexError("regression weights must be a distribution over pairs")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "targets", y)


def weighted_loss(scores, problem: RegressionProblem) -> float:
    """``sum_{s,a} v(s,a) (f(s,a) - y(s,a))^2`` over the support of v."""
    m = problem.weights > 0
    r = np.asarray(scores)[m] - problem.targets[m]
    return float(np.sum(problem.weights[m] * r * r))


def evaluate(f, s, a, features=None) -> float:
    """f(s, a) for an index pair; ``features`` gives the network input table for ShallowRelu."""
    if isinstance(f, TabularScores):
        return float(f.theta[s, a])
    if isinstance(f, LinearScores):
        return float(f.features[s, a] @ f.theta)
    if isinstance(f, ShallowRelu):
        if features is None:
            raise ValueError("ShallowRelu needs a feature table to evaluate index pairs")
        return float(f(features[s, a]))
    raise TypeError(f"unknown approximator {type(f).__name__}")


def fit_exact(problem: RegressionProblem, family: str = "tabular", features=None, prior=None):
    """Closed-form minimizer of the weighted squared loss.

    ``family`` is ``"tabular"`` or ``"linear"`` (the latter needs a feature
    table of shape (S, A, d)).  Tabular fits copy targets on the support of
    the weights and keep ``prior`` (or the target) elsewhere.
    """
    if not np.all(np.isfinite(problem.targets[problem.weights > 0])):
        raise NumericalError("regression targets must be finite")
    if family == "tabular":
        theta = problem.targets.copy()
        if prior is not None:
            off = problem.weights <= 0
            theta[off] = np.asarray(prior, dtype=float)[off]
        return TabularScores(theta)
    if family != "linear":
        raise ConfigError(f"fit_exact supports 'tabular' and 'linear', not {family!r}")
    if features is None:
        raise ConfigError("a linear fit needs a feature table")
    feats = np.asarray(features, dtype=float)
    X = feats.reshape(-1, feats.shape[-1])
    w = problem.weights.ravel()
    y = problem.targets.ravel()
    m = w > 0
    X, w, y = X[m], w[m], y[m]
    gram = X.T @ (w[:, None] * X)
    rhs = X.T @ (w * y)
    if np.linalg.cond(gram) > 1e12:
        warnings.warn("weighted Gram matrix is rank deficient; adding a 1e-10 ridge", RankDeficiencyWarning, stacklevel=2)
        gram = gram + 1e-10 * np.eye(gram.shape[0])
    theta = np.linalg.solve(gram, rhs)
    return LinearScores(feats, theta)


def fit_sgd(net: ShallowRelu, sampler, steps: int, rate: float, seed: int) -> ShallowRelu:
    """Single-sample SGD on ``W``: ``W <- W - rate * (f(x) - y) * grad_W f(x)``.

    ``sampler(rng)`` returns one ``(x, y)`` pair: a network input and an
    unbiased estimate of its regression target.
    """
    if steps < 0:
        raise ConfigError("steps must be nonnegative")
    rng = np.random.default_rng(seed)
    W = net.W.copy()
    W_eff = net.W0 + W
    for k in range(steps):
        x, y = sampler(rng)
        x = np.asarray(x, dtype=float)
        pre = W_eff @ x + net.b
        active = pre > 0
        f = float(net.c @ np.where(active, pre, 0.0))
        resid = f - y
        step = rate * resid * (net.c * active)
        W -= np.outer(step, x)
        W_eff -= np.outer(step, x)
        if not np.isfinite(resid) or not np.all(np.isfinite(step)):
            raise NumericalError(f"SGD diverged at step {k}")
    return replace(net, W=W)


def table_sampler(problem: RegressionProblem, features):
    """Sampler for ``fit_sgd`` drawing pairs from ``problem.weights``."""
    w = problem.weights.ravel()
    X = np.asarray(features, dtype=float).reshape(w.size, -1)
    y = problem.targets.ravel()

    def draw(rng):
        i = rng.choice(w.size, p=w)
        return X[i], y[i]

    return draw


def encode_state_action(state, action: int, n_actions: int) -> np.ndarray:
    """Unit-norm network input whose last coordinate is 1/2.

    The state vector and a one-hot action block are concatenated, scaled to
    norm sqrt(3)/2, and a constant 1/2 is appended.
    """
    s = np.atleast_2d(np.asarray(state, dtype=float))
    a = np.broadcast_to(np.asarray(action), s.shape[:1])
    z = np.concatenate([s, np.eye(n_actions)[a]], axis=1)
    z *= (np.sqrt(3.0) / 2.0) / np.linalg.norm(z, axis=1, keepdims=True)
    out = np.concatenate([z, np.full((len(z), 1), 0.5)], axis=1)
    return out[0] if np.ndim(state) == 1 else out


def pair_features(n_states: int, n_actions: int) -> np.ndarray:
    """Network inputs for every (s, a) of a tabular MDP, shape (S, A, S + A + 1)."""
    eye = np.eye(n_states)
    out = np.empty((n_states, n_actions, n_states + n_actions + 1))
    for a in range(n_actions):
        out[:, a] = encode_state_action(eye, np.full(n_states, a), n_actions)
    return out


def save_net(net: ShallowRelu, path) -> None:
    """Flat text checkpoint: ``m d seed`` then W0, W, b, c (row-major)."""
    fmt = lambda arr: " ".join(f"{v:.17g}" for v in np.ravel(arr))  # noqa: E731
    lines = [f"{net.width} {net.dim} {net.seed}", fmt(net.W0), fmt(net.W), fmt(net.b), fmt(net.c)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_net(path) -> ShallowRelu:
    lines = Path(path).read_text().splitlines()
    try:
        m, d, seed = (int(t) for t in lines[0].split())
        arrays = [np.array([float(t) for t in line.split()]) for line in lines[1:5]]
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"malformed network checkpoint: {exc}") from exc
    if len(arrays) != 4:
        raise ConfigError(f"network checkpoint has {len(arrays)} array lines, expected 4")
    W0, W, b, c = arrays
    if W0.size != m * d or W.size != m * d or b.size != m or c.size != m:
        raise ConfigError("checkpoint array sizes do not match the header")
    return ShallowRelu(W0.reshape(m, d), W.reshape(m, d), b, c, seed)
