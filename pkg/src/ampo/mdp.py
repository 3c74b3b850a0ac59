"""Finite discounted MDPs with exact (dense linear-solve) evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, NumericalError, SimplexError
from .mirror_maps import check_simplex

__all__ = [
    "TabularMdp",
    "ValueTables",
    "uniform_policy",
    "random_policy",
    "exact_evaluate",
    "policy_value",
    "visitation_distribution",
    "policy_gradient",
    "optimal_policy",
    "mismatch_coefficient",
    "concentrability",
    "random_mdp",
    "save_mdp",
    "load_mdp",
    "format_mdp",
    "parse_mdp",
]

_ROW_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """Discounted MDP ``(S, A, P, r, gamma, mu)``.

    ``transition[s, a, s2]`` is P(s2 | s, a); ``reward[s, a]`` lies in [0, 1].
    """

    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    mu: np.ndarray

    def __post_init__(self):
        P = np.array(self.transition, dtype=float)
        r = np.array(self.reward, dtype=float)
        mu = np.array(self.mu, dtype=float)
        if r.ndim != 2 or P.shape != (r.shape[0], r.shape[1], r.shape[0]):
            raise ValueError(f"shape mismatch: transition {P.shape}, reward {r.shape}")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=2) - 1.0)) > _ROW_TOL:
            raise SimplexError("transition rows must be probability vectors")
        if np.any(r < 0) or np.any(r > 1):
            raise ValueError("rewards must lie in [0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if mu.shape != (r.shape[0],):
            raise ValueError(f"mu has shape {mu.shape}, expected ({r.shape[0]},)")
        check_simplex(mu)
        for name, arr in (("transition", P), ("reward", r), ("mu", mu)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n_states(self) -> int:
        return self.reward.shape[0]

    @property
    def n_actions(self) -> int:
        return self.reward.shape[1]

    def __eq__(self, other):
        if not isinstance(other, TabularMdp):
            return NotImplemented
        return (
            self.gamma == other.gamma
            and np.array_equal(self.transition, other.transition)
            and np.array_equal(self.reward, other.reward)
            and np.array_equal(self.mu, other.mu)
        )

    __hash__ = None


@dataclass(frozen=True)
class ValueTables:
    v: np.ndarray
    q: np.ndarray


def uniform_policy(n_states: int, n_actions: int) -> np.ndarray:
    return np.full((n_states, n_actions), 1.0 / n_actions)


def random_policy(n_states: int, n_actions: int, rng: np.random.Generator) -> np.ndarray:
    """Full-support policy with rows drawn from a flat Dirichlet."""
    return rng.dirichlet(np.ones(n_actions), size=n_states)


def _check_policy(mdp: TabularMdp, pi) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(f"policy has shape {pi.shape}, expected {(mdp.n_states, mdp.n_actions)}")
    return check_simplex(pi)


def exact_evaluate(mdp: TabularMdp, pi) -> ValueTables:
    """Solve the Bellman equation ``(I - gamma P_pi) v = r_pi`` exactly."""
    pi = _check_policy(mdp, pi)
    P_pi = np.einsum("sa,sat->st", pi, mdp.transition)
    r_pi = np.einsum("sa,sa->s", pi, mdp.reward)
    A = np.eye(mdp.n_states) - mdp.gamma * P_pi
    try:
        v = np.linalg.solve(A, r_pi)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"policy evaluation failed: {exc}") from exc
    resid = np.max(np.abs(A @ v - r_pi), initial=0.0)
    if not np.isfinite(resid) or resid > 1e-9:
        raise NumericalError(f"policy evaluation residual {resid:.3g}")
    q = mdp.reward + mdp.gamma * mdp.transition @ v
    return ValueTables(v, q)


def policy_value(mdp: TabularMdp, pi) -> float:
    """V^pi(mu)."""
    return float(mdp.mu @ exact_evaluate(mdp, pi).v)


def visitation_distribution(mdp: TabularMdp, pi) -> np.ndarray:
    """Discounted state visitation ``d = (1 - gamma) mu^T (I - gamma P_pi)^-1``."""
    pi = _check_policy(mdp, pi)
    P_pi = np.einsum("sa,sat->st", pi, mdp.transition)
    A = np.eye(mdp.n_states) - mdp.gamma * P_pi.T
    try:
        d = np.linalg.solve(A, (1.0 - mdp.gamma) * mdp.mu)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"visitation solve failed: {exc}") from exc
    if not np.all(np.isfinite(d)):
        raise NumericalError("visitation distribution is not finite")
    # clip round-off below zero; the exact solution is nonnegative
    return np.maximum(d, 0.0)


def policy_gradient(mdp: TabularMdp, pi) -> np.ndarray:
    """Gradient of V^pi(mu) w.r.t. the policy table: ``d(s) Q(s, a) / (1 - gamma)``."""
    d = visitation_distribution(mdp, pi)
    q = exact_evaluate(mdp, pi).q
    return d[:, None] * q / (1.0 - mdp.gamma)


def _greedy(q: np.ndarray, tol: float) -> np.ndarray:
    # lowest index among actions within tol of the row maximum
    return np.argmax(q >= q.max(axis=1, keepdims=True) - tol, axis=1)


def optimal_policy(mdp: TabularMdp, max_iters: int = 10_000) -> tuple[np.ndarray, ValueTables]:
    """Deterministic optimal policy by policy iteration."""
    S, A = mdp.n_states, mdp.n_actions
    actions = np.zeros(S, dtype=int)
    eye = np.eye(A)
    for _ in range(max_iters):
        vt = exact_evaluate(mdp, eye[actions])
        best = vt.q.max(axis=1)
        current = vt.q[np.arange(S), actions]
        improve = best > current + 1e-13
        if not improve.any():
            break
        actions = np.where(improve, np.argmax(vt.q, axis=1), actions)
    else:
        raise NumericalError("policy iteration did not terminate")
    actions = _greedy(vt.q, 1e-12)
    pi = eye[actions]
    vt = exact_evaluate(mdp, pi)
    return pi, vt


def mismatch_coefficient(mdp: TabularMdp, pi_star, pi_t) -> float:
    """max_s d*(s) / d^t(s); ``inf`` when d^t misses a state that d* visits."""
    d_star = visitation_distribution(mdp, pi_star)
    d_t = visitation_distribution(mdp, pi_t)
    return ratio_sup(d_star, d_t)


def ratio_sup(d_star: np.ndarray, d_t: np.ndarray) -> float:
    pos = d_star > 0
    if np.any(pos & (d_t <= 0)):
        return np.inf
    return float(np.max(d_star[pos] / d_t[pos]))


def concentrability(v: np.ndarray, pairs) -> list[float]:
    """Second moments ``E_v[(d(s) pi(a|s) / v(s, a))^2]`` for each (d, pi) pair.

    ``inf`` where some mass of d*pi falls outside the support of v.
    """
    v = np.asarray(v, dtype=float)
    out = []
    for d, pi in pairs:
        w = np.asarray(d)[:, None] * np.asarray(pi)
        if np.any((w > 0) & (v <= 0)):
            out.append(np.inf)
            continue
        m = v > 0
        out.append(float(np.sum(w[m] ** 2 / v[m])))
    return out


def random_mdp(n_states: int, n_actions: int, gamma: float, seed: int) -> TabularMdp:
    """Random MDP with normalized uniform transition rows, U[0, 1] rewards and uniform mu."""
    if n_states < 1 or n_actions < 1:
        raise ValueError("an MDP needs at least one state and one action")
    rng = np.random.default_rng(seed)
    P = rng.random((n_states, n_actions, n_states)) + 1e-3
    P /= P.sum(axis=2, keepdims=True)
    r = rng.random((n_states, n_actions))
    mu = np.full(n_states, 1.0 / n_states)
    return TabularMdp(P, r, gamma, mu)


def _fmt(x) -> str:
    return " ".join(f"{v:.17g}" for v in np.ravel(x))


def format_mdp(mdp: TabularMdp) -> str:
    """Flat text: ``S A gamma``, reward rows, (s, a)-major transition rows, mu."""
    lines = [f"{mdp.n_states} {mdp.n_actions} {mdp.gamma:.17g}"]
    lines += [_fmt(row) for row in mdp.reward]
    lines += [_fmt(row) for row in mdp.transition.reshape(-1, mdp.n_states)]
    lines.append(_fmt(mdp.mu))
    return "\n".join(lines) + "\n"


def parse_mdp(text: str) -> TabularMdp:
    tokens = text.split()
    try:
        S, A, gamma = int(tokens[0]), int(tokens[1]), float(tokens[2])
        body = np.array([float(t) for t in tokens[3:]])
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"malformed MDP header: {exc}") from exc
    need = S * A + S * A * S + S
    if body.size != need:
        raise ConfigError(f"MDP body has {body.size} numbers, expected {need}")
    r = body[: S * A].reshape(S, A)
    P = body[S * A : S * A + S * A * S].reshape(S, A, S)
    mu = body[S * A + S * A * S :]
    return TabularMdp(P, r, gamma, mu)


def save_mdp(mdp: TabularMdp, path) -> None:
    Path(path).write_text(format_mdp(mdp))


def load_mdp(path) -> TabularMdp:
    return parse_mdp(Path(path).read_text())
