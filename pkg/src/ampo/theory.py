"""Randomized checks of the inequalities and identities behind AMPO.

Each suite draws random instances, evaluates ``slack = lhs - rhs`` for an
inequality ``lhs <= rhs`` (or ``|lhs - rhs|`` for an identity) and counts
trials whose slack exceeds the suite tolerance.  ``run_suites`` returns one
``SuiteResult`` per suite; ``projector`` replaces the Bregman projection in
the projection-dependent suites, which is how a broken implementation is
shown to be caught.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .engine import AmpoConfig, Constant, Geometric, run
from .mdp import exact_evaluate, policy_gradient, random_mdp, uniform_policy, visitation_distribution
from .mirror_maps import OmegaPotential, parse_mirror_map
from .projection import project, project_euclidean

__all__ = ["SuiteResult", "SUITES", "run_suites", "DEFAULT_KINDS"]

DEFAULT_KINDS = ("entropy", "l2", "eps-entropy:0.1", "tsallis:2", "tsallis:0.5", "hyperbolic:1", "tanh")


@dataclass
class SuiteResult:
    name: str
    trials: int
    failures: int
    worst_slack: float
    tolerance: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.trials > 0 and self.failures == 0

    def as_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


class _Tally:
    def __init__(self, name, tol):
        self.name, self.tol = name, tol
        self.trials = 0
        self.failures = 0
        self.worst = -math.inf

    def add(self, slack):
        slack = np.atleast_1d(np.asarray(slack, dtype=float))
        slack = np.where(np.isnan(slack), np.inf, slack)
        self.trials += slack.size
        self.failures += int(np.sum(slack > self.tol))
        if slack.size:
            self.worst = max(self.worst, float(slack.max()))

    def result(self, seconds):
        return SuiteResult(self.name, self.trials, self.failures, self.worst, self.tol, seconds)


def _default_projector(p: OmegaPotential):
    return lambda x: project(x, p, precision=1e-13).dist


def _interior(rng, rows, n, floor=1e-3):
    w = rng.random((rows, n)) + floor
    return w / w.sum(axis=1, keepdims=True)


def _div(p, x, y):
    # D_h over the last axis for y in the interior of dom h (not necessarily on the simplex)
    return np.sum(p.h_coord(x) - p.h_coord(y) - p.phi_inv(y) * (x - y), axis=-1)


def _batches(trials, kinds, rng):
    """Split ``trials`` across kinds and action counts."""
    sizes = (2, 3, 5, 8, 16)
    per = max(1, trials // (len(kinds) * len(sizes)))
    for token in kinds:
        for n in sizes:
            yield parse_mirror_map(token), n, per
    extra = trials - per * len(kinds) * len(sizes)
    if extra > 0:
        yield parse_mirror_map(kinds[0]), 4, extra


def suite_three_point_descent(rng, trials, kinds, projector=None):
    """<eta f - grad h(pbar), pi - pt> <= D(pi, pbar) - D(pt, pbar) - D(pi, pt), pt the projection of eta f."""
    tally = _Tally("three_point_descent", 1e-8)
    for p, n, m in _batches(trials, kinds, rng):
        proj = projector(p) if projector else _default_projector(p)
        need = m
        # redraw until m usable trials: boundary projections are skipped, not counted
        for _ in range(20):
            if need <= 0:
                break
            x = rng.normal(0, 2, size=(need, n)) * rng.uniform(0.1, 3, size=(need, 1))
            pt = proj(x)
            pi = _interior(rng, need, n, 0.0)
            pbar = _interior(rng, need, n)
            ok = np.all(np.isfinite(p.phi_inv(pt)), axis=1)  # D(pi, pt) needs pt in the interior of dom h
            # grad h is too ill-conditioned to evaluate at probabilities rounded next to a finite sup
            ok &= np.all(pt < p.sup_value - 1e-6, axis=1)
            pi, pbar, pt, x = pi[ok], pbar[ok], pt[ok], x[ok]
            lhs = np.sum((x - p.phi_inv(pbar)) * (pi - pt), axis=1)
            rhs = _div(p, pi, pbar) - _div(p, pt, pbar) - _div(p, pi, pt)
            tally.add((lhs - rhs) / (1.0 + np.abs(lhs)))
            need -= int(ok.sum())
    return tally


def suite_three_point_identity(rng, trials, kinds, projector=None):
    """D(c, a) + D(a, b) - D(c, b) = <grad h(b) - grad h(a), c - a>."""
    tally = _Tally("three_point_identity", 1e-9)
    for p, n, m in _batches(trials, kinds, rng):
        a, b, c = _interior(rng, m, n), _interior(rng, m, n), _interior(rng, m, n, 0.0)
        lhs = _div(p, c, a) + _div(p, a, b) - _div(p, c, b)
        rhs = np.sum((p.phi_inv(b) - p.phi_inv(a)) * (c - a), axis=1)
        tally.add(np.abs(lhs - rhs) / (1.0 + np.abs(rhs)))
    return tally


def suite_generalized_pythagorean(rng, trials, kinds, projector=None):
    """D(x, y*) + D(y*, y) <= D(x, y) for y* the projection of y onto the simplex."""
    tally = _Tally("generalized_pythagorean", 1e-8)
    for p, n, m in _batches(trials, kinds, rng):
        proj = projector(p) if projector else _default_projector(p)
        hi = min(p.sup_value, 3.0)
        y = rng.uniform(0.02, hi * 0.98, size=(m, n))
        ystar = proj(p.phi_inv(y))
        x = _interior(rng, m, n, 0.0)
        ok = np.all(np.isfinite(p.phi_inv(ystar)), axis=1)
        x, y, ystar = x[ok], y[ok], ystar[ok]
        lhs = _div(p, x, ystar) + _div(p, ystar, y)
        rhs = _div(p, x, y)
        tally.add((lhs - rhs) / (1.0 + np.abs(rhs)))
    return tally


def suite_performance_difference(rng, trials, kinds=None, projector=None):
    """V^pi - V^pi' = E_{d^pi}[<Q^pi'_s, pi_s - pi'_s>] / (1 - gamma)."""
    tally = _Tally("performance_difference", 1e-9)
    per_mdp = 10
    for k in range(max(1, trials // per_mdp)):
        mdp = random_mdp(int(rng.integers(2, 7)), int(rng.integers(2, 5)), float(rng.uniform(0.5, 0.95)),
                         int(rng.integers(2**31)))
        S, A = mdp.n_states, mdp.n_actions
        for _ in range(per_mdp):
            pi, pi2 = _interior(rng, S, A, 0.0), _interior(rng, S, A, 0.0)
            v1, t2 = exact_evaluate(mdp, pi), exact_evaluate(mdp, pi2)
            d = visitation_distribution(mdp, pi)
            lhs = mdp.mu @ v1.v - mdp.mu @ t2.v
            rhs = d @ np.sum(t2.q * (pi - pi2), axis=1) / (1 - mdp.gamma)
            tally.add(abs(lhs - rhs))
    return tally


def suite_policy_gradient(rng, trials, kinds=None, projector=None):
    """dV/dpi(a|s) = d(s) Q(s, a) / (1 - gamma) against central differences."""
    tally = _Tally("policy_gradient", 1e-5)
    h = 1e-6
    for _ in range(trials):
        mdp = random_mdp(int(rng.integers(2, 6)), int(rng.integers(2, 4)), float(rng.uniform(0.5, 0.95)),
                         int(rng.integers(2**31)))
        pi = _interior(rng, mdp.n_states, mdp.n_actions)
        g = policy_gradient(mdp, pi)
        fd = np.empty_like(g)
        for s in range(mdp.n_states):
            for a in range(mdp.n_actions):
                up, dn = pi.copy(), pi.copy()
                up[s, a] += h
                dn[s, a] -= h
                fd[s, a] = (_table_value(mdp, up) - _table_value(mdp, dn)) / (2 * h)
        tally.add(np.max(np.abs(g - fd) / np.abs(fd)))
    return tally


def _table_value(mdp, pi):
    # V^pi(mu) for any nonnegative table, through the same linear solve
    P = np.einsum("sa,sat->st", pi, mdp.transition)
    r = np.sum(pi * mdp.reward, axis=1)
    return mdp.mu @ np.linalg.solve(np.eye(mdp.n_states) - mdp.gamma * P, r)


def _mdps(rng, count, S=5, A=3, gamma=0.9):
    return [random_mdp(S, A, gamma, int(rng.integers(2**31))) for _ in range(count)]


def suite_quasi_monotonicity(rng, trials, kinds, projector=None, n_mdps=10, iters=30):
    """Exact AMPO never decreases V(mu) beyond round-off."""
    tally = _Tally("quasi_monotonicity", 1e-12)
    for mdp in _mdps(rng, n_mdps):
        for token in kinds:
            v = np.array([r.value for r in run(AmpoConfig(mirror=token, iters=iters), mdp)])
            tally.add(v[:-1] - v[1:])
    return tally


def suite_per_step_recursion(rng, trials, kinds=None, projector=None, n_mdps=10, iters=25):
    """nu (gap_{t+1} - gap_t) + gap_t <= (D*_t - D*_{t+1}) / ((1 - gamma) eta_t) on full-support iterates."""
    tally = _Tally("per_step_recursion", 1e-9)
    for mdp in _mdps(rng, n_mdps):
        for token in ("entropy", "l2"):
            for eta in (0.5, 2.0):
                recs = run(AmpoConfig(mirror=token, schedule=Constant(eta), iters=iters), mdp)
                for a, b in zip(recs, recs[1:]):
                    if np.any(a.policy == 0) or np.any(b.policy == 0):
                        continue
                    lhs = a.nu * (b.gap - a.gap) + a.gap
                    rhs = (a.bregman_to_opt - b.bregman_to_opt) / ((1 - mdp.gamma) * a.eta)
                    tally.add(lhs - rhs)
    return tally


def sublinear_slacks(mdp, horizons=(10, 50, 200), eta0=1.0):
    """Slack of the averaged-gap bound at each horizon for a constant step-size."""
    recs = run(AmpoConfig(mirror="entropy", schedule=Constant(eta0), iters=max(horizons)), mdp)
    gaps = np.array([r.gap for r in recs])
    nu = max(r.nu for r in recs)
    d0 = recs[0].bregman_to_opt
    g = mdp.gamma
    return [gaps[:T].mean() - (d0 / ((1 - g) * eta0) + nu / (1 - g)) / T for T in horizons]


def suite_sublinear_rate(rng, trials, kinds=None, projector=None, n_mdps=5):
    tally = _Tally("sublinear_rate", 1e-9)
    for mdp in _mdps(rng, n_mdps):
        tally.add(sublinear_slacks(mdp))
    return tally


def measured_mismatch(mdp, iters=60, eta0=1.0, rounds=5):
    """Smallest nu_bar (from a pilot run) that bounds the mismatch of the geometric run it induces."""
    pilot = run(AmpoConfig(mirror="entropy", iters=30), mdp)
    nu_bar = max(r.nu for r in pilot)
    for _ in range(rounds):
        recs = run(AmpoConfig(mirror="entropy", schedule=Geometric.from_mismatch(eta0, nu_bar), iters=iters + 1), mdp)
        seen = max(r.nu for r in recs)
        if seen <= nu_bar:
            return nu_bar, recs
        nu_bar = seen
    return nu_bar, recs


def linear_slacks(mdp, iters=60, eta0=1.0):
    """Per-iteration slack of the geometric-rate bound for t <= iters, plus the final gap."""
    nu_bar, recs = measured_mismatch(mdp, iters, eta0)
    g = mdp.gamma
    d0 = recs[0].bregman_to_opt
    gaps = np.array([r.gap for r in recs])
    t = np.arange(len(gaps))
    bound = (1 - 1 / nu_bar) ** t * (1 + d0 / (eta0 * (nu_bar - 1))) / (1 - g)
    return gaps - bound, gaps, nu_bar


def suite_linear_rate(rng, trials, kinds=None, projector=None, n_mdps=5):
    tally = _Tally("linear_rate", 1e-9)
    for mdp in _mdps(rng, n_mdps):
        slack, gaps, _ = linear_slacks(mdp)
        tally.add(slack)
        tally.add(gaps[60] - 1e-8 + tally.tol)  # final gap at most 1e-8
    return tally


def suite_special_cases(rng, trials, kinds=None, projector=None, n_mdps=5, iters=30):
    """Tabular exact AMPO reproduces NPG (entropy) and projected Q-descent (l2)."""
    tally = _Tally("special_cases", 1e-10)
    for mdp in _mdps(rng, n_mdps):
        for token in ("entropy", "l2"):
            recs = run(AmpoConfig(mirror=token, iters=iters), mdp)
            pi = uniform_policy(mdp.n_states, mdp.n_actions)
            for rec in recs:
                q = exact_evaluate(mdp, pi).q
                if token == "entropy":
                    w = pi * np.exp(q)
                    pi = w / w.sum(axis=1, keepdims=True)
                else:
                    pi = project_euclidean(pi + q).dist
                tally.add(np.max(np.abs(rec.next_policy - pi)))
    return tally


SUITES = {
    "three_point_descent": suite_three_point_descent,
    "three_point_identity": suite_three_point_identity,
    "generalized_pythagorean": suite_generalized_pythagorean,
    "performance_difference": suite_performance_difference,
    "policy_gradient": suite_policy_gradient,
    "quasi_monotonicity": suite_quasi_monotonicity,
    "per_step_recursion": suite_per_step_recursion,
    "sublinear_rate": suite_sublinear_rate,
    "linear_rate": suite_linear_rate,
    "special_cases": suite_special_cases,
}

# pointwise suites draw `trials` samples; MDP-level suites run on `pgt_mdps` MDPs
_POINTWISE_SUITES = {"three_point_descent", "three_point_identity", "generalized_pythagorean", "performance_difference"}


def run_suites(trials: int = 10_000, seed: int = 0, kinds=DEFAULT_KINDS, names=None, projector=None,
               pgt_mdps: int = 20) -> list[SuiteResult]:
    """Run the named suites (all by default) and return their results in order."""
    names = list(SUITES) if names is None else list(names)
    unknown = set(names) - set(SUITES)
    if unknown:
        raise KeyError(f"unknown suites: {sorted(unknown)}")
    out = []
    for i, name in enumerate(names):
        rng = np.random.default_rng([seed, i])
        tic = time.perf_counter()
        n = trials if name in _POINTWISE_SUITES else pgt_mdps
        tally = SUITES[name](rng, n, kinds, projector=projector)
        out.append(tally.result(time.perf_counter() - tic))
    return out
