"""Bregman projections onto the probability simplex.

Every projection takes dual-space scores ``x`` (already multiplied by the
step-size) and returns the policy ``p`` together with the additive normalizer
``lam`` such that

    p[a] = max(0, phi(x[a] + lam)),    sum_a p[a] = 1.

All functions accept a single score vector or a 2-D array of rows (one row
per state) and project each row independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, NumericalError, ProjectionInfeasibleError
from .mirror_maps import OmegaPotential

__all__ = [
    "ProjectionResult",
    "project_softmax",
    "project_euclidean",
    "project_eps_entropy",
    "project_bisection",
    "project",
    "DEFAULT_PRECISION",
    "MAX_BISECTION_ITERS",
]

DEFAULT_PRECISION = 1e-8
MAX_BISECTION_ITERS = 200


@dataclass(frozen=True)
class ProjectionResult:
    """Projected distribution(s) and the matching normalizer(s)."""

    dist: np.ndarray
    lam: np.ndarray | float


def _as_rows(scores):
    x = np.asarray(scores, dtype=float)
    if x.ndim == 0:
        raise DomainError("scores must be a vector or a 2-D array of rows")
    if x.shape[-1] == 0:
        raise DomainError("scores must have at least one action")
    if not np.all(np.isfinite(x)):
        raise DomainError("scores must be finite")
    single = x.ndim == 1
    return np.atleast_2d(x).reshape(-1, x.shape[-1]), single, x.shape


def _wrap(dist, lam, single, shape):
    if single:
        return ProjectionResult(dist[0], float(lam[0]))
    return ProjectionResult(dist.reshape(shape), lam.reshape(shape[:-1]))


def project_softmax(scores) -> ProjectionResult:
    """Projection under the negative entropy: ``p = exp(x) / sum(exp(x))``."""
    x, single, shape = _as_rows(scores)
    m = x.max(axis=1, keepdims=True)
    e = np.exp(x - m)
    z = e.sum(axis=1, keepdims=True)
    dist = e / z
    lam = 1.0 - np.log(z[:, 0]) - m[:, 0]
    return _wrap(dist, lam, single, shape)


def project_euclidean(scores) -> ProjectionResult:
    """Euclidean projection onto the simplex by sorting (exact, O(n log n))."""
    x, single, shape = _as_rows(scores)
    n = x.shape[1]
    u = -np.sort(-x, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    k = np.arange(1, n + 1)
    rho = np.count_nonzero(u - css / k > 0, axis=1)
    theta = css[np.arange(len(x)), rho - 1] / rho
    dist = np.maximum(x - theta[:, None], 0.0)
    return _wrap(dist, -theta, single, shape)


def project_eps_entropy(scores, eps: float) -> ProjectionResult:
    """Exact projection under the potential ``phi(x) = exp(x - 1) - eps``.

    Sorts ``y = exp(x)`` ascending and finds the first index ``i`` where
    ``(1 + eps*(n-i+1)) y_(i) - eps * sum_{j>=i} y_(j) > 0``; coordinates below it
    are clipped to zero.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps!r}")
    x, single, shape = _as_rows(scores)
    rows, n = x.shape
    m = x.max(axis=1, keepdims=True)
    y = np.exp(x - m)
    ys = np.sort(y, axis=1)
    tail = np.cumsum(ys[:, ::-1], axis=1)[:, ::-1]  # tail[:, i] = sum_{j >= i} ys[:, j]
    count = n - np.arange(n)  # number of kept coordinates if the cut is at i
    cond = (1.0 + eps * count) * ys - eps * tail > 0
    istar = np.argmax(cond, axis=1)  # the last column always satisfies cond
    r = np.arange(rows)
    scale = tail[r, istar] / (1.0 + eps * count[istar])
    dist = np.maximum(y / scale[:, None] - eps, 0.0)
    lam = 1.0 - m[:, 0] - np.log(scale)
    return _wrap(dist, lam, single, shape)


def _mass(p, x, nu):
    return np.maximum(p.phi(x + nu[:, None]), 0.0)


def project_bisection(scores, p: OmegaPotential, precision: float = DEFAULT_PRECISION) -> ProjectionResult:
    """Projection for any omega-potential by bisection on the normalizer.

    The bracket starts at ``[phi^-1(1/n) - max x, phi^-1(1) - max x]`` and is
    halved until the two candidate distributions differ by at most
    ``precision`` in l1 (or the bracket reaches float resolution).  The
    upper candidate is returned, rescaled to sum exactly to one.
    """
    if not precision > 0:
        raise DomainError(f"precision must be positive, got {precision!r}")
    x, single, shape = _as_rows(scores)
    rows, n = x.shape
    xmax = x.max(axis=1)
    if p.sup_value < np.inf and n * p.sup_value <= 1.0:
        raise ProjectionInfeasibleError(f"{p.token}: {n} action(s) cannot carry unit mass")

    lo = float(p.phi_inv(1.0 / n)) - xmax
    top = float(p.phi_inv(1.0))
    if np.isfinite(top):
        hi = top - xmax
    else:
        # phi is bounded; grow the bracket until the mass exceeds one
        hi = lo.copy()
        step = 1.0
        for _ in range(MAX_BISECTION_ITERS):
            short = _mass(p, x, hi).sum(axis=1) < 1.0
            if not short.any():
                break
            hi = np.where(short, hi + step, hi)
            step *= 2.0
        else:
            raise ProjectionInfeasibleError(f"{p.token}: could not bracket unit mass")

    d_hi = _mass(p, x, hi)
    d_lo = _mass(p, x, lo)
    active = np.abs(d_hi - d_lo).sum(axis=1) > precision
    for _ in range(MAX_BISECTION_ITERS):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        mid = 0.5 * (hi[idx] + lo[idx])
        stuck = (mid == hi[idx]) | (mid == lo[idx])
        d_mid = _mass(p, x[idx], mid)
        over = d_mid.sum(axis=1) > 1.0
        up = idx[over & ~stuck]
        down = idx[~over & ~stuck]
        hi[up] = mid[over & ~stuck]
        d_hi[up] = d_mid[over & ~stuck]
        lo[down] = mid[~over & ~stuck]
        d_lo[down] = d_mid[~over & ~stuck]
        gap = np.abs(d_hi[idx] - d_lo[idx]).sum(axis=1)
        active[idx] = (gap > precision) & ~stuck
    else:
        if active.any():
            raise NumericalError(f"bisection did not converge in {MAX_BISECTION_ITERS} iterations")

    total = d_hi.sum(axis=1, keepdims=True)
    if not np.all(np.isfinite(total)) or np.any(total <= 0):
        raise NumericalError(f"{p.token}: bisection produced an invalid mass")
    return _wrap(d_hi / total, hi, single, shape)


def project(scores, p: OmegaPotential, precision: float = DEFAULT_PRECISION) -> ProjectionResult:
    """Bregman projection of ``grad h*(scores)``, using a closed form when one exists."""
    if p.kind == "entropy":
        return project_softmax(scores)
    if p.kind == "l2":
        return project_euclidean(scores)
    if p.kind == "eps-entropy":
        return project_eps_entropy(scores, p.param)
    return project_bisection(scores, p, precision)
