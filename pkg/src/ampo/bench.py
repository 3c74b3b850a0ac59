"""Wall-clock timing of simplex projections as the action count grows."""

from __future__ import annotations

import math
import timeit
from dataclasses import dataclass

import numpy as np

from .mirror_maps import parse_mirror_map
from .projection import DEFAULT_PRECISION, project, project_bisection

__all__ = ["BenchRow", "time_projection", "bench", "doubling_ratios", "affine_fit", "BENCH_COLUMNS"]

BENCH_COLUMNS = ("kind", "method", "n_actions", "precision", "seconds")


@dataclass(frozen=True)
class BenchRow:
    kind: str
    method: str  # "closed" or "bisection"
    n_actions: int
    precision: float
    seconds: float  # best-of-repeats time for one projection


def time_projection(token: str, n: int, method: str = "bisection", precision: float = DEFAULT_PRECISION,
                    repeats: int = 5, seed: int = 0) -> float:
    """Best-of-``repeats`` seconds per projection of one random score vector."""
    p = parse_mirror_map(token)
    x = np.random.default_rng(seed).normal(0.0, 1.0, size=n)
    if method == "bisection":
        fn = lambda: project_bisection(x, p, precision)  # noqa: E731
    else:
        fn = lambda: project(x, p, precision)  # noqa: E731
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    number = max(1, number // 4)
    return min(timer.repeat(repeat=repeats, number=number)) / number


def bench(tokens=("entropy", "l2", "tsallis:2", "hyperbolic:1"), sizes=None, precision: float = DEFAULT_PRECISION,
          repeats: int = 5, seed: int = 0) -> list[BenchRow]:
    """Bisection timings for every token, plus the closed form where one exists."""
    sizes = [2**k for k in range(1, 15)] if sizes is None else list(sizes)
    rows = []
    for token in tokens:
        p = parse_mirror_map(token)
        for n in sizes:
            t = time_projection(token, n, "bisection", precision, repeats, seed)
            rows.append(BenchRow(p.token, "bisection", n, precision, t))
            if p.kind in ("entropy", "l2", "eps-entropy"):
                t = time_projection(token, n, "closed", precision, repeats, seed)
                rows.append(BenchRow(p.token, "closed", n, precision, t))
    return rows


def doubling_ratios(rows, kind: str, method: str = "bisection") -> np.ndarray:
    """time(2n) / time(n) for consecutive doublings of the action count."""
    kind = parse_mirror_map(kind).token
    sel = sorted((r.n_actions, r.seconds) for r in rows if r.kind == kind and r.method == method)
    out = []
    for (n1, t1), (n2, t2) in zip(sel, sel[1:]):
        if n2 == 2 * n1:
            out.append(t2 / t1)
    return np.array(out)


def affine_fit(rows, kind: str, method: str = "bisection"):
    """Fit ``t = a + c * n * log(1 / precision)``; returns (a, c, worst ratio of measured to fitted time)."""
    kind = parse_mirror_map(kind).token
    sel = [r for r in rows if r.kind == kind and r.method == method]
    n = np.array([r.n_actions for r in sel], dtype=float)
    t = np.array([r.seconds for r in sel])
    work = n * np.array([math.log(1.0 / r.precision) for r in sel])
    # relative least squares: weight each point by 1 / t
    X = np.stack([np.ones_like(work), work], axis=1) / t[:, None]
    (a, c), *_ = np.linalg.lstsq(X, np.ones_like(t), rcond=None)
    fit = a + c * work
    worst = float(np.max(np.maximum(t / fit, fit / t))) if np.all(fit > 0) else math.inf
    return float(a), float(c), worst
