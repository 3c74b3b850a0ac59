"""Omega-potential mirror maps on the probability simplex.

An omega-potential is an increasing map ``phi: (-inf, u) -> (omega, +inf)``.
It generates the separable mirror map

    h(p) = sum_a  int_1^{p_a} phi^{-1}(x) dx

whose gradient is ``phi^{-1}`` applied coordinatewise, and whose convex
conjugate gradient is ``phi``.  Every function here works on the last axis of
its array arguments, so a whole policy table (states x actions) can be passed
at once.

Extended reals are plain IEEE floats: ``-np.inf`` is returned where
``phi^{-1}(0)`` diverges (entropy-like potentials).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit, xlogy

from .exceptions import ConfigError, DomainError, SimplexError, SupportError

__all__ = [
    "KINDS",
    "OmegaPotential",
    "parse_mirror_map",
    "potential_value",
    "potential_inverse",
    "mirror_map_value",
    "grad_mirror_map",
    "bregman_divergence",
    "bregman_divergence_extended",
    "check_simplex",
]

KINDS = ("entropy", "l2", "eps-entropy", "tsallis", "hyperbolic", "tanh")

# exp() argument clamp; callers needing exactness pre-shift their inputs
_EXP_CLAMP = 700.0
SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class OmegaPotential:
    """A strictly increasing potential together with its domain limits.

    Parameters
    ----------
    kind : str
        One of ``KINDS``.
    param : float, optional
        ``eps`` for ``"eps-entropy"``, the entropic index ``q`` for
        ``"tsallis"`` and the scale ``b`` for ``"hyperbolic"``.
    """

    kind: str
    param: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown mirror map kind {self.kind!r}")
        needs_param = self.kind in ("eps-entropy", "tsallis", "hyperbolic")
        if needs_param:
            if self.param is None or not np.isfinite(self.param) or self.param <= 0:
                raise ConfigError(f"{self.kind} needs a positive finite parameter, got {self.param!r}")
            if self.kind == "tsallis" and self.param == 1.0:
                raise ConfigError("tsallis with q = 1 is the negative entropy; use kind='entropy'")
            object.__setattr__(self, "param", float(self.param))
        elif self.param is not None:
            raise ConfigError(f"{self.kind} takes no parameter")
        if self.kind == "tsallis":
            self._check_monotone()

    def _check_monotone(self):
        # the Tsallis branch is only defined piecewise, so confirm it is increasing where it is positive
        hi = min(self.u, 50.0)
        xs = np.linspace(hi - 100.0, hi, 2001)[:-1]
        ys = self.phi(xs)
        pos = ys > 0
        if not np.all(np.diff(ys[pos]) > 0):
            raise ConfigError(f"tsallis q={self.param} is not increasing on its support")

    @property
    def token(self) -> str:
        """The config/CLI token that parses back to this potential."""
        if self.param is None:
            return self.kind
        return f"{self.kind}:{self.param!r}"

    @property
    def omega(self) -> float:
        """Infimum of phi (the limit at -inf)."""
        if self.kind == "eps-entropy":
            return -self.param
        if self.kind in ("l2", "hyperbolic"):
            return -np.inf
        return 0.0

    @property
    def u(self) -> float:
        """Supremum of phi's domain."""
        if self.kind == "tsallis" and self.param < 1:
            return 0.0
        return np.inf

    @property
    def sup_value(self) -> float:
        """Supremum of phi (1 for the tanh potential, +inf otherwise)."""
        return 1.0 if self.kind == "tanh" else np.inf

    # raw elementwise maps, no validation; used in inner loops

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k == "entropy":
            return np.exp(np.minimum(x, _EXP_CLAMP) - 1.0)
        if k == "l2":
            return x.copy()
        if k == "eps-entropy":
            return np.exp(np.minimum(x, _EXP_CLAMP) - 1.0) - self.param
        if k == "tsallis":
            q = self.param
            z = np.maximum((q - 1.0) * x / q, 0.0)
            with np.errstate(divide="ignore", over="ignore"):
                return np.power(z, 1.0 / (q - 1.0))
        if k == "hyperbolic":
            return self.param * np.sinh(np.clip(x, -_EXP_CLAMP, _EXP_CLAMP))
        # tanh(x)/2 + 1/2 written as a logistic, which keeps the lower tail accurate
        return expit(2.0 * x)

    def phi_inv(self, y):
        y = np.asarray(y, dtype=float)
        k = self.kind
        with np.errstate(divide="ignore"):
            if k == "entropy":
                return np.log(y) + 1.0
            if k == "l2":
                return y.copy()
            if k == "eps-entropy":
                return np.log(y + self.param) + 1.0
            if k == "tsallis":
                q = self.param
                return q / (q - 1.0) * np.power(y, q - 1.0)
            if k == "hyperbolic":
                return np.arcsinh(y / self.param)
            return 0.5 * logit(y)  # arctanh(2y - 1)

    def h_coord(self, p):
        """Per-coordinate integral ``int_1^p phi^{-1}``; ``h`` is its sum."""
        p = np.asarray(p, dtype=float)
        k = self.kind
        if k == "entropy":
            return xlogy(p, p)
        if k == "l2":
            return 0.5 * (p * p - 1.0)
        if k == "eps-entropy":
            e = self.param
            return xlogy(p + e, p + e) - (1.0 + e) * np.log1p(e)
        if k == "tsallis":
            q = self.param
            return (np.power(p, q) - 1.0) / (q - 1.0)
        if k == "hyperbolic":
            b = self.param
            f1 = np.arcsinh(1.0 / b) - np.hypot(1.0, b)
            return p * np.arcsinh(p / b) - np.hypot(p, b) - f1
        # tanh: antiderivative 0.5*(p log p + (1-p) log(1-p)), which vanishes at p = 1
        return 0.5 * (xlogy(p, p) + xlogy(1.0 - p, 1.0 - p))


def parse_mirror_map(token: str) -> OmegaPotential:
    """Parse a mirror-map token such as ``"entropy"`` or ``"tsallis:2"``.

    ``tsallis:1`` is the negative entropy and parses to ``"entropy"``.
    """
    if not isinstance(token, str):
        raise ConfigError(f"mirror map token must be a string, got {token!r}")
    name, sep, arg = token.strip().partition(":")
    if name in ("entropy", "l2", "tanh"):
        if sep:
            raise ConfigError(f"{name} takes no parameter: {token!r}")
        return OmegaPotential(name)
    if name in ("eps-entropy", "tsallis", "hyperbolic"):
        if not sep:
            raise ConfigError(f"{name} needs a parameter, e.g. '{name}:0.5'")
        try:
            value = float(arg)
        except ValueError:
            raise ConfigError(f"bad parameter in mirror map token {token!r}") from None
        if name == "tsallis" and value == 1.0:
            return OmegaPotential("entropy")
        return OmegaPotential(name, value)
    raise ConfigError(f"unknown mirror map token {token!r}")


def check_simplex(dist, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Return ``dist`` as a float array after checking each row lies on the simplex."""
    dist = np.asarray(dist, dtype=float)
    if dist.ndim == 0 or dist.shape[-1] == 0:
        raise SimplexError("a probability vector needs at least one entry")
    if not np.all(np.isfinite(dist)):
        raise SimplexError("probability vector has non-finite entries")
    if np.any(dist < 0):
        raise SimplexError(f"negative probability {dist.min()!r}")
    err = np.max(np.abs(dist.sum(axis=-1) - 1.0))
    if err > tol:
        raise SimplexError(f"probabilities sum to 1 only within {err:.3g}")
    return dist


def potential_value(p: OmegaPotential, x):
    """Evaluate phi(x); raises DomainError for ``x >= u``."""
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise DomainError("phi evaluated at NaN")
    if np.isfinite(p.u) and np.any(x >= p.u):
        raise DomainError(f"{p.token}: phi is defined only below u = {p.u}")
    out = p.phi(x)
    return float(out) if out.ndim == 0 else out


def potential_inverse(p: OmegaPotential, y):
    """Evaluate phi^{-1}(y) for ``y >= 0``; returns ``-inf`` where y equals omega = 0."""
    y = np.asarray(y, dtype=float)
    if np.any(np.isnan(y)) or np.any(y < 0):
        raise DomainError(f"phi^-1 needs y >= 0, got min {np.nanmin(y) if y.size else y!r}")
    if np.any(y > p.sup_value):
        raise DomainError(f"{p.token}: phi^-1 is defined only up to {p.sup_value}")
    out = p.phi_inv(y)
    return float(out) if out.ndim == 0 else out


def mirror_map_value(p: OmegaPotential, dist):
    """h(dist), summed over the last axis.  Boundary points are allowed (0 log 0 = 0)."""
    dist = check_simplex(dist)
    out = p.h_coord(dist).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def grad_mirror_map(p: OmegaPotential, dist) -> np.ndarray:
    """Gradient of h: phi^{-1} applied coordinatewise; may contain ``-inf``."""
    dist = check_simplex(dist)
    return p.phi_inv(dist)


def bregman_divergence(p: OmegaPotential, x, y):
    """D_h(x, y) = h(x) - h(y) - <grad h(y), x - y>, over the last axis.

    Raises SupportError when ``grad h(y)`` is infinite (``y`` on the simplex
    boundary under an entropy-like potential).
    """
    x = check_simplex(x)
    y = check_simplex(y)
    gy = p.phi_inv(y)
    if not np.all(np.isfinite(gy)):
        raise SupportError(f"{p.token}: D_h(x, y) needs y with full support")
    if p.kind == "entropy":
        # sums of x and y are both one, so the linear terms cancel to -x + y
        terms = xlogy(x, x) - xlogy(x, y) - x + y
    else:
        terms = p.h_coord(x) - p.h_coord(y) - gy * (x - y)
    out = terms.sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def bregman_divergence_extended(p: OmegaPotential, x, y):
    """D_h(x, y) allowing ``y`` on the boundary.

    Coordinates where both ``x`` and ``y`` vanish contribute zero; a coordinate
    where ``y`` vanishes, ``x`` does not, and ``phi^{-1}(0) = -inf`` makes the
    divergence ``+inf``.
    """
    x = check_simplex(x)
    y = check_simplex(y)
    gy = p.phi_inv(y)
    finite = np.isfinite(gy)
    if p.kind == "entropy":
        with np.errstate(divide="ignore"):
            terms = xlogy(x, x) - xlogy(x, np.where(finite, y, 1.0)) - x + y
    else:
        terms = p.h_coord(x) - p.h_coord(y) - np.where(finite, gy, 0.0) * (x - y)
    terms = np.where(finite, terms, np.where(x > 0, np.inf, 0.0))
    out = terms.sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out
