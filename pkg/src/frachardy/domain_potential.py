"""Radial domain, the double-singular potential, and a priori constants.

The domain is the ball of radius ``R`` in dimension ``n`` (a real parameter).
The potential

    W(r) = r^{-p} [1 - (r/R)^kappa]^{-p}

is singular at the origin and on the sphere ``r = R``. The Hardy constant
``Lambda(n, p) = ((n - p)/p)^p`` is optimal for ``kappa = (n - p)/(p - 1)``,
where ``(r^{-kappa} - R^{-kappa})^{(p-1)/p}`` is the ground state. The
alternative ``kappa = (n - p)/p`` (selected with ``boundary_exponent="printed"``)
makes ``W ~ ((n - p)/p)^{-p} (R - r)^{-p}`` near the sphere, and the
one-dimensional boundary Hardy constant ``((p - 1)/p)^p < 1`` then rules out
the inequality with ``Lambda``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DomainError, ParameterError, RegimeError
from .fracops import FracParams, gamma

__all__ = [
    "RadialDomain",
    "PotentialSpec",
    "AprioriConstants",
    "hardy_constant",
    "potential_w",
    "potential_w_truncated",
    "potential_minimizer",
    "omega0",
    "apriori_constants",
]


@dataclass(frozen=True)
class RadialDomain:
    n: float
    R: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.n) and self.n > 1.0):
            raise ParameterError(f"dimension n must exceed 1, got {self.n}")
        if not (math.isfinite(self.R) and self.R > 0.0):
            raise ParameterError(f"radius must be positive, got {self.R}")


@dataclass(frozen=True)
class PotentialSpec:
    """Exponent ``p > 2``, coupling ``mu >= 0``, and the ball.

    ``boundary_exponent`` is ``"hardy"`` (default, ``kappa = (n-p)/(p-1)``),
    ``"printed"`` (``kappa = (n-p)/p``) or an explicit positive float.
    """

    p: float
    mu: float
    domain: RadialDomain
    boundary_exponent: str | float = "hardy"

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p > 2.0):
            raise ParameterError(f"p must exceed 2, got {self.p}")
        if not self.domain.n > self.p:
            raise ParameterError(f"need n > p, got n={self.domain.n}, p={self.p}")
        if not (math.isfinite(self.mu) and self.mu >= 0.0):
            raise ParameterError(f"mu must be nonnegative, got {self.mu}")
        self.kappa  # validates boundary_exponent

    @property
    def n(self) -> float:
        return self.domain.n

    @property
    def R(self) -> float:
        return self.domain.R

    @property
    def kappa(self) -> float:
        n, p, b = self.domain.n, self.p, self.boundary_exponent
        if b == "hardy":
            return (n - p) / (p - 1.0)
        if b == "printed":
            return (n - p) / p
        if isinstance(b, str):
            raise ParameterError(f"unknown boundary exponent {b!r}")
        if not b > 0:
            raise ParameterError("boundary exponent must be positive")
        return float(b)

    @property
    def hardy(self) -> float:
        return hardy_constant(self.domain.n, self.p)

    def with_mu(self, mu: float) -> "PotentialSpec":
        return PotentialSpec(self.p, mu, self.domain, self.boundary_exponent)


def hardy_constant(n: float, p: float) -> float:
    """Optimal constant ``((n - p)/p)^p``."""
    if not p > 1.0:
        raise ParameterError(f"p must exceed 1, got {p}")
    if not n > p:
        raise ParameterError(f"need n > p, got n={n}, p={p}")
    return ((n - p) / p) ** p


def potential_w(r, spec: PotentialSpec):
    r = np.asarray(r, dtype=float)
    R = spec.R
    if np.any(r <= 0.0) or np.any(r >= R):
        raise DomainError("W is only finite for 0 < r < R")
    out = r ** (-spec.p) * (1.0 - (r / R) ** spec.kappa) ** (-spec.p)
    return float(out) if out.ndim == 0 else out


def potential_w_truncated(r, spec: PotentialSpec, N: float):
    """``W_N = min(N, W)``."""
    if not N >= 1.0:
        raise ParameterError(f"truncation level must be >= 1, got {N}")
    out = np.minimum(N, potential_w(r, spec))
    return float(out) if np.ndim(out) == 0 else out


def _dlog_w(r: float, spec: PotentialSpec) -> float:
    z = (r / spec.R) ** spec.kappa
    return spec.p / r * (-1.0 + spec.kappa * z / (1.0 - z))


def potential_minimizer(spec: PotentialSpec) -> float:
    """Radius of the global minimum of W.

    Golden-section search on ``log W`` followed by bisection on the sign of
    its derivative, which changes exactly once on (0, R).
    """
    R = spec.R
    f = lambda r: math.log(potential_w(r, spec))  # noqa: E731
    a, c = 1e-6 * R, (1.0 - 1e-6) * R
    grid = np.linspace(a, c, 65)
    vals = [f(x) for x in grid]
    i = int(np.argmin(vals))
    i = min(max(i, 1), len(grid) - 2)
    res = minimize_scalar(f, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden", tol=1e-10)
    x = float(res.x)
    width = 2.0 * (grid[1] - grid[0])
    lo, hi = max(a, x - width), min(c, x + width)
    if _dlog_w(lo, spec) < 0.0 < _dlog_w(hi, spec):
        x = brentq(_dlog_w, lo, hi, args=(spec,), xtol=1e-15 * R, rtol=4 * np.finfo(float).eps)
    return x


def omega0(spec: PotentialSpec) -> float:
    """``min_{0<r<R} W(r) > 0``."""
    return potential_w(potential_minimizer(spec), spec)


@dataclass(frozen=True)
class AprioriConstants:
    epsilon: float
    omega0: float
    gamma: float
    c3: float
    a1: float
    a2: float
    hardy: float
    mu: float
    alpha: float
    horizon: float

    def check(self) -> None:
        """Re-assert the defining relations from the stored fields."""
        if not 0.0 < self.epsilon < min(self.omega0, self.hardy - self.mu):
            raise AssertionError("epsilon outside (0, min(omega0, Lambda - mu))")
        g = 2.0 * (1.0 - (self.mu + self.epsilon) / self.hardy)
        if not (g > 0 and math.isclose(g, self.gamma, rel_tol=1e-14)):
            raise AssertionError("gamma inconsistent")
        if not math.isclose(self.a1, self.c3 / self.gamma, rel_tol=1e-14, abs_tol=0.0):
            raise AssertionError("A1 inconsistent")
        a2 = self.c3 / (2.0 * self.epsilon * self.omega0 * gamma(1.0 - self.alpha))
        if not math.isclose(self.a2, a2, rel_tol=1e-14, abs_tol=0.0):
            raise AssertionError("A2 inconsistent")


def apriori_constants(
    spec: PotentialSpec,
    alpha: float,
    horizon: float,
    u0_l2_squared: float,
    epsilon: float | None = None,
) -> AprioriConstants:
    """Constants of the space-time bounds on ``|grad u|^p`` and ``|u|^p``.

    ``epsilon`` defaults to half of ``min(omega0, Lambda - mu)``. The bounds are
    ``A1 = C3 / gamma`` and ``A2 = C3 / (2 epsilon omega0 Gamma(1 - alpha))`` with
    ``C3 = 3 T^{1-alpha} / (1 - alpha) * int u0^2``.
    """
    FracParams(alpha)
    if not horizon > 0:
        raise ParameterError("horizon must be positive")
    if u0_l2_squared < 0:
        raise ParameterError("squared L2 norm must be nonnegative")
    lam = spec.hardy
    if spec.mu >= lam:
        raise RegimeError(f"mu = {spec.mu} >= Lambda = {lam}: a priori bounds do not apply")
    w0 = omega0(spec)
    cap = min(w0, lam - spec.mu)
    if epsilon is None:
        epsilon = 0.5 * cap
    elif not 0.0 < epsilon < cap:
        raise ParameterError(f"epsilon must lie in (0, {cap})")
    g = 2.0 * (1.0 - (spec.mu + epsilon) / lam)
    c3 = 3.0 * horizon ** (1.0 - alpha) / (1.0 - alpha) * u0_l2_squared
    return AprioriConstants(
        epsilon=epsilon,
        omega0=w0,
        gamma=g,
        c3=c3,
        a1=c3 / g,
        a2=c3 / (2.0 * epsilon * w0 * gamma(1.0 - alpha)),
        hardy=lam,
        mu=spec.mu,
        alpha=alpha,
        horizon=horizon,
    )
