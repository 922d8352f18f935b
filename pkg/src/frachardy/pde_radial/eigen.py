"""Weighted first eigenvalue of the p-Laplacian and the positive profile X."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from ..domain_potential import PotentialSpec
from ..errors import ConvergenceError, ParameterError, RegimeError
from .grid import RadialGrid, flux, gradient, p_energy, stiffness_jacobian
from .solver import _positive_definite_solve, stiffness_apply

__all__ = ["EigenResult", "eigen_first", "positive_profile_x", "rayleigh_quotient", "profile_residual"]


@dataclass(frozen=True, eq=False)
class EigenResult:
    """``lambda_n`` with its positive minimizer, scaled so ``int W_N X^p = 1``.

    ``residual`` is the max-norm of ``-Delta_p X - lambda W_N X^{p-1}`` relative
    to the max-norm of ``lambda W_N X^{p-1}``.
    """

    lambda_n: float
    profile: np.ndarray
    residual: float
    iterations: int
    N: float | None
    grid: RadialGrid


def rayleigh_quotient(v, grid: RadialGrid, weight, p: float) -> float:
    """``int |v'|^p r^{n-1} dr / int weight |v|^p r^{n-1} dr``."""
    den = (weight * np.abs(v) ** p) @ grid.volumes
    if not den > 0:
        raise ParameterError("profile has zero weighted p-norm")
    return p_energy(v, grid, p) / den


def _initial_profile(grid: RadialGrid, spec: PotentialSpec) -> np.ndarray:
    # behaviour of the Hardy extremal at the origin and at the sphere
    r = grid.nodes
    a = (spec.n - spec.p) / spec.p
    b = (spec.p - 1.0) / spec.p
    return r ** (-a) * (grid.R - r) ** b


def _solve_plaplace(f, u, grid: RadialGrid, p: float, tol: float = 1e-13, maxiter: int = 100):
    """Solve ``-V Delta_p u = f`` by Newton on the convex energy ``P(u)/p - f.u``."""

    def energy(v):
        return p_energy(v, grid, p) / p - f @ v

    E = energy(u)
    best = math.inf
    stalled = 0
    for it in range(maxiter):
        G = stiffness_apply(u, grid, p, 0.0) - f
        g_norm = np.max(np.abs(G))
        scale = max(np.max(np.abs(f)), np.max(np.abs(flux(u, grid, p))), 1e-300)
        if g_norm <= tol * scale:
            return u
        # roundoff floor: no further progress but already small
        stalled = stalled + 1 if g_norm >= 0.9 * best else 0
        best = min(best, g_norm)
        if stalled >= 3 and g_norm <= 1e4 * tol * scale:
            return u
        diag, off = stiffness_jacobian(u, grid, p, 0.0, floor=1e-14 * scale)
        d = _positive_definite_solve(diag, off, -G)
        if d is None:
            raise ConvergenceError("p-Laplace Jacobian is not positive definite")
        t = 1.0
        while True:
            cand = u + t * d
            Ec = energy(cand)
            if Ec <= E + 1e-4 * t * (G @ d):
                break
            if t == 1.0 and np.max(np.abs(stiffness_apply(cand, grid, p, 0.0) - f)) <= 0.5 * g_norm:
                break
            t *= 0.5
            if t < 1e-12:
                if g_norm <= 1e4 * tol * scale:
                    return u
                raise ConvergenceError("line search failed in the p-Laplace solve")
        u, E = cand, Ec
    raise ConvergenceError("p-Laplace Newton iteration did not converge")


def eigen_first(
    spec: PotentialSpec,
    N: float | None,
    grid: RadialGrid,
    tol: float = 1e-11,
    residual_tol: float = 1e-8,
    maxiter: int = 2000,
) -> EigenResult:
    """Minimize the discrete Rayleigh quotient with weight ``W_N``.

    Inverse power iteration: each sweep solves ``-Delta_p u = W_N v^{p-1}`` and
    renormalizes. The quotient decreases monotonically and the iterates stay
    positive. Stops once the quotient changes by less than ``tol`` relative
    and the relative eigen-equation residual is below ``residual_tol``.
    """
    p = spec.p
    W = grid.potential(spec, N)
    V = grid.volumes
    v = _initial_profile(grid, spec)
    lam = rayleigh_quotient(v, grid, W, p)
    res = math.inf
    for it in range(1, maxiter + 1):
        v = v / ((W * v**p) @ V) ** (1.0 / p)
        f = V * W * v ** (p - 1.0)
        v = _solve_plaplace(f, v * lam ** (-1.0 / (p - 1.0)), grid, p)
        lam_prev, lam = lam, rayleigh_quotient(v, grid, W, p)
        res = _eigen_residual(v, lam, grid, W, p)
        if abs(lam_prev - lam) <= tol * lam and res <= residual_tol:
            break
    else:
        raise ConvergenceError(
            f"eigen iteration stalled at lambda={lam:.12g}, residual {res:.3e} after {maxiter} sweeps"
        )
    v = v / ((W * v**p) @ V) ** (1.0 / p)
    if not np.all(v > 0):
        raise ConvergenceError("eigenfunction lost positivity")
    return EigenResult(lam, v, _eigen_residual(v, lam, grid, W, p), it, N, grid)


def _eigen_residual(v, lam, grid, W, p) -> float:
    rhs = lam * grid.volumes * W * np.abs(v) ** (p - 1.0)
    return float(np.max(np.abs(stiffness_apply(v, grid, p, 0.0) - rhs)) / np.max(np.abs(rhs)))


def profile_residual(X, spec: PotentialSpec, N: float | None, grid: RadialGrid, sigma: float = 0.0) -> np.ndarray:
    """Pointwise ``-Delta_p X - mu W_N |X|^{p-2} X + X`` at the nodes."""
    p = spec.p
    W = grid.potential(spec, N)
    return stiffness_apply(X, grid, p, sigma) / grid.volumes - spec.mu * W * np.abs(X) ** (p - 2.0) * X + X


def positive_profile_x(
    spec: PotentialSpec,
    N: float | None,
    grid: RadialGrid,
    tol: float = 1e-10,
    maxiter: int = 200,
    sigma: float = 0.0,
    eigen: EigenResult | None = None,
) -> np.ndarray:
    """Positive solution of ``-Delta_p X - mu W_N X^{p-1} = -X``.

    Requires ``mu > lambda_N``. The seed is the first eigenfunction scaled onto
    the Nehari manifold; Newton steps are damped by halving whenever they
    would make a node nonpositive or fail to reduce the residual.
    """
    p, mu = spec.p, spec.mu
    eig = eigen or eigen_first(spec, N, grid)
    if not mu > eig.lambda_n:
        raise RegimeError(f"mu = {mu:.6g} <= lambda_N = {eig.lambda_n:.6g}: no positive profile")
    W = grid.potential(spec, N)
    V = grid.volumes
    phi = eig.profile
    t = ((V * phi * phi).sum() / ((mu - eig.lambda_n) * (V * W * phi**p).sum())) ** (1.0 / (p - 2.0))
    X = t * phi

    def resid(x):
        return stiffness_apply(x, grid, p, sigma) - mu * V * W * np.abs(x) ** (p - 2.0) * x + V * x

    G = resid(X)
    for it in range(maxiter):
        pointwise = np.max(np.abs(G / V))
        if pointwise <= tol * max(1.0, np.max(X)):
            break
        diag, off = stiffness_jacobian(X, grid, p, sigma)
        diag = diag - mu * (p - 1.0) * V * W * np.abs(X) ** (p - 2.0) + V
        ab = np.zeros((3, X.size))
        ab[0, 1:] = off
        ab[1] = diag
        ab[2, :-1] = off
        try:
            d = solve_banded((1, 1), ab, -G, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise ConvergenceError(f"singular Jacobian in the profile solve: {exc}") from exc
        step = 1.0
        g_norm = np.linalg.norm(G / V)
        while True:
            cand = X + step * d
            if np.all(cand > 0):
                Gc = resid(cand)
                if np.linalg.norm(Gc / V) < (1.0 - 1e-4 * step) * g_norm:
                    break
            step *= 0.5
            if step < 1e-12:
                raise ConvergenceError("profile iteration cannot keep X positive while reducing the residual")
        X, G = cand, Gc
    else:
        raise ConvergenceError("profile iteration did not converge")
    return X
