"""L1 time stepping for the truncated radial problem.

At step ``k`` the scheme solves, node by node (multiplied by cell volumes ``V``),

    b V (u - u_{k-1}) + V H_k = V Delta_p u + mu V W_N |u|^{p-2} u,

where ``b`` is the leading L1 coefficient and ``H_k`` the memory of earlier
increments. The p-Laplacian is handled by frozen-coefficient Picard sweeps
(one tridiagonal solve each) with the potential term lagged inside the loop.
A damped Newton iteration on the same system polishes the swept iterate until
the nodal residual is small, or restarts from the previous level when the
sweeps fail to settle; if that fails too the step is reported as diverged.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import solveh_banded

from ..domain_potential import PotentialSpec
from ..errors import ParameterError, ShapeError, SolverError
from ..fracops import FracParams, L1Weights, TimeGrid, caputo_apply, l1_weights
from .grid import (
    RadialGrid,
    default_sigma,
    flux,
    frozen_stiffness,
    gradient,
    p_energy,
    p_laplacian_radial,
    solve_tridiagonal,
    stiffness_jacobian,
)

__all__ = [
    "PdeProblem",
    "PdeState",
    "RunReport",
    "Thresholds",
    "BlowupVerdict",
    "StepDivergence",
    "initial_state",
    "step",
    "solve",
    "blowup_detect",
    "smooth_bump",
    "stiffness_apply",
    "scheme_residual",
]

PICARD_MAX_SWEEPS = 50
PICARD_TOL = 1e-10
NEWTON_MAX_ITER = 200
NEWTON_TOL = 1e-12
DIVERGENCE_CAP = 1e12


class StepDivergence(SolverError):
    """The implicit system of one time step has no computable solution."""


@dataclass(frozen=True, eq=False)
class PdeProblem:
    """Truncated problem on a radial grid.

    ``N=None`` evaluates the untruncated ``W`` at the nodes, which is finite
    because no node touches ``r = 0`` or ``r = R``.
    """

    spec: PotentialSpec
    alpha: float
    u0: np.ndarray
    time_grid: TimeGrid
    grid: RadialGrid
    N: float | None = None
    sigma: float | None = None

    def __post_init__(self):
        FracParams(self.alpha)
        u0 = np.array(self.u0, dtype=float)
        if u0.shape != (self.grid.m,):
            raise ShapeError(f"u0 must have shape ({self.grid.m},), got {u0.shape}")
        if not np.all(np.isfinite(u0)):
            raise ParameterError("u0 must be finite at every node")
        u0.setflags(write=False)
        object.__setattr__(self, "u0", u0)
        if self.N is not None and not self.N >= 1:
            raise ParameterError(f"truncation level must be >= 1, got {self.N}")
        if self.sigma is None:
            object.__setattr__(self, "sigma", default_sigma(self.grid))
        elif not self.sigma >= 0:
            raise ParameterError("sigma must be nonnegative")

    @property
    def p(self) -> float:
        return self.spec.p

    @property
    def mu(self) -> float:
        return self.spec.mu

    @cached_property
    def params(self) -> FracParams:
        return FracParams(self.alpha)

    @cached_property
    def weights(self) -> L1Weights:
        return l1_weights(self.time_grid, self.params)

    @cached_property
    def potential(self) -> np.ndarray:
        return self.grid.potential(self.spec, self.N)

    def with_u0(self, u0) -> "PdeProblem":
        return PdeProblem(self.spec, self.alpha, u0, self.time_grid, self.grid, self.N, self.sigma)

    def with_N(self, N: float | None) -> "PdeProblem":
        return PdeProblem(self.spec, self.alpha, self.u0, self.time_grid, self.grid, N, self.sigma)

    def with_time_grid(self, time_grid: TimeGrid) -> "PdeProblem":
        return PdeProblem(self.spec, self.alpha, self.u0, time_grid, self.grid, self.N, self.sigma)


@dataclass(eq=False)
class PdeState:
    """Solution at node ``k`` plus the increment history the L1 memory needs.

    ``increments`` is a ``(K, m)`` buffer shared between successive states of
    one run; row ``j - 1`` holds ``u_j - u_{j-1}``.
    """

    k: int
    u: np.ndarray
    increments: np.ndarray
    picard_sweeps: int = 0
    newton_iterations: int = 0
    used_newton: bool = False


def initial_state(problem: PdeProblem) -> PdeState:
    K, m = problem.time_grid.steps, problem.grid.m
    return PdeState(0, problem.u0.copy(), np.zeros((K, m)))


def stiffness_apply(u, grid: RadialGrid, p: float, sigma: float) -> np.ndarray:
    """``-V * Delta_p u``: net outward flux of each cell, sign flipped."""
    F = flux(u, grid, p, sigma)
    out = -F
    out[1:] += F[:-1]
    return out


def _residual(u, rhs0, bV, problem, VW):
    p = problem.p
    return bV * u + stiffness_apply(u, problem.grid, p, problem.sigma) - problem.mu * VW * np.abs(u) ** (p - 2.0) * u - rhs0


def _step_energy(u, rhs0, bV, problem, VW):
    """Functional whose gradient is :func:`_residual`."""
    grid, p, s = problem.grid, problem.p, problem.sigma
    g = gradient(u, grid)
    smooth = ((g * g + s * s) ** (0.5 * p)) @ (grid.face_area * grid.face_spacing) / p
    return 0.5 * (bV * u) @ u - rhs0 @ u + smooth - problem.mu / p * (VW @ np.abs(u) ** p)


def _picard(u, rhs0, bV, problem, VW):
    p, grid, sigma, mu = problem.p, problem.grid, problem.sigma, problem.mu
    growing = 0
    last_change = math.inf
    for sweep in range(1, PICARD_MAX_SWEEPS + 1):
        diag, off = frozen_stiffness(u, grid, p, sigma)
        rhs = rhs0 + mu * VW * np.abs(u) ** (p - 2.0) * u
        new = solve_tridiagonal(diag + bV, off, rhs)
        if not np.all(np.isfinite(new)) or np.max(np.abs(new)) > DIVERGENCE_CAP:
            return None, sweep
        change = np.max(np.abs(new - u))
        u = new
        if change <= PICARD_TOL * max(1.0, np.max(np.abs(u))):
            return u, sweep
        growing = growing + 1 if change > last_change else 0
        if growing >= 3:
            return None, sweep
        last_change = change
    return None, PICARD_MAX_SWEEPS


def _positive_definite_solve(diag, off, rhs):
    ab = np.zeros((2, diag.size))
    ab[0, 1:] = off
    ab[1] = diag
    try:
        return solveh_banded(ab, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        return None


def _newton(u, rhs0, bV, problem, VW):
    """Damped Newton minimization of :func:`_step_energy`.

    Where the Hessian is indefinite the frozen-coefficient matrix, which is
    always positive definite, supplies a descent direction instead.
    """
    p, grid, sigma, mu = problem.p, problem.grid, problem.sigma, problem.mu
    V = grid.volumes
    E = _step_energy(u, rhs0, bV, problem, VW)
    for it in range(1, NEWTON_MAX_ITER + 1):
        G = _residual(u, rhs0, bV, problem, VW)
        g_norm = np.max(np.abs(G))
        # node-wise test: a global norm lets tiny cells near the origin slip
        F = np.abs(flux(u, grid, p, sigma))
        size = np.abs(rhs0) + np.abs(bV * u) + F + mu * VW * np.abs(u) ** (p - 1.0) + V
        size[1:] += F[:-1]
        local = np.max(np.abs(G) / size)
        if local <= NEWTON_TOL:
            return u, it
        diag, off = stiffness_jacobian(u, grid, p, sigma)
        diag = diag + bV - mu * (p - 1.0) * VW * np.abs(u) ** (p - 2.0)
        d = _positive_definite_solve(diag, off, -G)
        if d is None:
            fd, fo = frozen_stiffness(u, grid, p, sigma)
            d = _positive_definite_solve(fd + bV, fo, -G)
        if d is None or not np.all(np.isfinite(d)):
            return None, it
        slope = G @ d
        t = 1.0
        while True:
            cand = u + t * d
            Ec = _step_energy(cand, rhs0, bV, problem, VW)
            if np.isfinite(Ec) and Ec <= E + 1e-4 * t * slope:
                break
            # near the root the energy decrease drops below roundoff
            if t == 1.0 and np.max(np.abs(_residual(cand, rhs0, bV, problem, VW))) <= 0.5 * g_norm:
                break
            t *= 0.5
            if t < 1e-12:
                return (u if local <= 1e3 * NEWTON_TOL else None), it
        u, E = cand, Ec
        if np.max(np.abs(u)) > DIVERGENCE_CAP:
            return None, it
    return None, NEWTON_MAX_ITER


def step(state: PdeState, problem: PdeProblem) -> PdeState:
    """Advance ``state`` by one time step; raises :class:`StepDivergence`."""
    k = state.k + 1
    if k > problem.time_grid.steps:
        raise ParameterError("time grid exhausted")
    grid = problem.grid
    V = grid.volumes
    b = problem.weights.leading(k)
    hist = problem.weights.history(k, state.increments)
    bV = b * V
    VW = V * problem.potential
    rhs0 = bV * state.u - V * hist
    u, sweeps = _picard(state.u.copy(), rhs0, bV, problem, VW)
    newton_its = 0
    if u is not None:
        # a slowly contracting sweep can stall with a residual left over
        polished, its = _newton(u, rhs0, bV, problem, VW)
        if polished is not None and its > 1:
            u, newton_its = polished, its - 1
    if u is None:
        u, newton_its = _newton(state.u.copy(), rhs0, bV, problem, VW)
        if u is None:
            raise StepDivergence(f"implicit step diverged at time index {k}", index=k)
    state.increments[k - 1] = u - state.u
    return PdeState(k, u, state.increments, sweeps, newton_its, newton_its > 0)


@dataclass(frozen=True)
class Thresholds:
    """Limits on the cumulative space-time L2 and W^{1,p} norms."""

    l2: float = 1e6
    w1p: float = 1e6

    def __post_init__(self):
        if not (self.l2 > 0 and self.w1p > 0):
            raise ParameterError("thresholds must be positive")


@dataclass(frozen=True, eq=False)
class RunReport:
    """Per-step diagnostics of one run (index 0 is the initial datum).

    Space-time quantities are trapezoidal in time: ``l2_q_norm`` is the
    ``L2(Q_t)`` norm, ``w1p_q_norm`` the ``W^{1,p}(Q_t)`` seminorm, and
    ``grad_p_integral`` / ``lp_integral`` are ``int int |u'|^p`` and
    ``int int |u|^p``. ``wall_time`` is informational and never persisted.
    """

    times: np.ndarray
    l2_norm: np.ndarray
    w1p_seminorm: np.ndarray
    lp_norm: np.ndarray
    potential_energy: np.ndarray
    l2_q_norm: np.ndarray
    w1p_q_norm: np.ndarray
    grad_p_integral: np.ndarray
    lp_integral: np.ndarray
    blowup_flag: bool
    blowup_index: int | None
    blowup_time: float | None
    blowup_reason: str | None
    diverged_index: int | None
    diverged_time: float | None
    picard_sweeps: int
    newton_fallbacks: int
    thresholds: Thresholds
    mu: float
    alpha: float
    N: float | None
    states: np.ndarray | None = None
    wall_time: float = field(default=0.0, compare=False)

    @property
    def steps(self) -> int:
        return self.times.size - 1


def _cumulative_trapezoid(t, f):
    out = np.zeros_like(f)
    if f.size > 1:
        out[1:] = np.cumsum(0.5 * np.diff(t) * (f[1:] + f[:-1]))
    return out


@dataclass(frozen=True)
class BlowupVerdict:
    blowup: bool
    index: int | None
    time: float | None
    reason: str | None
    thresholds: Thresholds


def blowup_detect(report: RunReport, thresholds: Thresholds | None = None) -> BlowupVerdict:
    """Earliest index where a cumulative norm exceeds its threshold, or the
    step solver diverged; ties go to the norm crossing."""
    th = thresholds or report.thresholds
    if report.times.size < 1:
        raise ParameterError("report has no steps")
    hits = []
    for name, series, limit in (("l2", report.l2_q_norm, th.l2), ("w1p", report.w1p_q_norm, th.w1p)):
        over = np.nonzero(series > limit)[0]
        if over.size:
            hits.append((int(over[0]), f"{name}-threshold"))
    if report.diverged_index is not None:
        hits.append((int(report.diverged_index), "solver-divergence"))
    if not hits:
        return BlowupVerdict(False, None, None, None, th)
    idx, reason = min(hits)
    # a diverged step sits one past the last stored time
    t = float(report.times[idx]) if idx < report.times.size else report.diverged_time
    return BlowupVerdict(True, idx, t, reason, th)


def _diagnostics(u, problem: PdeProblem):
    grid, p = problem.grid, problem.p
    V = grid.volumes
    up = np.abs(u) ** p
    lp_int = up @ V
    grad_int = p_energy(u, grid, p)
    return (
        math.sqrt((u * u) @ V),
        grad_int ** (1.0 / p),
        lp_int ** (1.0 / p),
        problem.mu * (problem.potential * up) @ V,
        grad_int,
        lp_int,
    )


def solve(problem: PdeProblem, thresholds: Thresholds | None = None, store: bool = True) -> RunReport:
    """Run the scheme over the whole time grid, stopping at the first sign of
    blow-up (threshold crossing or a diverged step)."""
    th = thresholds or Thresholds()
    start = time.perf_counter()
    tg = problem.time_grid
    K = tg.steps
    diag = np.zeros((K + 1, 6))
    diag[0] = _diagnostics(problem.u0, problem)
    states = [problem.u0.copy()] if store else None
    state = initial_state(problem)
    sweeps = fallbacks = 0
    diverged = None
    l2_sq_cum = grad_cum = 0.0
    last = 0
    for k in range(1, K + 1):
        try:
            state = step(state, problem)
        except StepDivergence:
            diverged = k
            break
        sweeps += state.picard_sweeps
        fallbacks += int(state.used_newton)
        diag[k] = _diagnostics(state.u, problem)
        last = k
        if store:
            states.append(state.u.copy())
        dt = tg.nodes[k] - tg.nodes[k - 1]
        l2_sq_cum += 0.5 * dt * (diag[k, 0] ** 2 + diag[k - 1, 0] ** 2)
        grad_cum += 0.5 * dt * (diag[k, 4] + diag[k - 1, 4])
        if math.sqrt(l2_sq_cum) > th.l2 or grad_cum ** (1.0 / problem.p) > th.w1p:
            break
    n = last + 1
    t = tg.nodes[:n].copy()
    d = diag[:n]
    l2_int = _cumulative_trapezoid(t, d[:, 0] ** 2)
    grad_int = _cumulative_trapezoid(t, d[:, 4])
    lp_int = _cumulative_trapezoid(t, d[:, 5])
    l2_q = np.sqrt(l2_int)
    w1p_q = grad_int ** (1.0 / problem.p)
    hits = []
    for series, limit, name in ((l2_q, th.l2, "l2-threshold"), (w1p_q, th.w1p, "w1p-threshold")):
        over = np.nonzero(series > limit)[0]
        if over.size:
            hits.append((int(over[0]), name))
    if diverged is not None:
        hits.append((diverged, "solver-divergence"))
    if hits:
        idx, reason = min(hits)
        flag, b_time = True, float(tg.nodes[idx])
    else:
        idx, reason, flag, b_time = None, None, False, None
    return RunReport(
        times=t,
        l2_norm=d[:, 0].copy(),
        w1p_seminorm=d[:, 1].copy(),
        lp_norm=d[:, 2].copy(),
        potential_energy=d[:, 3].copy(),
        l2_q_norm=l2_q,
        w1p_q_norm=w1p_q,
        grad_p_integral=grad_int,
        lp_integral=lp_int,
        blowup_flag=flag,
        blowup_index=idx,
        blowup_time=b_time,
        blowup_reason=reason,
        diverged_index=diverged,
        diverged_time=None if diverged is None else float(tg.nodes[diverged]),
        picard_sweeps=sweeps,
        newton_fallbacks=fallbacks,
        thresholds=th,
        mu=problem.mu,
        alpha=problem.alpha,
        N=problem.N,
        states=np.array(states) if store else None,
        wall_time=time.perf_counter() - start,
    )


def smooth_bump(grid: RadialGrid, scale: float = 1.0) -> np.ndarray:
    """``exp(1 - 1/(1 - (r/R)^2))`` scaled to ``scale * (int u^2 r^{n-1} dr)^{1/2} = scale``."""
    s = grid.nodes / grid.R
    u = np.exp(1.0 - 1.0 / (1.0 - s * s))
    return scale * u / math.sqrt((u * u) @ grid.volumes)


def scheme_residual(states, problem: PdeProblem) -> tuple[np.ndarray, np.ndarray]:
    """Residual of the discrete equation along a trajectory.

    Returns ``(residual, magnitude)`` for time indices ``1..n-1``, where
    ``residual = D^alpha w - Delta_p w - mu W_N |w|^{p-2} w`` (L1 derivative)
    and ``magnitude`` is the sum of the absolute values of the three terms,
    a natural scale for relative tolerances.
    """
    w = problem.grid.check(states)
    if w.ndim != 2 or w.shape[0] < 2:
        raise ShapeError("need a (steps, m) trajectory with at least two time levels")
    tg = problem.time_grid.head(w.shape[0])
    D = caputo_apply(w, tg, problem.params)
    L = p_laplacian_radial(w[1:], problem.grid, problem.p, problem.sigma)
    P = problem.mu * problem.potential * np.abs(w[1:]) ** (problem.p - 2.0) * w[1:]
    return D - L - P, np.abs(D) + np.abs(L) + np.abs(P)
