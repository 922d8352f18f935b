r"""Scalar blow-up problem :math:`D^\alpha u = u^q`, :math:`u(0) = u_0 > 0`.

Closed-form subsolutions and their blow-up times, a Volterra time stepper for
the equivalent integral equation

.. math::

    u(t) = u_0 + \frac{1}{\Gamma(\alpha)} \int_0^t (t-s)^{\alpha-1} u^q(s) \, ds,

and numerical harnesses for the lower bound
:math:`u(t) \ge (t+\delta)^{\alpha-1} w(t)` and for the comparison principle of
sub- and supersolutions of :math:`D^\alpha y = f(t, y)`.

The subsolution ``w`` solves the classical ODE
``w' = w^q / (Gamma(alpha) (t + delta)^{q(1-alpha)})`` with
``w(0) = delta^{1-alpha} u0 / 2``, so that ``w^{1-q}`` is the function ``F``
(or ``F0`` in the logarithmic case) below.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, ParameterError, PreconditionError, SolverError
from .fracops import FracParams, TimeGrid, caputo_apply, gamma, l1_weights, rl_weights_row

__all__ = [
    "CaseTag",
    "FodeProblem",
    "SubsolutionParams",
    "BlowupEstimate",
    "Trajectory",
    "LowerBoundReport",
    "ComparisonReport",
    "classify_case",
    "choose_delta",
    "subsolution_F",
    "subsolution_w",
    "blowup_time",
    "printed_i1_blowup_time",
    "volterra_solve",
    "solve_fode",
    "lower_bound_check",
    "comparison_check",
]

CASE_TOLERANCE = 1e-12
DIVERGENCE_THRESHOLD = 1e9


class CaseTag(str, enum.Enum):
    """Sign of ``1 - q(1 - alpha)``: positive, zero, negative."""

    I1 = "I1"
    I2 = "I2"
    II = "II"


@dataclass(frozen=True)
class FodeProblem:
    alpha: float
    q: float
    u0: float

    def __post_init__(self):
        FracParams(self.alpha)
        if not (math.isfinite(self.q) and self.q > 1.0):
            raise ParameterError(f"q must exceed 1, got {self.q}")
        if not (math.isfinite(self.u0) and self.u0 > 0.0):
            raise ParameterError(f"u0 must be positive, got {self.u0}")

    @property
    def params(self) -> FracParams:
        return FracParams(self.alpha)


def classify_case(alpha: float, q: float, tol: float = CASE_TOLERANCE) -> CaseTag:
    c = 1.0 - q * (1.0 - alpha)
    if abs(c) <= tol:
        return CaseTag.I2
    return CaseTag.I1 if c > 0 else CaseTag.II


@dataclass(frozen=True)
class SubsolutionParams:
    delta: float
    w0: float
    case: CaseTag
    A: float | None = None
    rule: str = "corrected"

    def __post_init__(self):
        if not self.delta > 0 or not self.w0 > 0:
            raise ParameterError("delta and w0 must be positive")


def _case_ii_constant(alpha: float, q: float) -> float:
    return (q - 1.0) / (gamma(alpha) * (q * (1.0 - alpha) - 1.0))


def choose_delta(problem: FodeProblem, rule: str = "corrected") -> SubsolutionParams:
    """Pick the shift ``delta`` and the initial value ``w0`` of the subsolution.

    Cases I1 and I2 use ``delta = 1``. In case II the defining relations are
    ``delta^e = c A w0^{q-1}`` (``e = q(1-alpha) - 1``) together with
    ``w0 = delta^{1-alpha} u0 / 2``; eliminating ``w0`` gives
    ``delta = (c A (u0/2)^{q-1})^{-1/alpha}``.

    Since ``F(t, delta)`` decreases to ``w0^{1-q} (1 - 1/c)``, a finite blow-up
    time needs ``c < 1``. ``rule="corrected"`` (default) takes ``c = 1/2``, for
    which ``F`` vanishes at ``(2^{1/e} - 1) delta``. ``rule="printed"`` takes
    ``c = 3/2``; then ``w`` stays bounded and no blow-up time exists.
    """
    case = classify_case(problem.alpha, problem.q)
    a, q, u0 = problem.alpha, problem.q, problem.u0
    if case is not CaseTag.II:
        return SubsolutionParams(1.0, 0.5 * u0, case, None, rule)
    if rule == "printed":
        c = 1.5
    elif rule == "corrected":
        c = 0.5
    else:
        raise ParameterError(f"unknown delta rule {rule!r}")
    A = _case_ii_constant(a, q)
    log_delta = -(math.log(c * A) + (q - 1.0) * math.log(0.5 * u0)) / a
    if not -700.0 < log_delta < 700.0:
        raise ParameterError(f"case II shift exp({log_delta:.4g}) is not representable in double precision")
    delta = math.exp(log_delta)
    w0 = delta ** (1.0 - a) * u0 / 2.0
    return SubsolutionParams(delta, w0, case, A, rule)


def subsolution_F(t, params: SubsolutionParams, problem: FodeProblem):
    """``w(t)^{1-q}``: the function ``F(t, delta)``, or ``F0`` in case I2."""
    a, q = problem.alpha, problem.q
    t = np.asarray(t, dtype=float)
    d, w0 = params.delta, params.w0
    if params.case is CaseTag.I2:
        return w0 ** (1.0 - q) - (q - 1.0) / gamma(a) * np.log((t + d) / d)
    c = 1.0 - q * (1.0 - a)
    k = (q - 1.0) / (gamma(a) * c)
    return w0 ** (1.0 - q) + k * d**c - k * (t + d) ** c


def subsolution_w(t, params: SubsolutionParams, problem: FodeProblem):
    """Closed-form subsolution ``w(t) = F(t)^{1/(1-q)}`` for ``0 <= t < t_m``."""
    F = subsolution_F(t, params, problem)
    if np.any(np.asarray(F) <= 0.0):
        raise DomainError("w is evaluated at or beyond its blow-up time")
    out = F ** (1.0 / (1.0 - problem.q))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class BlowupEstimate:
    """Blow-up time ``t_m`` of the subsolution, plus the alternative closed form.

    ``t_m_printed`` evaluates ``(w0^{1-q} Gamma(alpha) c/(q-1) - 1)^{1/(q(1-alpha)-1)} - 1``
    in case I1, or the case II expression with the ``3/2`` shift. It is
    ``nan`` where that expression is undefined and ``None`` in case I2.
    """

    t_m: float
    case: CaseTag
    params: SubsolutionParams
    t_m_printed: float | None = None
    delta_printed: float | None = None


def printed_i1_blowup_time(problem: FodeProblem, w0: float) -> float:
    a, q = problem.alpha, problem.q
    c = 1.0 - q * (1.0 - a)
    base = w0 ** (1.0 - q) * gamma(a) * c / (q - 1.0) - 1.0
    expo = 1.0 / (q * (1.0 - a) - 1.0)
    if base < 0.0 and not float(expo).is_integer():
        return math.nan
    try:
        return base**expo - 1.0
    except (OverflowError, ZeroDivisionError):
        return math.nan


def _expm1_or_inf(x: float) -> float:
    try:
        return math.expm1(x)
    except OverflowError:
        return math.inf


def blowup_time(problem: FodeProblem, rule: str = "corrected") -> BlowupEstimate:
    """Blow-up time of the closed-form subsolution.

    Case I1 uses ``(t_m + 1)^c = w0^{1-q} Gamma(alpha) c / (q - 1) + 1`` with
    ``c = 1 - q(1-alpha)``; case I2 ``t_m = exp(w0^{1-q} Gamma(alpha)/(q-1)) - 1``;
    case II ``t_m = (2^{1/e} - 1) delta`` for the corrected shift.
    """
    params = choose_delta(problem, rule)
    a, q = problem.alpha, problem.q
    w0 = params.w0
    if params.case is CaseTag.I1:
        c = 1.0 - q * (1.0 - a)
        x = w0 ** (1.0 - q) * gamma(a) * c / (q - 1.0)
        t_m = _expm1_or_inf(math.log1p(x) / c)
        return BlowupEstimate(t_m, params.case, params, printed_i1_blowup_time(problem, w0))
    if params.case is CaseTag.I2:
        t_m = _expm1_or_inf(w0 ** (1.0 - q) * gamma(a) / (q - 1.0))
        return BlowupEstimate(t_m, params.case, params)
    e = q * (1.0 - a) - 1.0
    printed = choose_delta(problem, "printed")
    growth = _expm1_or_inf(math.log(2.0) / e)
    t_printed = growth * printed.delta
    if rule == "printed":
        # F(., delta) never reaches zero with this shift
        return BlowupEstimate(math.inf, params.case, params, t_printed, printed.delta)
    t_m = growth * params.delta
    return BlowupEstimate(t_m, params.case, params, t_printed, printed.delta)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Node values of a scalar solution; entries from ``blowup_index`` on are nan."""

    grid: TimeGrid
    values: np.ndarray
    alpha: float
    blowup_flag: bool = False
    blowup_index: int | None = None
    iterations: int = 0

    @property
    def blowup_time(self) -> float | None:
        if not self.blowup_flag:
            return None
        return float(self.grid.nodes[self.blowup_index])

    @property
    def last_index(self) -> int:
        """Index of the last finite node."""
        return self.grid.steps if self.blowup_index is None else self.blowup_index - 1


def _smallest_root(h: float, w: float, q: float, start: float, cap: float, tol: float = 1e-14):
    """Smallest root of ``g(u) = u - w u^q - h`` with ``h > 0``, or None.

    ``g`` is concave with ``g(h) < 0``. Newton from the left is monotone, so it is
    kept inside the bracket ``[lo, hi]``; bisection is the fallback when a step
    leaves it. Returns None when no root lies below ``cap``.
    """
    if w == 0.0:
        return (h, 0) if h <= cap else None
    peak = (q * w) ** (-1.0 / (q - 1.0))
    hi = min(peak, cap)
    g = lambda u: u - w * u**q - h  # noqa: E731
    if g(hi) < 0.0:
        return None
    lo = h
    u = max(start, lo)
    if u > hi:
        u = lo
    for it in range(200):
        gu = g(u)
        if gu > 0.0:
            hi = u
        else:
            lo = u
        dg = 1.0 - q * w * u ** (q - 1.0)
        nxt = u - gu / dg if dg > 0.0 else 0.5 * (lo + hi)
        if not lo <= nxt <= hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - u) <= tol * max(1.0, abs(u)):
            return nxt, it + 1
        u = nxt
    raise SolverError("scalar Newton iteration did not converge")


def volterra_solve(
    problem: FodeProblem,
    grid: TimeGrid,
    divergence_threshold: float = DIVERGENCE_THRESHOLD,
    scheme: str = "trapezoid",
) -> Trajectory:
    """Step the integral equation of ``D^alpha u = u^q`` on ``grid``.

    ``scheme="trapezoid"`` uses product-trapezoidal weights for the memory
    integral; ``scheme="l1"`` solves the L1-discretized derivative form instead,
    whose discrete residual under :func:`~frachardy.fracops.caputo_apply` is
    zero. Either way the current node is implicit and solved by a safeguarded
    Newton iteration; a node with no root below ``divergence_threshold`` is
    flagged as blow-up and stepping stops there.
    """
    if scheme not in ("trapezoid", "l1"):
        raise ParameterError(f"unknown scheme {scheme!r}")
    params = problem.params
    q, u0 = problem.q, problem.u0
    K = grid.steps
    u = np.full(K + 1, np.nan)
    u[0] = u0
    fq = np.zeros(K + 1)
    fq[0] = u0**q
    iters = 0
    if scheme == "l1":
        weights = l1_weights(grid, params)
        du = np.zeros(K)
    for k in range(1, K + 1):
        if scheme == "trapezoid":
            row = rl_weights_row(grid, params, k)
            h = u0 + row[:k] @ fq[:k]
            w = row[k]
        else:
            b = weights.leading(k)
            h = u[k - 1] - weights.history(k, du) / b
            w = 1.0 / b
        if not h > 0.0:
            raise SolverError(f"nonpositive memory term at node {k}", index=k)
        root = _smallest_root(h, w, q, u[k - 1], divergence_threshold)
        if root is None:
            return Trajectory(grid, u, problem.alpha, True, k, iters)
        u[k], n_it = root
        iters += n_it
        fq[k] = u[k] ** q
        if scheme == "l1":
            du[k - 1] = u[k] - u[k - 1]
    return Trajectory(grid, u, problem.alpha, False, None, iters)


def solve_fode(
    rhs: Callable[[float, float], float],
    y0: float,
    grid: TimeGrid,
    alpha: float,
    forcing=None,
) -> Trajectory:
    """L1 time stepping for ``D^alpha y = rhs(t, y) + forcing(t)``.

    Each node solves ``b y - rhs(t, y) = c`` with Brent's method on an expanding
    bracket; the root is unique whenever the leading L1 coefficient ``b``
    exceeds the Lipschitz constant of ``rhs`` in ``y``.
    """
    params = FracParams(alpha)
    weights = l1_weights(grid, params)
    t = grid.nodes
    K = grid.steps
    y = np.empty(K + 1)
    y[0] = y0
    dy = np.zeros(K)
    for k in range(1, K + 1):
        b = weights.leading(k)
        s = 0.0 if forcing is None else float(forcing(t[k]))
        c = b * y[k - 1] - weights.history(k, dy) + s
        tk = t[k]
        phi = lambda v: b * v - rhs(tk, v) - c  # noqa: E731
        lo, hi = y[k - 1] - 1.0, y[k - 1] + 1.0
        span = 1.0
        while phi(lo) > 0.0 or phi(hi) < 0.0:
            span *= 2.0
            lo, hi = y[k - 1] - span, y[k - 1] + span
            if span > 1e12:
                raise SolverError(f"no bracket for the implicit step at node {k}", index=k)
        y[k] = brentq(phi, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        dy[k - 1] = y[k] - y[k - 1]
    return Trajectory(grid, y, alpha)


@dataclass(frozen=True)
class LowerBoundReport:
    passed: bool
    max_violation: float
    first_violation_index: int | None
    checked_nodes: int
    tol: float


def lower_bound_check(
    traj: Trajectory, est: BlowupEstimate, problem: FodeProblem, tol: float = 1e-6
) -> LowerBoundReport:
    """Check ``u(t_k) + tol >= (t_k + delta)^{alpha-1} w(t_k)`` before blow-up.

    Nodes at or past ``min(t_m, numerical blow-up)`` are skipped.
    """
    t = traj.grid.nodes
    last = traj.last_index
    mask = np.arange(t.size) <= last
    mask &= t < est.t_m
    idx = np.nonzero(mask)[0]
    if idx.size == 0:
        return LowerBoundReport(True, 0.0, None, 0, tol)
    tt = t[idx]
    delta = est.params.delta
    bound = (tt + delta) ** (problem.alpha - 1.0) * subsolution_w(tt, est.params, problem)
    gap = bound - traj.values[idx]
    bad = np.nonzero(gap > tol)[0]
    first = int(idx[bad[0]]) if bad.size else None
    return LowerBoundReport(bad.size == 0, float(max(gap.max(), 0.0)), first, idx.size, tol)


@dataclass(frozen=True)
class ComparisonReport:
    """Outcome of an ordering check between a sub- and a supersolution.

    ``precondition_ok`` False means the residual or initial-data hypotheses
    failed and ``ordered`` carries no verdict (None).
    """

    precondition_ok: bool
    ordered: bool | None
    first_crossing: int | None
    min_margin: float
    sub_residual_max: float
    sup_residual_min: float
    lipschitz: float
    leading_coefficient_min: float
    message: str = ""
    details: dict = field(default_factory=dict)


def comparison_check(
    rhs: Callable[[float, float], float],
    lipschitz: float,
    sub: Trajectory,
    sup: Trajectory,
    tol: float = 1e-8,
    residual_tol: float = 1e-9,
) -> ComparisonReport:
    """Verify the hypotheses and the conclusion of the scalar comparison principle.

    Residuals ``D^alpha y - rhs(t, y)`` are computed with the L1 operator; the
    subsolution must have residual ``<= residual_tol`` and the supersolution
    ``>= -residual_tol`` at every node, and ``sub(0) <= sup(0)``.
    """
    if sub.grid is not sup.grid and not np.array_equal(sub.grid.nodes, sup.grid.nodes):
        raise PreconditionError("sub- and supersolution live on different grids")
    if sub.alpha != sup.alpha:
        raise PreconditionError("sub- and supersolution use different orders")
    grid = sub.grid
    params = FracParams(sub.alpha)
    t = grid.nodes
    n = min(sub.last_index, sup.last_index) + 1
    u, v = sub.values[:n], sup.values[:n]
    b_min = min(l1_weights(grid, params).leading(k) for k in range(1, grid.steps + 1))
    if n < 2:
        raise PreconditionError("trajectories need at least two finite nodes")
    sub_grid = TimeGrid(t[:n])
    fu = np.array([rhs(tk, x) for tk, x in zip(t[1:n], u[1:])])
    fv = np.array([rhs(tk, x) for tk, x in zip(t[1:n], v[1:])])
    ru = caputo_apply(u, sub_grid, params) - fu
    rv = caputo_apply(v, sub_grid, params) - fv
    ru_max, rv_min = float(ru.max()), float(rv.min())
    common = dict(
        sub_residual_max=ru_max,
        sup_residual_min=rv_min,
        lipschitz=float(lipschitz),
        leading_coefficient_min=float(b_min),
    )
    problems = []
    if ru_max > residual_tol:
        problems.append(f"subsolution residual {ru_max:.3e} > {residual_tol:g}")
    if rv_min < -residual_tol:
        problems.append(f"supersolution residual {rv_min:.3e} < {-residual_tol:g}")
    if u[0] > v[0]:
        problems.append("initial data are not ordered")
    margin = v - u
    if problems:
        return ComparisonReport(False, None, None, float(margin.min()), message="; ".join(problems), **common)
    bad = np.nonzero(u > v + tol)[0]
    first = int(bad[0]) if bad.size else None
    return ComparisonReport(True, first is None, first, float(margin.min()), **common)
