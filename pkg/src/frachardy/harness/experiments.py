"""Numerical experiments built on the solver modules."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..domain_potential import AprioriConstants, PotentialSpec, RadialDomain, apriori_constants
from ..errors import FracHardyError, ParameterError, RegimeError
from ..fode import ComparisonReport, Trajectory, comparison_check, solve_fode
from ..fracops import FracParams, TimeGrid, fundamental_identity_residual
from ..pde_radial import (
    PdeProblem,
    RadialGrid,
    RunReport,
    Thresholds,
    eigen_first,
    positive_profile_x,
    rayleigh_quotient,
    separable_subsolution,
    smooth_bump,
    solve,
)
from .config import ExperimentConfig

__all__ = [
    "SweepCell",
    "SweepReport",
    "TruncationPair",
    "TruncationReport",
    "AprioriVerdict",
    "HardyVerdict",
    "IdentityReport",
    "build_spec",
    "build_problem",
    "certify_blowup",
    "run_threshold_sweep",
    "run_truncation_study",
    "verify_apriori",
    "verify_hardy",
    "random_admissible_profile",
    "near_extremal_profile",
    "fode_comparison_campaign",
    "identity_check",
]


def build_spec(config: ExperimentConfig, mu_ratio: float | None = None) -> PotentialSpec:
    ratio = config.mu_ratio if mu_ratio is None else mu_ratio
    lam = ((config.n - config.p) / config.p) ** config.p
    return PotentialSpec(config.p, ratio * lam, RadialDomain(config.n, config.R), config.boundary_exponent)


def build_problem(
    config: ExperimentConfig,
    mu_ratio: float | None = None,
    N: float | None | str = "config",
    steps: int | None = None,
) -> PdeProblem:
    spec = build_spec(config, mu_ratio)
    grid = RadialGrid(spec.domain, config.m)
    K = config.steps if steps is None else steps
    tg = TimeGrid.graded(config.horizon, K, config.grading)
    level = config.N if N == "config" else N
    return PdeProblem(spec, config.alpha, smooth_bump(grid, config.amplitude), tg, grid, level, config.sigma)


def _thresholds(config: ExperimentConfig) -> Thresholds:
    return Thresholds(config.l2_threshold, config.w1p_threshold)


def certify_blowup(problem: PdeProblem, report: RunReport, tol: float = 1e-6) -> dict:
    """Compare the run with the separable subsolution up to the last stored level.

    Returns the largest ``T X - u`` excess, whether it stays below ``tol``,
    the scale ``eps``, the subsolution's closed-form blow-up time and the
    relative residual of ``T X`` in the discrete equation.
    """
    X = positive_profile_x(problem.spec, problem.N, problem.grid, sigma=0.0)
    sub = separable_subsolution(problem, X)
    levels = min(report.states.shape[0], sub.last_index + 1)
    excess = float(np.max(sub.values(levels) - report.states[:levels]))
    return {
        "eps_scale": sub.eps_scale,
        "levels": int(levels),
        "max_excess": excess,
        "certified": bool(excess <= tol),
        "subsolution_t_m": math.inf if sub.estimate is None else sub.estimate.t_m,
        "subsolution_residual": sub.residual(problem, levels),
    }


@dataclass(frozen=True)
class SweepCell:
    mu_ratio: float
    mu: float
    status: str  # "bounded", "blow-up" or "error"
    blowup_time: float | None = None
    blowup_reason: str | None = None
    lambda_n: float | None = None
    certificate: dict | None = None
    error: str | None = None


@dataclass(frozen=True)
class SweepReport:
    cells: tuple[SweepCell, ...]
    hardy: float

    def table(self) -> list[dict]:
        return [
            {
                "mu_ratio": c.mu_ratio,
                "mu": c.mu,
                "status": c.status,
                "blowup_time": c.blowup_time,
                "certified": None if c.certificate is None else c.certificate["certified"],
                "subsolution_t_m": None if c.certificate is None else c.certificate["subsolution_t_m"],
                "error": c.error,
            }
            for c in self.cells
        ]


def _sweep_cell(config: ExperimentConfig, mu_ratio: float) -> SweepCell:
    spec = build_spec(config, mu_ratio)
    try:
        problem = build_problem(config, mu_ratio)
        report = solve(problem, _thresholds(config))
        lam = None
        cert = None
        if report.blowup_flag and spec.mu > 0:
            lam = eigen_first(spec, problem.N, problem.grid).lambda_n
            if spec.mu > lam and problem.N is not None:
                cert = certify_blowup(problem, report)
        status = "blow-up" if report.blowup_flag else "bounded"
        return SweepCell(mu_ratio, spec.mu, status, report.blowup_time, report.blowup_reason, lam, cert)
    except FracHardyError as exc:
        return SweepCell(mu_ratio, spec.mu, "error", error=f"{type(exc).__name__}: {exc}")


def _map_cells(fn, config: ExperimentConfig, keys) -> dict:
    if config.workers <= 1 or len(keys) <= 1:
        return {k: fn(config, k) for k in keys}
    with ProcessPoolExecutor(max_workers=min(config.workers, len(keys))) as pool:
        futures = {k: pool.submit(fn, config, k) for k in keys}
        return {k: f.result() for k, f in futures.items()}


def run_threshold_sweep(config: ExperimentConfig) -> SweepReport:
    """Solve once per ``mu/Lambda`` in ``config.mu_ratios`` and classify.

    Cells are independent; with ``workers > 1`` they run in a process pool and
    are merged by sorted ``mu/Lambda``, so the report never depends on the
    completion order.
    """
    keys = sorted(set(config.mu_ratios))
    results = _map_cells(_sweep_cell, config, keys)
    lam = ((config.n - config.p) / config.p) ** config.p
    return SweepReport(tuple(results[k] for k in keys), lam)


@dataclass(frozen=True)
class TruncationPair:
    N: float
    N_next: float
    levels: int
    l2_distance: float
    lp_distance: float
    monotonicity_violation: float


@dataclass(frozen=True)
class TruncationReport:
    schedule: tuple[float, ...]
    pairs: tuple[TruncationPair, ...]
    errors: dict = field(default_factory=dict)
    blowup: dict = field(default_factory=dict)

    @property
    def distances_decreasing(self) -> bool:
        d = [p.l2_distance for p in self.pairs]
        return all(b < a for a, b in zip(d, d[1:]))

    @property
    def max_monotonicity_violation(self) -> float:
        return max((p.monotonicity_violation for p in self.pairs), default=0.0)


def _truncation_run(config: ExperimentConfig, N: float):
    try:
        rep = solve(build_problem(config, N=N), _thresholds(config))
        return rep
    except FracHardyError as exc:
        return f"{type(exc).__name__}: {exc}"


def _space_time_distance(a, b, times, volumes, p):
    d = np.abs(a - b)
    l2 = np.sqrt(np.trapezoid((d * d) @ volumes, times)) if times.size > 1 else 0.0
    lp = np.trapezoid((d**p) @ volumes, times) ** (1.0 / p) if times.size > 1 else 0.0
    return float(l2), float(lp)


def run_truncation_study(config: ExperimentConfig) -> TruncationReport:
    """Distances between runs at consecutive truncation levels.

    Also records the largest pointwise excess ``u_N - u_N'`` for ``N < N'``,
    which the comparison principle predicts to be nonpositive.
    """
    schedule = tuple(sorted(set(config.schedule)))
    runs = _map_cells(_truncation_run, config, list(schedule))
    errors = {N: r for N, r in runs.items() if isinstance(r, str)}
    blowup = {N: r.blowup_time for N, r in runs.items() if not isinstance(r, str) and r.blowup_flag}
    grid = RadialGrid(RadialDomain(config.n, config.R), config.m)
    pairs = []
    for a, b in zip(schedule, schedule[1:]):
        ra, rb = runs[a], runs[b]
        if isinstance(ra, str) or isinstance(rb, str):
            continue
        n = min(ra.states.shape[0], rb.states.shape[0])
        l2, lp = _space_time_distance(ra.states[:n], rb.states[:n], ra.times[:n], grid.volumes, config.p)
        viol = float(max(np.max(ra.states[:n] - rb.states[:n]), 0.0))
        pairs.append(TruncationPair(a, b, n, l2, lp, viol))
    return TruncationReport(schedule, tuple(pairs), errors, blowup)


@dataclass(frozen=True)
class AprioriVerdict:
    passed: bool
    grad_integral: float
    lp_integral: float
    a1: float
    a2: float
    grad_ratio: float
    lp_ratio: float
    slack: float


def _ratio(x: float, bound: float) -> float:
    if bound > 0:
        return x / bound
    return 0.0 if x == 0 else math.inf


def verify_apriori(report: RunReport, constants: AprioriConstants, slack: float = 1.0) -> AprioriVerdict:
    """Check ``int int |u'|^p <= slack A1`` and ``int int |u|^p <= slack A2``.

    The run must match the constants: same ``mu`` and ``alpha``, the full
    horizon reached without blow-up.
    """
    if not math.isclose(report.mu, constants.mu, rel_tol=1e-12, abs_tol=1e-300):
        raise RegimeError(f"run uses mu={report.mu}, constants were built for mu={constants.mu}")
    if report.alpha != constants.alpha:
        raise RegimeError("run and constants use different alpha")
    if report.blowup_flag:
        raise RegimeError("run blew up; the a priori bounds concern global solutions")
    if not math.isclose(report.times[-1], constants.horizon, rel_tol=1e-12):
        raise RegimeError(f"run ends at t={report.times[-1]}, constants use T={constants.horizon}")
    if report.N is not None and report.N < constants.omega0:
        raise RegimeError("truncation level below min W; the |u|^p bound needs W_N >= omega0")
    g = float(report.grad_p_integral[-1])
    l = float(report.lp_integral[-1])
    gr, lr = _ratio(g, constants.a1), _ratio(l, constants.a2)
    return AprioriVerdict(gr <= slack and lr <= slack, g, l, constants.a1, constants.a2, gr, lr, slack)


def apriori_for(problem: PdeProblem) -> AprioriConstants:
    u0sq = float((problem.u0**2) @ problem.grid.volumes)
    return apriori_constants(problem.spec, problem.alpha, problem.time_grid.horizon, u0sq)


@dataclass(frozen=True)
class HardyVerdict:
    """``near_extremal_ratio`` belongs to the discrete minimizer of the quotient;
    ``closed_form_ratio`` to :func:`near_extremal_profile`, whose approach to
    the constant is only logarithmic in the mesh size."""

    passed: bool
    min_ratio: float
    ratios: np.ndarray
    hardy: float
    threshold: float
    near_extremal_ratio: float
    closed_form_ratio: float
    seed: int


def _bump(r, centre, width):
    z = (r - centre) / width
    out = np.zeros_like(r)
    inside = np.abs(z) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
    return out


def random_admissible_profile(grid: RadialGrid, rng: np.random.Generator) -> np.ndarray:
    """Sum of 3 to 6 scaled bumps, each supported inside ``[0, 0.98 R)``."""
    R = grid.R
    r = grid.nodes
    v = np.zeros(grid.m)
    for _ in range(int(rng.integers(3, 7))):
        centre = rng.uniform(0.0, 0.9) * R
        width = rng.uniform(0.05, 0.5) * R
        width = min(width, 0.98 * R - centre)
        v += rng.uniform(0.2, 1.0) * _bump(r, centre, width)
    return v


def near_extremal_profile(grid: RadialGrid, spec: PotentialSpec) -> np.ndarray:
    """``(r^{-kappa} - R^{-kappa})^{(p-1)/p}`` with ``kappa = (n-p)/(p-1)``."""
    k = (spec.n - spec.p) / (spec.p - 1.0)
    r = grid.nodes
    return (r ** (-k) - grid.R ** (-k)) ** ((spec.p - 1.0) / spec.p)


def verify_hardy(spec: PotentialSpec, grid: RadialGrid, trials: int, seed: int, slack: float = 0.01) -> HardyVerdict:
    """Rayleigh ratios ``int |v'|^p / int W |v|^p`` of random admissible profiles."""
    if int(trials) != trials or trials < 1:
        raise ParameterError(f"trials must be a positive integer, got {trials}")
    rng = np.random.default_rng(seed)
    W = grid.potential(spec)
    ratios = np.array([rayleigh_quotient(random_admissible_profile(grid, rng), grid, W, spec.p) for _ in range(trials)])
    closed = rayleigh_quotient(near_extremal_profile(grid, spec), grid, W, spec.p)
    near = eigen_first(spec, None, grid).lambda_n
    threshold = spec.hardy * (1.0 - slack)
    return HardyVerdict(
        bool(ratios.min() >= threshold), float(ratios.min()), ratios, spec.hardy, threshold, near, closed, seed
    )


def fode_comparison_campaign(
    trials: int,
    seed: int,
    steps: int = 400,
    horizon: float = 2.0,
) -> list[tuple[dict, ComparisonReport]]:
    """Random scalar sub/supersolution pairs with ordered initial data.

    Each right-hand side is ``a sin(y + c) + b tanh(y) + e cos(w t)`` with
    Lipschitz constant ``|a| + |b| <= 2``. The subsolution is the L1 solution
    with forcing ``-s(t) <= 0`` and the supersolution the one with ``+s(t)``.
    """
    rng = np.random.default_rng(seed)
    grid = TimeGrid.uniform(horizon, steps)
    out = []
    for _ in range(trials):
        alpha = float(rng.uniform(0.3, 0.9))
        a, b = rng.uniform(-1.0, 1.0, 2)
        c, e, w = rng.uniform(-2.0, 2.0, 3)
        s0, s1 = rng.uniform(0.0, 0.5, 2)
        y0 = float(rng.uniform(-1.0, 1.0))
        gap = float(rng.uniform(0.0, 0.5))

        def rhs(t, y, a=a, b=b, c=c, e=e, w=w):
            return a * math.sin(y + c) + b * math.tanh(y) + e * math.cos(w * t)

        def forcing(t, s0=s0, s1=s1):
            return s0 + s1 * math.sin(t) ** 2

        sub = solve_fode(rhs, y0, grid, alpha, forcing=lambda t: -forcing(t))
        sup = solve_fode(rhs, y0 + gap, grid, alpha, forcing=forcing)
        params = {"alpha": alpha, "a": a, "b": b, "c": c, "e": e, "w": w, "s0": s0, "s1": s1, "y0": y0, "gap": gap}
        out.append((params, comparison_check(rhs, abs(a) + abs(b), sub, sup)))
    return out


@dataclass(frozen=True)
class IdentityReport:
    alpha: float
    steps: tuple[int, ...]
    residuals: tuple[float, ...]
    orders: tuple[float, ...]

    @property
    def min_order(self) -> float:
        return min(self.orders) if self.orders else math.nan


def identity_check(alpha: float, steps=(128, 256, 512), horizon: float = 1.0) -> IdentityReport:
    """Residual of the quadratic identity for ``u(t) = sin t`` under refinement."""
    params = FracParams(alpha)
    res = []
    for K in steps:
        grid = TimeGrid.uniform(horizon, int(K))
        res.append(fundamental_identity_residual(np.sin(grid.nodes), grid, params))
    orders = tuple(
        math.log(res[i] / res[i + 1]) / math.log(steps[i + 1] / steps[i]) for i in range(len(steps) - 1)
    )
    return IdentityReport(alpha, tuple(int(k) for k in steps), tuple(res), orders)
