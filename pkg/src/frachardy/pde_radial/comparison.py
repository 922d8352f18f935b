"""Ordering check between a discrete sub- and supersolution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import PreconditionError
from .solver import PdeProblem, RunReport, scheme_residual

__all__ = ["PdeComparisonReport", "pde_comparison_check"]


@dataclass(frozen=True)
class PdeComparisonReport:
    """``ordered`` is None when a hypothesis failed; ``first_crossing`` is a
    ``(time index, node index)`` pair."""

    precondition_ok: bool
    ordered: bool | None
    first_crossing: tuple[int, int] | None
    min_margin: float
    sub_residual_max: float
    sup_residual_min: float
    levels: int
    message: str = ""


def _trajectory(run) -> np.ndarray:
    if isinstance(run, RunReport):
        if run.states is None:
            raise PreconditionError("run was solved without storing states")
        return run.states
    return np.asarray(run, dtype=float)


def pde_comparison_check(
    lower,
    upper,
    problem: PdeProblem,
    tol: float = 1e-8,
    residual_tol: float = 1e-8,
) -> PdeComparisonReport:
    """Check ``lower <= upper + tol`` on every space-time node both share.

    ``lower`` and ``upper`` are run reports or ``(levels, m)`` arrays on the
    time grid of ``problem``. Hypotheses: bounded potential (``N`` set),
    ``lower(0) <= upper(0)``, and relative scheme residuals ``<= residual_tol``
    for ``lower`` and ``>= -residual_tol`` for ``upper``.
    """
    u, v = _trajectory(lower), _trajectory(upper)
    if u.ndim != 2 or v.ndim != 2 or u.shape[1] != v.shape[1] or u.shape[1] != problem.grid.m:
        raise PreconditionError("trajectories must share the problem's radial grid")
    n = min(u.shape[0], v.shape[0])
    u, v = u[:n], v[:n]
    problems = []
    if problem.N is None:
        problems.append("potential is not truncated")
    if np.any(u[0] > v[0]):
        problems.append(f"initial data not ordered at node {int(np.argmax(u[0] > v[0]))}")
    sub_max = sup_min = 0.0
    if n >= 2:
        Ru, Mu = scheme_residual(u, problem)
        Rv, Mv = scheme_residual(v, problem)
        sub_max = float(np.max(Ru / (1.0 + Mu)))
        sup_min = float(np.min(Rv / (1.0 + Mv)))
        if sub_max > residual_tol:
            problems.append(f"lower residual {sub_max:.3e} exceeds {residual_tol:g}")
        if sup_min < -residual_tol:
            problems.append(f"upper residual {sup_min:.3e} below {-residual_tol:g}")
    margin = v - u
    min_margin = float(margin.min())
    if problems:
        return PdeComparisonReport(False, None, None, min_margin, sub_max, sup_min, n, "; ".join(problems))
    bad = np.argwhere(u > v + tol)
    first = (int(bad[0, 0]), int(bad[0, 1])) if bad.size else None
    return PdeComparisonReport(True, first is None, first, min_margin, sub_max, sup_min, n)
