"""Separable subsolution ``T(t) X(r)`` for the blow-up regime."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError, PreconditionError
from ..fode import BlowupEstimate, FodeProblem, Trajectory, blowup_time, volterra_solve
from .solver import PdeProblem, scheme_residual

__all__ = ["SeparableSubsolution", "separable_subsolution", "auto_eps_scale"]


@dataclass(frozen=True, eq=False)
class SeparableSubsolution:
    """``T`` solves ``D^alpha T = T^{p-1}``, ``T(0) = eps_scale``, with the L1
    scheme on the problem's time grid, so ``T X`` is an exact solution of the
    discrete equation whenever ``X`` solves the profile equation.

    ``estimate`` is None when the closed-form shift of ``T`` does not fit in
    double precision (tiny ``eps_scale`` in the logarithmically singular case).
    """

    eps_scale: float
    profile: np.ndarray
    time_factor: Trajectory
    estimate: BlowupEstimate | None

    @property
    def last_index(self) -> int:
        return self.time_factor.last_index

    def values(self, count: int | None = None) -> np.ndarray:
        """``T(t_k) X(r_j)`` for ``k < count`` (default: all finite levels)."""
        n = self.last_index + 1 if count is None else count
        if n > self.last_index + 1:
            raise ParameterError(f"T is only finite for the first {self.last_index + 1} levels")
        return np.outer(self.time_factor.values[:n], self.profile)

    def residual(self, problem: PdeProblem, count: int | None = None) -> float:
        """Largest relative residual of the discrete equation (<= 0 means sub)."""
        w = self.values(count)
        if w.shape[0] < 2:
            return 0.0
        R, M = scheme_residual(w, problem)
        return float(np.max(R / (1.0 + M)))


def auto_eps_scale(u0, profile) -> float:
    """Half of ``min_j u0_j / X_j``."""
    return 0.5 * float(np.min(np.asarray(u0) / np.asarray(profile)))


def separable_subsolution(problem: PdeProblem, x_profile, eps_scale: float | None = None) -> SeparableSubsolution:
    """Pair the profile with the scalar factor ``T``.

    ``eps_scale=None`` picks :func:`auto_eps_scale`. Raises
    :class:`PreconditionError` naming the first node where ``eps X >= u0``.
    """
    X = problem.grid.check(x_profile)
    if not np.all(X > 0):
        raise PreconditionError("profile must be positive at every node")
    u0 = problem.u0
    if eps_scale is None:
        eps_scale = auto_eps_scale(u0, X)
        if not eps_scale > 0:
            j = int(np.argmin(u0 / X))
            raise PreconditionError(f"u0 is not positive at node {j} (r={problem.grid.nodes[j]:.6g})")
    if not eps_scale > 0:
        raise ParameterError(f"eps_scale must be positive, got {eps_scale}")
    bad = np.nonzero(eps_scale * X >= u0)[0]
    if bad.size:
        j = int(bad[0])
        raise PreconditionError(
            f"eps*X >= u0 at node {j} (r={problem.grid.nodes[j]:.6g}): {eps_scale * X[j]:.6g} >= {u0[j]:.6g}"
        )
    fp = FodeProblem(problem.alpha, problem.p - 1.0, eps_scale)
    T = volterra_solve(fp, problem.time_grid, scheme="l1")
    try:
        estimate = blowup_time(fp)
    except ParameterError:
        estimate = None
    return SeparableSubsolution(float(eps_scale), X.copy(), T, estimate)
