"""Cell-centred radial grid and the flux-form p-Laplacian.

Nodes sit at cell centres ``r_j = (j + 1/2) h``, ``j = 0..m-1``, with
``h = R / (m + 1/2)``, so neither the origin nor the sphere ``r = R`` is a node
and the potential is finite at every node. The sphere is one spacing beyond the
last node and carries the homogeneous Dirichlet value, which keeps every
difference quotient centred. Fluxes live on the faces ``r = (j + 1) h``; the
face at ``r = 0`` carries no flux (radial symmetry).

All integrals use the radial measure ``r^{n-1} dr`` (no sphere-area factor)
with exact cell volumes ``((j+1)^n - j^n) h^n / n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import solve_banded

from ..domain_potential import PotentialSpec, RadialDomain, potential_w
from ..errors import ParameterError, ShapeError

__all__ = [
    "RadialGrid",
    "gradient",
    "flux",
    "divergence",
    "p_laplacian_radial",
    "p_energy",
    "stiffness_jacobian",
    "frozen_stiffness",
    "solve_tridiagonal",
    "default_sigma",
]


@dataclass(frozen=True, eq=False)
class RadialGrid:
    domain: RadialDomain
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ParameterError(f"need at least two radial nodes, got {self.m}")
        object.__setattr__(self, "m", int(self.m))

    @property
    def n(self) -> float:
        return self.domain.n

    @property
    def R(self) -> float:
        return self.domain.R

    @cached_property
    def h(self) -> float:
        return self.domain.R / (self.m + 0.5)

    @cached_property
    def nodes(self) -> np.ndarray:
        return (np.arange(self.m) + 0.5) * self.h

    @cached_property
    def faces(self) -> np.ndarray:
        """Outer face of each cell."""
        return (np.arange(self.m) + 1.0) * self.h

    @cached_property
    def face_spacing(self) -> np.ndarray:
        """Distance between the nodes on either side of each face."""
        return np.full(self.m, self.h)

    @cached_property
    def face_area(self) -> np.ndarray:
        return self.faces ** (self.n - 1.0)

    @cached_property
    def volumes(self) -> np.ndarray:
        j = np.arange(self.m + 1, dtype=float)
        return np.diff(j**self.n) * self.h**self.n / self.n

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights for ``int f r^{n-1} dr``."""
        return self.volumes

    def integrate(self, values) -> float | np.ndarray:
        return np.asarray(values) @ self.volumes

    def check(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.m:
            raise ShapeError(f"expected {self.m} radial values, got {u.shape[-1]}")
        return u

    def potential(self, spec: PotentialSpec, N: float | None = None) -> np.ndarray:
        """``W_N`` at the nodes; ``N=None`` evaluates ``W`` itself."""
        if spec.domain != self.domain:
            raise ParameterError("potential and grid are built on different domains")
        w = potential_w(self.nodes, spec)
        if N is None:
            return w
        if not N >= 1:
            raise ParameterError(f"truncation level must be >= 1, got {N}")
        return np.minimum(w, float(N))


def default_sigma(grid: RadialGrid) -> float:
    return 1e-8 * grid.R


def gradient(u, grid: RadialGrid) -> np.ndarray:
    """Differences across each face, with ``u(R) = 0`` beyond the last node."""
    u = grid.check(u)
    d = np.empty_like(u)
    d[..., :-1] = u[..., 1:] - u[..., :-1]
    d[..., -1] = -u[..., -1]
    return d / grid.face_spacing


def flux(u, grid: RadialGrid, p: float, sigma: float = 0.0) -> np.ndarray:
    g = gradient(u, grid)
    return grid.face_area * (g * g + sigma * sigma) ** (0.5 * (p - 2.0)) * g


def divergence(F, grid: RadialGrid) -> np.ndarray:
    """``(F_out - F_in) / volume`` per cell, with zero flux through r = 0."""
    out = np.array(F, dtype=float, copy=True)
    out[..., 1:] -= F[..., :-1]
    return out / grid.volumes


def p_laplacian_radial(u, grid: RadialGrid, p: float, sigma: float | None = None) -> np.ndarray:
    """Discrete ``r^{1-n} (r^{n-1} |u'|^{p-2} u')'`` at the nodes.

    ``|u'|^2`` is regularized to ``|u'|^2 + sigma^2``; ``sigma=None`` picks
    :func:`default_sigma`. Pass ``sigma=0`` for exact (p-1)-homogeneity.
    """
    if sigma is None:
        sigma = default_sigma(grid)
    return divergence(flux(u, grid, p, sigma), grid)


def p_energy(u, grid: RadialGrid, p: float) -> float | np.ndarray:
    """Discrete ``int |u'|^p r^{n-1} dr``."""
    g = gradient(u, grid)
    return (np.abs(g) ** p) @ (grid.face_area * grid.face_spacing)


def stiffness_jacobian(u, grid: RadialGrid, p: float, sigma: float, floor: float = 0.0):
    """Diagonal and off-diagonal of d(-V * Delta_p u)/du (symmetric tridiagonal)."""
    g = gradient(u, grid)
    s2 = sigma * sigma
    c = grid.face_area * (g * g + s2) ** (0.5 * (p - 4.0)) * ((p - 1.0) * g * g + s2)
    e = c / grid.face_spacing + floor
    diag = e.copy()
    diag[1:] += e[:-1]
    return diag, -e[:-1]


def frozen_stiffness(u, grid: RadialGrid, p: float, sigma: float):
    """Tridiagonal matrix of the p-Laplacian with coefficients frozen at ``u``."""
    g = gradient(u, grid)
    a = grid.face_area * (g * g + sigma * sigma) ** (0.5 * (p - 2.0)) / grid.face_spacing
    diag = a.copy()
    diag[1:] += a[:-1]
    return diag, -a[:-1]


def solve_tridiagonal(diag, off, rhs) -> np.ndarray:
    """Solve a symmetric tridiagonal system given its diagonal and off-diagonal."""
    m = diag.size
    ab = np.zeros((3, m))
    ab[0, 1:] = off
    ab[1] = diag
    ab[2, :-1] = off
    return solve_banded((1, 1), ab, rhs, check_finite=False)
