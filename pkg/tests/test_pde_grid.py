import numpy as np
import pytest

from frachardy.domain_potential import PotentialSpec, RadialDomain
from frachardy.errors import ParameterError, ShapeError
from frachardy.pde_radial import RadialGrid, p_laplacian_radial
from frachardy.pde_radial.grid import (
    divergence,
    flux,
    frozen_stiffness,
    gradient,
    p_energy,
    solve_tridiagonal,
    stiffness_jacobian,
)

DOMAIN = RadialDomain(4.0, 1.0)


def test_grid_geometry():
    g = RadialGrid(DOMAIN, 10)
    r = g.nodes
    assert r[0] > 0 and r[-1] < 1 and np.all(np.diff(r) > 0)
    assert np.allclose(np.diff(r), g.h)
    assert r[-1] + g.h == pytest.approx(1.0)
    # exact volumes of the cells [j h, (j + 1) h] in the measure r^{n-1} dr
    assert g.volumes.sum() == pytest.approx(g.faces[-1] ** 4 / 4, rel=1e-14)
    assert g.integrate(np.ones(10)) == pytest.approx(g.volumes.sum())
    with pytest.raises(ParameterError):
        RadialGrid(DOMAIN, 1)
    with pytest.raises(ShapeError):
        g.check(np.zeros(9))


def test_potential_on_grid_matches_truncation():
    g = RadialGrid(DOMAIN, 50)
    s = PotentialSpec(3.0, 0.0, DOMAIN)
    w = g.potential(s)
    assert np.all(np.isfinite(w))
    assert np.all(g.potential(s, 500.0) == np.minimum(w, 500.0))
    other = PotentialSpec(3.0, 0.0, RadialDomain(4.0, 2.0))
    with pytest.raises(ParameterError):
        g.potential(other)


def test_constant_annihilated_up_to_boundary_cell():
    g = RadialGrid(DOMAIN, 40)
    out = p_laplacian_radial(np.full(40, 3.0), g, 3.0, sigma=0.0)
    # the Dirichlet datum makes only the last cell feel a gradient
    assert np.all(out[:-1] == 0.0)


def test_interior_constant_gradient_zero():
    g = RadialGrid(DOMAIN, 40)
    assert np.all(gradient(np.full(40, 2.0), g)[:-1] == 0.0)


def test_p_laplacian_converges_to_radial_formula():
    # u = 1 - r^2, p = 3, n = 4: Delta_p u = -2^{p-1}(n + p - 2) r^{p-2} = -20 r
    errs = []
    for m in (100, 200, 400, 800):
        g = RadialGrid(DOMAIN, m)
        r = g.nodes
        out = p_laplacian_radial(1 - r**2, g, 3.0, sigma=0.0)
        errs.append(np.max(np.abs(out + 20 * r)))
    errs = np.array(errs)
    assert np.all(errs[1:] < errs[:-1])
    assert np.all(np.log2(errs[:-1] / errs[1:]) > 0.9)
    assert errs[-1] < 1e-2


def test_summation_by_parts():
    rng = np.random.default_rng(3)
    g = RadialGrid(DOMAIN, 60)
    u = rng.normal(size=60)
    phi = rng.normal(size=60)
    for p in (2.5, 3.0, 4.0):
        F = flux(u, g, p, 1e-3)
        lhs = (divergence(F, g) * phi) @ g.volumes
        # phi extended by 0 at r = R
        rhs = -(F * gradient(phi, g)) @ g.face_spacing
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
        # with phi = 1 only the boundary flux survives
        assert (divergence(F, g) @ g.volumes) == pytest.approx(F[-1], rel=1e-12, abs=1e-12)


def test_homogeneity_sigma_zero():
    g = RadialGrid(DOMAIN, 80)
    r = g.nodes
    X = np.cos(0.5 * np.pi * r) * (1 + r)
    base = p_laplacian_radial(X, g, 3.0, sigma=0.0)
    for c in (0.1, 2.0, 37.0):
        scaled = p_laplacian_radial(c * X, g, 3.0, sigma=0.0)
        assert np.max(np.abs(scaled - c**2 * base)) <= 1e-13 * c**2 * np.max(np.abs(base))


def test_energy_is_potential_of_the_operator():
    # d/du (P(u)/p) = -V Delta_p u with sigma = 0
    rng = np.random.default_rng(5)
    g = RadialGrid(DOMAIN, 30)
    u = rng.normal(size=30)
    p = 3.0
    grad = -g.volumes * p_laplacian_radial(u, g, p, sigma=0.0)
    eps = 1e-6
    fd = np.array([(p_energy(u + eps * e, g, p) - p_energy(u - eps * e, g, p)) / (2 * eps * p) for e in np.eye(30)])
    assert np.max(np.abs(fd - grad)) <= 1e-7 * np.max(np.abs(grad))


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(8)
    g = RadialGrid(DOMAIN, 12)
    u = rng.normal(size=12)
    p, sigma = 3.0, 1e-2
    S = lambda v: -g.volumes * p_laplacian_radial(v, g, p, sigma)  # noqa: E731
    diag, off = stiffness_jacobian(u, g, p, sigma)
    J = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    eps = 1e-7
    fd = np.column_stack([(S(u + eps * e) - S(u - eps * e)) / (2 * eps) for e in np.eye(12)])
    assert np.allclose(J, fd, rtol=1e-5, atol=1e-7)


def test_frozen_stiffness_reproduces_operator():
    rng = np.random.default_rng(9)
    g = RadialGrid(DOMAIN, 20)
    u = rng.normal(size=20)
    diag, off = frozen_stiffness(u, g, 3.0, 0.0)
    A = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    assert np.allclose(A @ u, -g.volumes * p_laplacian_radial(u, g, 3.0, sigma=0.0), rtol=1e-12, atol=1e-12)
    b = rng.normal(size=20)
    assert np.allclose(A @ solve_tridiagonal(diag, off, b), b)
