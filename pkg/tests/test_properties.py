import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from frachardy.domain_potential import PotentialSpec, RadialDomain, potential_w, potential_w_truncated
from frachardy.fode import CaseTag, FodeProblem, blowup_time, classify_case, subsolution_F
from frachardy.fracops import FracParams, TimeGrid, caputo_apply
from frachardy.pde_radial import RadialGrid, p_laplacian_radial

alphas = st.floats(0.05, 0.95)
finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(alpha=alphas, K=st.integers(2, 60), grading=st.floats(1.0, 4.0), c=finite)
def test_constants_annihilated(alpha, K, grading, c):
    grid = TimeGrid.graded(1.0, K, grading)
    assert np.all(caputo_apply(np.full(K + 1, c), grid, FracParams(alpha)) == 0.0)


@settings(max_examples=60, deadline=None)
@given(alpha=alphas, K=st.integers(2, 40), a=finite, b=finite, seed=st.integers(0, 2**32 - 1))
def test_caputo_linear(alpha, K, a, b, seed):
    rng = np.random.default_rng(seed)
    grid = TimeGrid.graded(1.0, K, 1.5)
    p = FracParams(alpha)
    u, v = rng.normal(size=K + 1), rng.normal(size=K + 1)
    lhs = caputo_apply(a * u + b * v, grid, p)
    rhs = a * caputo_apply(u, grid, p) + b * caputo_apply(v, grid, p)
    scale = (abs(a) + abs(b) + 1) * np.max(np.abs(caputo_apply(np.abs(u) + np.abs(v), grid, p))) + 1
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


@settings(max_examples=200, deadline=None)
@given(alpha=alphas, q=st.floats(1.01, 20.0))
def test_exactly_one_case(alpha, q):
    tag = classify_case(alpha, q)
    c = 1 - q * (1 - alpha)
    expected = CaseTag.I2 if abs(c) <= 1e-12 else (CaseTag.I1 if c > 0 else CaseTag.II)
    assert tag is expected


@settings(max_examples=150, deadline=None)
@given(alpha=st.floats(0.2, 0.95), q=st.floats(1.05, 8.0), u0=st.floats(0.3, 10.0))
def test_blowup_time_is_root(alpha, q, u0):
    prob = FodeProblem(alpha, q, u0)
    est = blowup_time(prob)
    assume(math.isfinite(est.t_m) and est.t_m < 1e10)
    assert est.t_m > 0
    F = float(subsolution_F(est.t_m, est.params, prob))
    assert abs(F) <= 1e-9 * est.params.w0 ** (1 - q)
    assert float(subsolution_F(0.5 * est.t_m, est.params, prob)) > 0


@settings(max_examples=100, deadline=None)
@given(alpha=st.floats(0.2, 0.95), q=st.floats(1.05, 8.0), u0=st.floats(0.3, 10.0), factor=st.floats(1.01, 3.0))
def test_blowup_time_decreasing_in_u0(alpha, q, u0, factor):
    a = blowup_time(FodeProblem(alpha, q, u0)).t_m
    b = blowup_time(FodeProblem(alpha, q, u0 * factor)).t_m
    assume(math.isfinite(a) and a < 1e10)
    assert b < a


@settings(max_examples=100, deadline=None)
@given(
    n=st.floats(3.2, 8.0),
    p=st.floats(2.1, 3.0),
    r=st.floats(0.001, 0.999),
    N1=st.floats(1.0, 1e6),
    N2=st.floats(1.0, 1e6),
)
def test_truncation_is_monotone(n, p, r, N1, N2):
    spec = PotentialSpec(p, 0.0, RadialDomain(n, 1.0))
    lo, hi = sorted((N1, N2))
    a, b = potential_w_truncated(r, spec, lo), potential_w_truncated(r, spec, hi)
    assert a <= b <= potential_w(r, spec)


@settings(max_examples=40, deadline=None)
@given(c=st.floats(1e-3, 1e3), seed=st.integers(0, 2**32 - 1), p=st.floats(2.1, 5.0))
def test_p_laplacian_homogeneous(c, seed, p):
    grid = RadialGrid(RadialDomain(6.0, 1.0), 30)
    X = np.random.default_rng(seed).uniform(0.1, 1.0, 30)
    base = p_laplacian_radial(X, grid, p, sigma=0.0)
    scaled = p_laplacian_radial(c * X, grid, p, sigma=0.0)
    assert np.max(np.abs(scaled - c ** (p - 1) * base)) <= 1e-12 * c ** (p - 1) * np.max(np.abs(base))
