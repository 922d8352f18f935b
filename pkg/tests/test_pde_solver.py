import dataclasses
import math

import numpy as np
import pytest
from scipy.optimize import root

from frachardy.domain_potential import PotentialSpec, RadialDomain
from frachardy.errors import ParameterError, PreconditionError, ShapeError
from frachardy.fracops import TimeGrid, gamma
from frachardy.pde_radial import (
    PdeProblem,
    RadialGrid,
    Thresholds,
    blowup_detect,
    initial_state,
    p_laplacian_radial,
    pde_comparison_check,
    scheme_residual,
    smooth_bump,
    solve,
    step,
)

LAM = 1 / 27
DOMAIN = RadialDomain(4.0, 1.0)


def make(mu_ratio=0.5, m=60, K=100, horizon=1.0, N=1e4, scale=1.0, u0=None, alpha=0.5, grading=1.0):
    spec = PotentialSpec(3.0, mu_ratio * LAM, DOMAIN)
    grid = RadialGrid(DOMAIN, m)
    tg = TimeGrid.graded(horizon, K, grading)
    u = smooth_bump(grid, scale) if u0 is None else u0
    return PdeProblem(spec, alpha, u, tg, grid, N)


def test_problem_validation():
    p = make()
    with pytest.raises(ShapeError):
        p.with_u0(np.zeros(5))
    with pytest.raises(ParameterError):
        p.with_u0(np.full(60, np.nan))
    with pytest.raises(ParameterError):
        p.with_N(0.5)
    with pytest.raises(ParameterError):
        PdeProblem(p.spec, 1.2, p.u0, p.time_grid, p.grid)
    assert p.sigma == pytest.approx(1e-8)
    assert p.u0.flags.writeable is False


def test_smooth_bump_has_unit_l2():
    g = RadialGrid(DOMAIN, 100)
    b = smooth_bump(g, 3.0)
    assert math.sqrt((b * b) @ g.volumes) == pytest.approx(3.0, rel=1e-14)
    assert np.all(b > 0)


def test_zero_is_a_fixed_point():
    rep = solve(make(mu_ratio=2.0, u0=np.zeros(60)))
    assert not rep.blowup_flag
    assert np.all(rep.states == 0.0)
    assert np.all(rep.l2_norm == 0.0) and np.all(rep.grad_p_integral == 0.0)


def test_pure_diffusion_dissipates_l2():
    rep = solve(make(mu_ratio=0.0, K=200, scale=0.5))
    assert not rep.blowup_flag
    assert np.all(np.diff(rep.l2_norm) <= 1e-14)
    assert rep.l2_norm[-1] < rep.l2_norm[0]


def _one_step_system(prob):
    grid, p = prob.grid, prob.p
    b = prob.time_grid.tau[0] ** (-prob.alpha) / gamma(2 - prob.alpha)
    W = grid.potential(prob.spec, prob.N)

    def G(u):
        return b * (u - prob.u0) - p_laplacian_radial(u, grid, p, prob.sigma) - prob.mu * W * np.abs(u) ** (p - 2) * u

    return G


def test_single_step_solves_its_system_with_strong_potential():
    prob = make(mu_ratio=0.5, m=40, K=1, horizon=0.01, N=1e4)
    state = step(initial_state(prob), prob)
    G = _one_step_system(prob)
    scale = np.max(np.abs(p_laplacian_radial(state.u, prob.grid, prob.p, prob.sigma)))
    assert np.max(np.abs(G(state.u))) < 1e-9 * scale


def test_single_step_matches_generic_root_finder():
    prob = make(mu_ratio=0.5, m=20, K=1, horizon=0.05, N=10.0)
    G = _one_step_system(prob)
    ref = root(G, prob.u0, method="hybr", tol=1e-14)
    assert ref.success
    state = step(initial_state(prob), prob)
    assert np.max(np.abs(state.u - ref.x)) < 1e-9 * np.max(np.abs(ref.x))
    with pytest.raises(ParameterError):
        step(state, prob)


def test_trajectory_satisfies_discrete_equation():
    prob = make(mu_ratio=0.5, K=60, grading=2.0)
    rep = solve(prob)
    R, M = scheme_residual(rep.states, prob)
    assert np.max(np.abs(R) / (1 + M)) < 1e-9


def test_report_quantities_are_consistent():
    prob = make(mu_ratio=0.5, K=50)
    rep = solve(prob)
    assert rep.steps == 50 and rep.times.size == 51
    for arr in (rep.l2_norm, rep.w1p_seminorm, rep.lp_norm, rep.potential_energy):
        assert np.all(arr >= 0)
    for cum in (rep.l2_q_norm, rep.w1p_q_norm, rep.grad_p_integral, rep.lp_integral):
        assert np.all(np.diff(cum) >= 0) and cum[0] == 0
    assert np.allclose(rep.w1p_q_norm, rep.grad_p_integral ** (1 / 3))
    assert rep.mu == prob.mu and rep.N == prob.N and rep.alpha == 0.5


@pytest.mark.slow
def test_time_refinement_changes_norms_little():
    # graded nodes of the coarse mesh are every other node of the fine one;
    # grading (2 - alpha)/alpha resolves the initial layer
    coarse = solve(make(mu_ratio=0.5, m=80, K=200, grading=3.0))
    fine = solve(make(mu_ratio=0.5, m=80, K=400, grading=3.0))
    for name in ("l2_norm", "w1p_seminorm", "lp_norm"):
        a = getattr(coarse, name)
        b = getattr(fine, name)[::2]
        assert np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)) < 0.05, name


def test_supercritical_large_data_blows_up():
    rep = solve(make(mu_ratio=2.0, K=200, scale=50.0))
    assert rep.blowup_flag and rep.blowup_time is not None and rep.blowup_time < 1.0
    verdict = blowup_detect(rep)
    assert verdict.blowup and verdict.index == rep.blowup_index


def _fake(report, **series):
    return dataclasses.replace(report, **series)


def test_blowup_detect_semantics():
    base = solve(make(mu_ratio=0.5, K=20))
    zero = _fake(base, l2_q_norm=np.zeros(21), w1p_q_norm=np.zeros(21), diverged_index=None)
    assert not blowup_detect(zero).blowup
    ramp = np.linspace(0.0, 10.0, 21)
    rep = _fake(zero, l2_q_norm=ramp)
    v = blowup_detect(rep, Thresholds(l2=1.0, w1p=1e6))
    assert v.blowup and v.index == int(np.nonzero(ramp > 1.0)[0][0]) and v.reason == "l2-threshold"
    assert v.time == pytest.approx(rep.times[v.index])
    # raising thresholds never creates a blow-up
    flags = [blowup_detect(rep, Thresholds(l2=t, w1p=1e6)).blowup for t in (0.5, 2.0, 9.0, 20.0, 1e3)]
    assert flags == sorted(flags, reverse=True)
    div = _fake(zero, diverged_index=21, diverged_time=1.05)
    v = blowup_detect(div)
    assert v.blowup and v.reason == "solver-divergence" and v.time == 1.05


def test_truncation_level_orders_solutions():
    runs = [solve(make(mu_ratio=0.75, K=60, N=N, scale=2.0)) for N in (10.0, 100.0, 1e3, 1e4)]
    for lo, hi in zip(runs, runs[1:]):
        n = min(lo.states.shape[0], hi.states.shape[0])
        assert np.all(lo.states[:n] <= hi.states[:n] + 1e-10)


def test_comparison_identical_and_shifted_runs():
    prob = make(mu_ratio=0.5, K=60)
    a = solve(prob)
    rep = pde_comparison_check(a, a, prob)
    assert rep.precondition_ok and rep.ordered and rep.min_margin == 0.0
    shifted = prob.with_u0(prob.u0 + 0.1)
    b = solve(shifted)
    rep = pde_comparison_check(a, b, prob)
    assert rep.ordered and rep.first_crossing is None and rep.min_margin > 0


def test_comparison_preconditions():
    prob = make(mu_ratio=0.5, K=30)
    a = solve(prob)
    b = solve(prob.with_u0(prob.u0 + 0.1))
    rep = pde_comparison_check(b, a, prob)
    assert not rep.precondition_ok and rep.ordered is None and "initial" in rep.message
    rep = pde_comparison_check(a, b, prob.with_N(None))
    assert not rep.precondition_ok and "truncated" in rep.message
    # a perturbed trajectory is not a subsolution
    noisy = a.states.copy()
    noisy[5:] *= 1.5
    rep = pde_comparison_check(noisy, b.states, prob)
    assert not rep.precondition_ok and "lower residual" in rep.message
    with pytest.raises(PreconditionError):
        pde_comparison_check(a.states[:, :10], b.states, prob)
    no_states = solve(prob, store=False)
    with pytest.raises(PreconditionError):
        pde_comparison_check(no_states, b, prob)


def test_comparison_detects_crossing_when_hypotheses_are_waived():
    prob = make(mu_ratio=0.5, K=10)
    a = solve(prob).states
    b = a.copy()
    b[4, 7] -= 1e-3
    rep = pde_comparison_check(a, b, prob, residual_tol=np.inf)
    assert rep.precondition_ok and rep.ordered is False and rep.first_crossing == (4, 7)
