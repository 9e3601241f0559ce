import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leakage_lab.affine_opt import (
    ACTIVE,
    INACTIVE,
    affine_distortion,
    condition_threshold,
    inactive_solution_segment,
    kkt_residuals,
    noisy_objective_hessian,
    optimize_noisy_affine,
    solve_affine,
)
from leakage_lab.errors import DomainError, RegimeError
from leakage_lab.gauss_core import BinaryGaussianMixture

SYM = BinaryGaussianMixture(-3.0, 3.0, 1.0, 0.5)


def noisy_grid_oracle(model, budget, n=200):
    """Smallest ``(gap - b0 - b1)/sqrt(s^2 + g^2)`` on an ``n^3`` ellipsoid grid.

    Points are laid out in ellipsoidal coordinates (radius, two angles) so the
    budget boundary, where the optimum sits, is sampled exactly.
    """
    p, gap, s = model.p_tilde, model.gap, model.sigma
    r = np.linspace(0.0, 1.0, n)
    ang = np.linspace(0.0, 0.5 * math.pi, n)
    best = math.inf
    root = math.sqrt(budget)
    for rad in r:
        th, ph = np.meshgrid(ang, ang, indexing="ij")
        b0 = rad * root * np.cos(th) * np.cos(ph) / math.sqrt(1 - p)
        b1 = rad * root * np.sin(th) * np.cos(ph) / math.sqrt(p)
        g = rad * root * np.sin(ph)
        rem = gap - b0 - b1
        f = np.where(rem >= 0, rem / np.sqrt(s * s + g * g), np.inf)
        best = min(best, float(f.min()))
    return best


# --- budget threshold -----------------------------------------------------


def test_condition_threshold_values():
    assert condition_threshold(SYM) == pytest.approx(9.0)
    assert condition_threshold(BinaryGaussianMixture(1, 1, 1, 0.3)) == 0.0
    assert condition_threshold(BinaryGaussianMixture(0, 4, 1, 0.25)) == pytest.approx(3.0)


def test_condition_forms_agree_over_priors():
    gap = 6.0
    for p in np.linspace(0.01, 0.99, 99):
        direct = p * (1 - p) * gap**2
        other = (gap / (math.sqrt(p / (1 - p)) + math.sqrt((1 - p) / p))) ** 2
        assert abs(direct - other) <= 1e-12 * max(1, direct)
        assert condition_threshold(BinaryGaussianMixture(0, gap, 1, p)) == pytest.approx(direct, rel=1e-15)


# --- closed-form solution -------------------------------------------------


def test_solve_affine_active_example():
    s = solve_affine(SYM, 4.0)
    assert (s.beta0, s.beta1, s.regime) == (pytest.approx(2.0), pytest.approx(2.0), ACTIVE)
    assert s.objective == pytest.approx(-1.0)


def test_solve_affine_inactive_example():
    s = solve_affine(SYM, 16.0)
    assert (s.beta0, s.beta1, s.regime, s.objective) == (3.0, 3.0, INACTIVE, 0.0)


def test_solve_affine_rejects_negative_budget():
    with pytest.raises(DomainError):
        solve_affine(SYM, -1.0)


@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_branches_meet_at_threshold(p):
    m = BinaryGaussianMixture(-1.0, 3.0, 1.0, p)
    d_max = condition_threshold(m)
    at = solve_affine(m, d_max)
    assert at.beta0 == pytest.approx(p * m.gap, abs=1e-10)
    assert at.beta1 == pytest.approx((1 - p) * m.gap, abs=1e-10)
    lo, hi = solve_affine(m, d_max - 1e-6), solve_affine(m, d_max + 1e-6)
    assert abs(lo.beta0 - hi.beta0) < 1e-5 and abs(lo.beta1 - hi.beta1) < 1e-5


@settings(max_examples=100, deadline=None)
@given(p=st.floats(0.02, 0.98), gap=st.floats(0.1, 10), frac=st.floats(0, 2))
def test_solution_is_feasible(p, gap, frac):
    m = BinaryGaussianMixture(0.0, gap, 1.0, p)
    budget = frac * condition_threshold(m)
    s = solve_affine(m, budget)
    assert affine_distortion(s.beta0, s.beta1, p) <= budget + 1e-12 * max(1, budget)
    assert s.beta0 + s.beta1 <= gap + 1e-12
    assert s.objective <= 0


def _instances(n, seed, active=True):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        p, gap = rng.uniform(0.1, 0.9), rng.uniform(1, 8)
        m = BinaryGaussianMixture(0.0, gap, 1.0, p)
        hi = 1.0 if active else 1.5
        out.append((m, rng.uniform(0.05, hi) * condition_threshold(m)))
    return out


@pytest.mark.parametrize("m,budget", _instances(20, seed=0, active=False))
def test_closed_form_beats_box_grid(m, budget):
    # The maximizer of a linear objective on a gridded ellipse can slide many
    # cells along the flat boundary, so the box grid is compared on value.
    p, n = m.p_tilde, 500
    b0 = np.linspace(0, min(math.sqrt(budget / (1 - p)), m.gap), n)
    b1 = np.linspace(0, min(math.sqrt(budget / p), m.gap), n)
    g0, g1 = np.meshgrid(b0, b1, indexing="ij")
    feas = (affine_distortion(g0, g1, p) <= budget) & (g0 + g1 <= m.gap)
    grid_best = float(np.max(np.where(feas, g0 + g1, -np.inf)))
    s = solve_affine(m, budget)
    cell = max(b0[1] - b0[0], b1[1] - b1[0])
    assert grid_best <= s.beta0 + s.beta1 + 1e-12
    assert s.beta0 + s.beta1 - grid_best <= cell


@pytest.mark.parametrize("m,budget", _instances(20, seed=1))
def test_closed_form_matches_boundary_grid_argmax(m, budget):
    p, n = m.p_tilde, 500
    radius = np.linspace(0, 1, n)[:, None]
    theta = np.linspace(0, 0.5 * math.pi, n)[None, :]
    b0 = radius * math.sqrt(budget / (1 - p)) * np.cos(theta)
    b1 = radius * math.sqrt(budget / p) * np.sin(theta)
    i, j = np.unravel_index(np.argmax(b0 + b1), b0.shape)
    s = solve_affine(m, budget)
    th_star = math.atan2(s.beta1 * math.sqrt(p), s.beta0 * math.sqrt(1 - p))
    assert i == n - 1
    assert abs(theta[0, j] - th_star) <= theta[0, 1] - theta[0, 0]


# --- KKT ------------------------------------------------------------------


def test_kkt_at_active_optimum():
    s = solve_affine(SYM, 4.0)
    r = kkt_residuals(SYM, 4.0, s.beta0, s.beta1)
    assert max(r.stationarity0, r.stationarity1, r.slackness) <= 1e-8
    assert r.multiplier < 0


@pytest.mark.parametrize("m,budget", _instances(10, seed=2))
def test_kkt_holds_for_random_active_instances(m, budget):
    s = solve_affine(m, budget)
    r = kkt_residuals(m, budget, s.beta0, s.beta1)
    assert max(r.stationarity0, r.stationarity1, r.slackness) <= 1e-8


def test_kkt_flags_interior_point():
    r = kkt_residuals(SYM, 4.0, 0.5, 0.5)
    assert max(r.stationarity0, r.stationarity1, r.slackness) > 0.1
    # symmetric shifts satisfy stationarity; the unused budget breaks slackness
    assert r.slackness == pytest.approx(7.5)


def test_kkt_off_balance_point_breaks_stationarity():
    r = kkt_residuals(SYM, 4.0, 1.0, 2.0)
    assert r.stationarity1 > 0.1


def test_kkt_inactive_regime_zero_slackness():
    s = solve_affine(SYM, 16.0)
    r = kkt_residuals(SYM, 16.0, s.beta0, s.beta1)
    assert r.slackness == 0.0 and r.multiplier == 0.0


def test_kkt_multiplier_undefined_at_zero_shift():
    with pytest.raises(RegimeError):
        kkt_residuals(SYM, 4.0, 0.0, 2.0)


# --- merge segment --------------------------------------------------------


def test_segment_examples():
    assert inactive_solution_segment(SYM, 9.0) == pytest.approx((3.0, 3.0))
    assert inactive_solution_segment(SYM, 13.0) == pytest.approx((1.0, 5.0))


def test_segment_requires_slack_budget():
    with pytest.raises(RegimeError):
        inactive_solution_segment(SYM, 8.0)


@settings(max_examples=60, deadline=None)
@given(p=st.floats(0.05, 0.95), gap=st.floats(0.5, 8), extra=st.floats(0.0, 3.0))
def test_segment_endpoints_on_budget_boundary(p, gap, extra):
    m = BinaryGaussianMixture(0.0, gap, 1.0, p)
    budget = condition_threshold(m) * (1 + extra)
    lo, hi = inactive_solution_segment(m, budget)
    assert 0 <= lo <= hi <= gap
    for b in (lo, hi):
        cost = affine_distortion(b, gap - b, p)
        assert cost <= budget * (1 + 1e-9)
        if 0 < b < gap:
            assert cost == pytest.approx(budget, rel=1e-9)
    mid = 0.5 * (lo + hi)
    assert affine_distortion(mid, gap - mid, p) <= budget * (1 + 1e-12)


# --- noisy affine -------------------------------------------------------------


def test_noisy_empty_budget():
    s = optimize_noisy_affine(SYM, 0.0)
    assert (s.beta0, s.beta1, s.gamma) == (0.0, 0.0, 0.0)
    assert s.objective == pytest.approx(6.0)


def test_noisy_known_optimum():
    s = optimize_noisy_affine(SYM, 4.0)
    # symmetric case: minimize (6 - b)/sqrt(1 + g^2) on b^2/4 + g^2 = 4
    assert s.objective == pytest.approx(4 / math.sqrt(5), abs=1e-9)
    assert affine_distortion(s.beta0, s.beta1, 0.5, s.gamma) <= 4 + 1e-12


@pytest.mark.parametrize(
    "model,budget",
    [
        (SYM, 4.0),
        (BinaryGaussianMixture(-3, 3, 1, 0.3), 2.5),
        (BinaryGaussianMixture(0, 2, 0.5, 0.6), 0.4),
    ],
)
def test_noisy_matches_grid_oracle_and_beats_affine(model, budget):
    s = optimize_noisy_affine(model, budget)
    grid = noisy_grid_oracle(model, budget)
    assert abs(s.objective - grid) <= 1e-3
    affine = solve_affine(model, budget)
    pure = (model.gap - affine.beta0 - affine.beta1) / model.sigma
    assert s.objective <= pure + 1e-9
    cost = affine_distortion(s.beta0, s.beta1, model.p_tilde, s.gamma)
    assert cost <= budget + 1e-12


def test_noisy_is_deterministic():
    m = BinaryGaussianMixture(-2, 3, 1.5, 0.35)
    assert optimize_noisy_affine(m, 1.7, 8, 5) == optimize_noisy_affine(m, 1.7, 8, 5)


def test_noisy_rejects_zero_starts():
    with pytest.raises(DomainError):
        optimize_noisy_affine(SYM, 1.0, starts=0)


# --- Hessian ------------------------------------------------------------------


def _f(model, beta, gamma):
    return (model.gap - beta) / math.sqrt(model.sigma**2 + gamma**2)


def _fd_hessian(model, beta, gamma, h=1e-5):
    x = np.array([beta, gamma])
    H = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            e_i, e_j = np.eye(2)[i] * h, np.eye(2)[j] * h
            H[i, j] = (
                _f(model, *(x + e_i + e_j))
                - _f(model, *(x + e_i - e_j))
                - _f(model, *(x - e_i + e_j))
                + _f(model, *(x - e_i - e_j))
            ) / (4 * h * h)
    return H


def test_hessian_example():
    H, det = noisy_objective_hessian(SYM, 1.0, 1.0)
    assert H[0, 0] == 0.0
    assert det == pytest.approx(-((1 / 2**1.5) ** 2), rel=1e-14)
    assert np.allclose(H, _fd_hessian(SYM, 1.0, 1.0), rtol=1e-5, atol=1e-6)


def test_hessian_at_zero_noise():
    H, det = noisy_objective_hessian(SYM, 2.0, 0.0)
    assert H[0, 1] == 0.0 and det == 0.0


def test_hessian_determinant_nonpositive_on_grid():
    for beta in np.linspace(0, 5.9, 30):
        for gamma in np.linspace(0, 5, 30):
            H, det = noisy_objective_hessian(SYM, beta, gamma)
            assert H[0, 0] == 0.0
            assert det <= 0.0


@settings(max_examples=50, deadline=None)
@given(beta=st.floats(0, 5.5), gamma=st.floats(0.05, 4))
def test_hessian_matches_finite_differences(beta, gamma):
    H, _ = noisy_objective_hessian(SYM, beta, gamma)
    fd = _fd_hessian(SYM, beta, gamma, h=1e-4)
    scale = np.max(np.abs(H))
    assert np.max(np.abs(H - fd)) <= 1e-5 * scale + 1e-6


def test_hessian_requires_open_gap():
    with pytest.raises(RegimeError):
        noisy_objective_hessian(SYM, 6.0, 1.0)
