"""Optimal affine and noisy-affine privatizers for the binary Gaussian model.

The privatizer moves the class means towards each other by ``beta0`` and
``beta1`` under the expected-distortion budget

    (1 - p) * beta0**2 + p * beta1**2 (+ gamma**2) <= D,

and every privacy metric of the release is monotone in the remaining gap, so
the affine problem reduces to maximizing ``beta0 + beta1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, RegimeError
from .gauss_core import BinaryGaussianMixture

ACTIVE = "budget-active"
INACTIVE = "budget-inactive"


def _check_budget(d_budget: float) -> float:
    d_budget = float(d_budget)
    if not d_budget >= 0 or not math.isfinite(d_budget):
        raise DomainError(f"distortion budget must be finite and nonnegative (got {d_budget})")
    return d_budget


def affine_distortion(beta0, beta1, p_tilde, gamma=0.0):
    """Expected squared displacement ``(1-p) beta0^2 + p beta1^2 + gamma^2``."""
    return (1.0 - p_tilde) * beta0**2 + p_tilde * beta1**2 + gamma**2


@dataclass(frozen=True)
class AffineSolution:
    beta0: float
    beta1: float
    regime: str
    objective: float  # (mu0' - mu1') / (2 sigma); 0 once the means collapse


@dataclass(frozen=True)
class NoisyAffineSolution:
    beta0: float
    beta1: float
    gamma: float
    objective: float  # (mu1' - mu0') / sqrt(sigma^2 + gamma^2)
    multistart_count: int


def condition_threshold(model: BinaryGaussianMixture) -> float:
    """Largest budget for which the distortion constraint binds.

    Above ``p(1-p) * gap^2`` the privatizer can merge the two means outright.
    """
    p, gap = model.p_tilde, model.gap
    d_max = p * (1.0 - p) * gap * gap
    if 0.0 < p < 1.0:
        other = (gap / (math.sqrt(p / (1.0 - p)) + math.sqrt((1.0 - p) / p))) ** 2
        assert abs(other - d_max) <= 1e-12 * max(1.0, d_max), (other, d_max)
    return d_max


def _half_gap_objective(model, beta0, beta1):
    remaining = max(model.gap - beta0 - beta1, 0.0)
    return -remaining / (2.0 * model.sigma) + 0.0


def solve_affine(model: BinaryGaussianMixture, d_budget: float) -> AffineSolution:
    """Closed-form optimal shifts.

    While the budget binds, the stationarity conditions give
    ``beta0 = sqrt(p D / (1-p))`` and ``beta1 = sqrt((1-p) D / p)``.  Past the
    threshold the means are merged at the point that costs exactly the
    threshold budget, which keeps the solution continuous in ``D``.
    """
    d_budget = _check_budget(d_budget)
    p, gap = model.p_tilde, model.gap
    d_max = condition_threshold(model)
    if d_budget <= d_max and 0.0 < p < 1.0:
        b0 = math.sqrt(p * d_budget / (1.0 - p))
        b1 = math.sqrt((1.0 - p) * d_budget / p)
        # guard against roundoff pushing the shifts past the merge point
        if b0 + b1 > gap:
            b0, b1 = p * gap, (1.0 - p) * gap
        return AffineSolution(b0, b1, ACTIVE, _half_gap_objective(model, b0, b1))
    b0, b1 = p * gap, (1.0 - p) * gap
    return AffineSolution(b0, b1, INACTIVE, 0.0)


class KKTResiduals(NamedTuple):
    stationarity0: float
    stationarity1: float
    slackness: float
    multiplier: float


def kkt_residuals(model: BinaryGaussianMixture, d_budget: float, beta0: float, beta1: float):
    """Residuals of the KKT system of ``min -(beta0 + beta1)`` under the budget.

    The budget multiplier is recovered from the first stationarity equation,
    ``1 + 2 g (1-p) beta0 = 0``.  When the budget exceeds the threshold the
    budget multiplier is taken as 0 and the unit multiplier of the merge
    constraint ``beta0 + beta1 <= gap`` absorbs stationarity.

    Raises
    ------
    RegimeError
        ``beta0 = 0`` while the budget binds: the multiplier cannot be recovered.
    """
    d_budget = _check_budget(d_budget)
    if beta0 < 0 or beta1 < 0:
        raise DomainError("shifts must be nonnegative")
    p = model.p_tilde
    slack = d_budget - affine_distortion(beta0, beta1, p)
    if d_budget > condition_threshold(model):
        merge = 1.0  # multiplier of beta0 + beta1 <= gap
        return KKTResiduals(abs(1.0 - merge), abs(1.0 - merge), 0.0, 0.0)
    if beta0 == 0.0 or p == 1.0:
        raise RegimeError("budget multiplier is undefined at beta0 = 0")
    g = -1.0 / (2.0 * (1.0 - p) * beta0)
    return KKTResiduals(
        abs(1.0 + 2.0 * g * (1.0 - p) * beta0),
        abs(1.0 + 2.0 * g * p * beta1),
        abs(g * slack),
        g,
    )


def inactive_solution_segment(model: BinaryGaussianMixture, d_budget: float):
    """Range of ``beta0`` on the merge line ``beta0 + beta1 = gap`` within budget.

    Solves ``(1-p) b^2 + p (gap - b)^2 = D``:
    ``b = p gap -+ sqrt(D - p (1-p) gap^2)``, clipped to ``[0, gap]``.
    """
    d_budget = _check_budget(d_budget)
    d_max = condition_threshold(model)
    if d_budget < d_max:
        raise RegimeError(f"budget {d_budget} is below the merge threshold {d_max}")
    p, gap = model.p_tilde, model.gap
    half = math.sqrt(d_budget - d_max)
    return max(p * gap - half, 0.0), min(p * gap + half, gap)


# ---------------------------------------------------------------------------
# noisy affine
# ---------------------------------------------------------------------------


def _noisy_value(gap, sigma, beta, gamma):
    return (gap - beta) / math.sqrt(sigma * sigma + gamma * gamma)


def _noisy_grad(gap, sigma, beta, gamma):
    s2 = sigma * sigma + gamma * gamma
    return np.array([-1.0 / math.sqrt(s2), -(gap - beta) * gamma / s2**1.5])


def _project(u, v, a, budget):
    """Euclidean projection of ``(u, v)`` onto ``{x, y >= 0, a x^2 + y^2 <= budget}``."""
    u, v = max(u, 0.0), max(v, 0.0)
    if a * u * u + v * v <= budget:
        return u, v

    def excess(lam):
        x, y = u / (1.0 + lam * a), v / (1.0 + lam)
        return a * x * x + y * y - budget

    lo, hi = 0.0, 1.0
    while excess(hi) > 0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    return u / (1.0 + hi * a), v / (1.0 + hi)


def _descend(x, gap, sigma, a, budget, max_iter=5000):
    f = _noisy_value(gap, sigma, *x)
    for _ in range(max_iter):
        g = _noisy_grad(gap, sigma, *x)
        step = 1.0
        while True:
            cand = np.array(_project(*(x - step * g), a, budget))
            diff = cand - x
            fc = _noisy_value(gap, sigma, *cand)
            if fc <= f + g @ diff + diff @ diff / (2.0 * step) or step < 1e-14:
                break
            step *= 0.5
        if not fc < f:  # stalled at roundoff level
            break
        x, f = cand, fc
        if float(np.linalg.norm(diff)) < 1e-13:
            break
    return x, f


def optimize_noisy_affine(
    model: BinaryGaussianMixture, d_budget: float, starts: int = 32, seed=0
) -> NoisyAffineSolution:
    """Shifts plus independent Gaussian noise minimizing the normalized gap.

    The objective ``(gap - beta0 - beta1) / sqrt(sigma^2 + gamma^2)`` only sees
    the total shift ``beta``, and for a fixed total the cheapest split is
    ``beta0 = p beta``, ``beta1 = (1-p) beta``.  That leaves a two-variable
    nonconvex problem over ``p (1-p) beta^2 + gamma^2 <= D``, solved here by
    projected gradient descent from ``starts`` seeded initial points.  Only
    local optimality is guaranteed.
    """
    d_budget = _check_budget(d_budget)
    if starts < 1:
        raise DomainError("need at least one start")
    p, gap, sigma = model.p_tilde, model.gap, model.sigma
    a = p * (1.0 - p)
    if d_budget >= a * gap * gap:
        return NoisyAffineSolution(p * gap, (1.0 - p) * gap, 0.0, 0.0, starts)
    rng = np.random.default_rng(seed)
    beta_max = math.sqrt(d_budget / a)
    results = []
    for i in range(starts):
        if i == 0:
            x0 = np.array([beta_max, 0.0])  # noiseless closed-form optimum
        else:
            theta = rng.uniform(0.0, 0.5 * math.pi)
            radius = 1.0 if i % 2 else math.sqrt(rng.uniform())
            x0 = radius * math.sqrt(d_budget) * np.array([math.cos(theta) / math.sqrt(a), math.sin(theta)])
            x0 = np.array(_project(*x0, a, d_budget))
        x, f = _descend(x0, gap, sigma, a, d_budget)
        results.append((f, i, x))
    f, _, (beta, gamma) = min(results, key=lambda r: (r[0], r[1]))
    beta, gamma = float(beta), float(gamma)
    return NoisyAffineSolution(p * beta, (1.0 - p) * beta, gamma, float(f), starts)


def noisy_objective_hessian(model: BinaryGaussianMixture, beta: float, gamma: float):
    """Hessian of ``(gap - beta) / sqrt(sigma^2 + gamma^2)`` in ``(beta, gamma)``.

    The determinant equals ``-(d2f/dbeta dgamma)^2``, so it is never positive
    and the problem is not convex.

    Returns
    -------
    hessian : ndarray, shape (2, 2)
    determinant : float
    """
    rem = model.gap - beta
    if not rem > 0:
        raise RegimeError("Hessian is analysed only while the shifted means stay apart")
    s2 = model.sigma**2 + gamma * gamma
    f_bg = gamma / s2**1.5
    f_gg = -rem / s2**1.5 * (1.0 - 3.0 * gamma * gamma / s2)
    h = np.array([[0.0, f_bg], [f_bg, f_gg]])
    return h, -f_bg * f_bg
