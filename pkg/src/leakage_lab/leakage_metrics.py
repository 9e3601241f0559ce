"""Privacy metrics for Gaussian-mixture releases.

All information quantities are in nats unless a function says otherwise.

Contents
--------
* MAP adversary accuracy and binary maximal leakage in closed form.
* Sibson mutual information ``I_alpha(C; Z)``: the exact value by adaptive
  quadrature, the max-approximation with its crossing point, and two
  closed-form upper bounds (exponential and clipped/piecewise).
* Maximal leakage for discrete channels, heteroscedastic binary mixtures and
  three-class equal-variance mixtures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate, optimize, special

from . import gauss_core
from .errors import ConstraintViolation, DegenerateThresholdError, DomainError
from .gauss_core import TransformedModel, q_function

LN2 = math.log(2.0)

# Integration window half-width in units of sigma; tails beyond contribute < 1e-30.
TAIL_SIGMAS = 12.0
QUAD_EPSABS = 1e-12


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha > 1.0 or math.isnan(alpha):
        raise DomainError(f"Sibson order must exceed 1 (got {alpha})")
    return alpha


# ---------------------------------------------------------------------------
# model types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HeteroscedasticModel:
    """Binary release with per-class standard deviations ``sigma0``, ``sigma1``.

    Noise added per class is absorbed into the effective deviations,
    ``sigma_c = sqrt(Sigma_c + gamma_c^2)``.
    """

    mu0p: float
    mu1p: float
    sigma0: float
    sigma1: float
    p_tilde: float = 0.5

    def __post_init__(self):
        if self.sigma0 <= 0 or self.sigma1 <= 0:
            raise DomainError("sigma0 and sigma1 must be positive")
        if not 0.0 <= self.p_tilde <= 1.0:
            raise DomainError("p_tilde must lie in [0, 1]")


@dataclass(frozen=True)
class ThreeClassModel:
    mu0p: float
    mu1p: float
    mu2p: float
    sigma: float
    priors: tuple = (1 / 3, 1 / 3, 1 / 3)

    def __post_init__(self):
        if self.sigma <= 0:
            raise DomainError("sigma must be positive")
        if not (self.mu0p <= self.mu1p <= self.mu2p):
            raise ConstraintViolation("three-class means must be ordered mu0' <= mu1' <= mu2'")
        pri = np.asarray(self.priors, dtype=float)
        if pri.shape != (3,) or np.any(pri < 0) or abs(pri.sum() - 1.0) > 1e-12:
            raise DomainError("priors must be a point of the 3-simplex")


@dataclass(frozen=True)
class DiscreteChannel:
    """Row-stochastic matrix ``cond_prob[c, z] = P(z | c)``."""

    cond_prob: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.cond_prob, dtype=float)
        if m.ndim != 2 or m.shape[0] == 0:
            raise DomainError("channel must be a nonempty 2-D matrix")
        if m.shape[1] == 0:
            raise DomainError("channel output alphabet is empty")
        if np.any(m < 0) or np.any(m > 1):
            raise DomainError("channel entries must lie in [0, 1]")
        if np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-12):
            raise DomainError("channel rows must sum to 1")
        object.__setattr__(self, "cond_prob", m)


# ---------------------------------------------------------------------------
# MAP accuracy and binary maximal leakage
# ---------------------------------------------------------------------------


def map_accuracy(t: TransformedModel) -> float:
    """Accuracy of the MAP adversary that knows the released distribution.

    ``p Q(ln((1-p)/p)/d - d/2) + (1-p) Q(-ln((1-p)/p)/d - d/2)`` with
    ``d = (mu1' - mu0') / sigma``.  At ``d = 0`` the adversary can only guess
    the larger prior.
    """
    p = t.p_tilde
    if p in (0.0, 1.0):
        return 1.0
    d = t.d
    if d == 0.0:
        return max(p, 1.0 - p)
    llr = math.log((1.0 - p) / p)
    return p * q_function(llr / d - d / 2.0) + (1.0 - p) * q_function(-llr / d - d / 2.0)


def map_threshold(t: TransformedModel) -> float:
    """MAP decision point: guess class 0 below it, class 1 above."""
    p = t.p_tilde
    if t.mu1p <= t.mu0p:
        raise DegenerateThresholdError("collapsed means have no decision threshold")
    s2 = t.sigma_eff**2
    return 0.5 * (t.mu0p + t.mu1p) + s2 * math.log(p / (1.0 - p)) / (t.mu1p - t.mu0p)


def max_leakage_binary(t: TransformedModel) -> float:
    """``I_inf(C; Z) = ln(2 Q(-d/2))``, which lies in ``[0, ln 2]``."""
    return math.log(2.0 * q_function(-t.d / 2.0))


# ---------------------------------------------------------------------------
# Sibson mutual information
# ---------------------------------------------------------------------------


def _log_normal_pdf(z, mean, sigma):
    u = (z - mean) / sigma
    return -0.5 * u * u - np.log(sigma) - 0.5 * math.log(2.0 * math.pi)


def _integrate(f, lo, hi, points):
    pts = sorted({float(p) for p in points if lo < p < hi})
    val, _ = integrate.quad(
        f, lo, hi, points=pts or None, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=500
    )
    return val


def sibson_integral(means: Sequence[float], sigmas: Sequence[float], priors, alpha: float):
    """``int (sum_c P(z|c)^alpha P(c))^(1/alpha) dz`` for a Gaussian mixture channel.

    The inner power-sum is evaluated with log-sum-exp, so orders up to ~1e6
    neither overflow nor underflow.
    """
    alpha = check_alpha(alpha)
    means = np.asarray(means, dtype=float)
    sigmas = np.broadcast_to(np.asarray(sigmas, dtype=float), means.shape)
    priors = np.asarray(priors, dtype=float)
    keep = priors > 0
    means, sigmas, log_pri = means[keep], sigmas[keep], np.log(priors[keep])
    smax = float(sigmas.max())
    lo = float(means.min()) - TAIL_SIGMAS * smax
    hi = float(means.max()) + TAIL_SIGMAS * smax

    def integrand(z):
        terms = alpha * _log_normal_pdf(z, means, sigmas) + log_pri
        return math.exp(special.logsumexp(terms) / alpha)

    breaks = list(means)
    if len(means) > 1:
        srt = np.sort(means)
        breaks += list(0.5 * (srt[1:] + srt[:-1]))
    return _integrate(integrand, lo, hi, breaks)


def sibson_mi_quadrature(t: TransformedModel, alpha: float) -> float:
    """Exact Sibson MI of order ``alpha`` of the binary release, by quadrature."""
    alpha = check_alpha(alpha)
    if t.mu1p == t.mu0p:
        return 0.0
    val = sibson_integral(
        [t.mu0p, t.mu1p], t.sigma_eff, [t.p_tilde, 1.0 - t.p_tilde], alpha
    )
    return alpha / (alpha - 1.0) * math.log(val)


def mutual_information_quadrature(t: TransformedModel) -> float:
    """Shannon ``I(C; Z)`` of the binary release, by quadrature."""
    p = t.p_tilde
    if p in (0.0, 1.0) or t.mu1p == t.mu0p:
        return 0.0
    s = t.sigma_eff
    lp = np.log([p, 1.0 - p])
    means = np.array([t.mu0p, t.mu1p])

    def integrand(z):
        lj = _log_normal_pdf(z, means, s) + lp  # log P(z, c)
        lz = special.logsumexp(lj)
        post = lj - lz  # log P(c|z)
        return float(np.sum(np.exp(lj) * (post - lp)))

    lo, hi = means.min() - TAIL_SIGMAS * s, means.max() + TAIL_SIGMAS * s
    return _integrate(integrand, lo, hi, [t.mu0p, t.mu1p, 0.5 * (t.mu0p + t.mu1p)])


class MaxApprox(NamedTuple):
    value: float
    threshold: float


def sibson_mi_max_approx(t: TransformedModel, alpha: float) -> MaxApprox:
    """Sibson MI with the inner power-sum replaced by a max.

    ``(sum_c P(z|c)^alpha P(c))^(1/alpha)`` is approximated by
    ``max_c P(c)^(1/alpha) P(z|c)``, whose two branches cross at

    ``z0 = ((2 s^2/alpha) ln((1-p)/p) + mu0'^2 - mu1'^2) / (2 (mu0' - mu1'))``.

    Returns
    -------
    MaxApprox
        ``(value, threshold)``, value in nats.

    Raises
    ------
    DegenerateThresholdError
        If the transformed means coincide; use :func:`sibson_mi_quadrature`.
    """
    alpha = check_alpha(alpha)
    p = t.p_tilde
    if not 0.0 < p < 1.0:
        raise DomainError("max-approximation needs a nondegenerate prior")
    m0, m1, s = t.mu0p, t.mu1p, t.sigma_eff
    if not m0 < m1:
        raise DegenerateThresholdError("max-approximation needs mu0' < mu1'")
    z0 = ((2.0 * s * s / alpha) * math.log((1.0 - p) / p) + m0 * m0 - m1 * m1) / (
        2.0 * (m0 - m1)
    )
    inner = p ** (1.0 / alpha) * (1.0 - q_function((z0 - m0) / s)) + (1.0 - p) ** (
        1.0 / alpha
    ) * q_function((z0 - m1) / s)
    return MaxApprox(alpha / (alpha - 1.0) * math.log(inner), z0)


def sibson_mi_exp_bound(p_tilde: float, d: float, alpha: float) -> float:
    """Closed-form upper bound on the binary Sibson information, growing in ``d^2``.

    Uses ``P(c|z) <= P(c) P(z|c) / (P(c') P(z|c'))`` for each class, whose
    ``alpha``-th moments under either class are Gaussian exponential moments:
    ``E_c[(P_c/P_c')^alpha] = exp((alpha^2 + alpha) d^2 / 2)`` and
    ``E_c'[(P_c/P_c')^alpha] = exp((alpha^2 - alpha) d^2 / 2)``.
    Evaluated entirely in log space.
    """
    alpha = check_alpha(alpha)
    p = float(p_tilde)
    if not 0.0 < p < 1.0:
        raise DomainError("bound is undefined for a degenerate prior")
    if d < 0:
        raise DomainError("normalized gap must be nonnegative")
    lr = math.log((1.0 - p) / p)
    hi = 0.5 * (alpha * alpha + alpha) * d * d
    lo = 0.5 * (alpha * alpha - alpha) * d * d
    lp, lq = math.log(p), math.log(1.0 - p)
    log_t0 = -alpha * lr + np.logaddexp(lp + hi, lq + lo)
    log_t1 = alpha * lr + np.logaddexp(lp + lo, lq + hi)
    return float(alpha / (alpha - 1.0) * np.logaddexp(log_t0 / alpha, log_t1 / alpha))


def _log_expect_clipped_exp(a, b, m, s):
    """``log E[min(1, exp(a + b Z))]`` for ``Z ~ N(m, s^2)``."""
    if b == 0.0:
        return min(a, 0.0)
    zc = -a / b
    u = (zc - m) / s
    log_scale = a + b * m + 0.5 * b * b * s * s
    if b > 0:
        part = log_scale + special.log_ndtr(u - b * s)
        rest = special.log_ndtr(-u)
    else:
        part = log_scale + special.log_ndtr(-(u - b * s))
        rest = special.log_ndtr(u)
    return float(np.logaddexp(part, rest))


def sibson_mi_piecewise_bound(t: TransformedModel, alpha: float) -> float:
    """Upper bound using ``g(z) = min(1, (P(c')P(z|c') / (P(c)P(z|c)))^-alpha)``.

    ``P(c|z)^alpha <= g(z)``; its expectation under each class-conditional
    Gaussian has a Q-function closed form, split at the crossing
    ``z0 = (ln((1-p)/p) + (mu0'^2 - mu1'^2)/(2 s^2)) s^2 / (mu0' - mu1')``.
    Never exceeds :func:`sibson_mi_exp_bound` at the same ``(p, d, alpha)``.
    The derivation orders the means ``mu1' < mu0'``; the closed form used
    here is symmetric in that choice so no relabelling is needed.
    """
    alpha = check_alpha(alpha)
    p = t.p_tilde
    if not 0.0 < p < 1.0:
        raise DomainError("bound is undefined for a degenerate prior")
    m0, m1, s = t.mu0p, t.mu1p, t.sigma_eff
    if m0 == m1:
        raise DegenerateThresholdError("piecewise bound needs distinct means")
    lr = math.log((1.0 - p) / p)
    s2 = s * s
    # log of (r L(z))^-alpha for class 0, with L = P(z|1)/P(z|0), r = (1-p)/p
    b0 = -alpha * (m1 - m0) / s2
    a0 = -alpha * lr + alpha * (m1 * m1 - m0 * m0) / (2.0 * s2)
    lp, lq = math.log(p), math.log(1.0 - p)
    log_t0 = np.logaddexp(
        lp + _log_expect_clipped_exp(a0, b0, m0, s), lq + _log_expect_clipped_exp(a0, b0, m1, s)
    )
    a1, b1 = -a0, -b0
    log_t1 = np.logaddexp(
        lp + _log_expect_clipped_exp(a1, b1, m0, s), lq + _log_expect_clipped_exp(a1, b1, m1, s)
    )
    return float(alpha / (alpha - 1.0) * np.logaddexp(log_t0 / alpha, log_t1 / alpha))


# ---------------------------------------------------------------------------
# maximal leakage: discrete, heteroscedastic, three-class
# ---------------------------------------------------------------------------


class Leakage(NamedTuple):
    nats: float
    bits: float


def max_leakage_discrete(channel: DiscreteChannel | np.ndarray) -> Leakage:
    """``log sum_z max_c P(z|c)`` over outputs with positive mass."""
    if not isinstance(channel, DiscreteChannel):
        channel = DiscreteChannel(np.asarray(channel, dtype=float))
    m = channel.cond_prob
    cols = m[:, m.max(axis=0) > 0]
    if cols.shape[1] == 0:
        raise DomainError("channel has no output with positive mass")
    total = float(cols.max(axis=0).sum())
    return Leakage(math.log(total), math.log2(total))


def parity_release_channel(k: int) -> DiscreteChannel:
    """Uniform ``2k``-bit secret released as itself when even, else as ``1``."""
    if k < 1:
        raise DomainError("k must be positive")
    n = 1 << (2 * k)
    c = np.arange(n)
    z = np.where(c % 2 == 0, c, 1)
    m = np.zeros((n, n))
    m[c, z] = 1.0
    return DiscreteChannel(m)


def low_bits_channel(k: int) -> DiscreteChannel:
    """Uniform ``2k``-bit secret released with its top ``k-1`` bits zeroed."""
    if k < 1:
        raise DomainError("k must be positive")
    n = 1 << (2 * k)
    c = np.arange(n)
    z = c & ((1 << (k + 1)) - 1)
    m = np.zeros((n, n))
    m[c, z] = 1.0
    return DiscreteChannel(m)


class HeteroLeakage(NamedTuple):
    nats: float
    thresholds: tuple
    dominated: bool


def max_leakage_hetero(m: HeteroscedasticModel) -> HeteroLeakage:
    """Maximal leakage of a binary release with unequal class variances.

    Where the densities cross twice, the narrower class (relabelled as class 0
    so that ``sigma1 > sigma0``) wins on ``[z0, z1]`` and the wider one on the
    two tails.  Q arguments are normalized by the per-class deviation.
    """
    mu0, mu1, s0, s1 = m.mu0p, m.mu1p, m.sigma0, m.sigma1
    if s0 == s1:
        if mu0 == mu1:
            return HeteroLeakage(0.0, (mu0,), False)
        lo, hi = min(mu0, mu1), max(mu0, mu1)
        t = TransformedModel(lo, hi, s0, 0.5)
        return HeteroLeakage(max_leakage_binary(t), (0.5 * (lo + hi),), False)
    if s0 > s1:
        mu0, mu1, s0, s1 = mu1, mu0, s1, s0
    # log N(z; mu0, s0) - log N(z; mu1, s1) = 0, times -2
    a = 1.0 / s0**2 - 1.0 / s1**2
    b = -2.0 * (mu0 / s0**2 - mu1 / s1**2)
    c = mu0**2 / s0**2 - mu1**2 / s1**2 + 2.0 * math.log(s0 / s1)
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return HeteroLeakage(0.0, (), True)
    r = math.sqrt(disc)
    # numerically stable pair of roots
    qq = -0.5 * (b + math.copysign(r, b))
    roots = sorted([qq / a, c / qq] if qq != 0 else [-b / (2 * a)] * 2)
    z0, z1 = roots
    narrow = special.ndtr((z1 - mu0) / s0) - special.ndtr((z0 - mu0) / s0)
    tails = special.ndtr((z0 - mu1) / s1) + q_function((z1 - mu1) / s1)
    return HeteroLeakage(math.log(narrow + tails), (z0, z1), False)


def max_leakage_three_class(m: ThreeClassModel) -> float:
    """Maximal leakage of three ordered equal-variance Gaussians, in ``[0, ln 3]``."""
    s = m.sigma
    z0 = 0.5 * (m.mu0p + m.mu1p)
    z1 = 0.5 * (m.mu1p + m.mu2p)
    total = (
        (1.0 - q_function((z0 - m.mu0p) / s))
        + (q_function((z0 - m.mu1p) / s) - q_function((z1 - m.mu1p) / s))
        + q_function((z1 - m.mu2p) / s)
    )
    return math.log(total)


def max_leakage_quadrature(means, sigmas) -> float:
    """``ln int max_c P(z|c) dz`` by direct quadrature (independent check)."""
    means = np.asarray(means, dtype=float)
    sigmas = np.broadcast_to(np.asarray(sigmas, dtype=float), means.shape)
    smax = float(sigmas.max())
    lo = float(means.min()) - TAIL_SIGMAS * smax
    hi = float(means.max()) + TAIL_SIGMAS * smax

    def integrand(z):
        return float(np.max(gauss_core.normal_pdf(z, means, sigmas)))

    # locate the kinks of the max on a grid, then polish each with brentq
    grid = np.linspace(lo, hi, 4001)
    dens = gauss_core.normal_pdf(grid[:, None], means, sigmas)
    winner = np.argmax(dens, axis=1)
    switches = []
    for i in np.flatnonzero(winner[1:] != winner[:-1]):
        a, b = winner[i], winner[i + 1]

        def gap(z, a=a, b=b):
            return _log_normal_pdf(z, means[a], sigmas[a]) - _log_normal_pdf(z, means[b], sigmas[b])

        switches.append(optimize.brentq(gap, grid[i], grid[i + 1], xtol=1e-14))
    return math.log(_integrate(integrand, lo, hi, list(means) + switches))
