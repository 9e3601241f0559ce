"""Binary Gaussian-mixture source model and its (noisy) affine transforms.

The source is ``X | C=c ~ N(mu_c, sigma^2)`` with ``P(C=0) = p_tilde``.  The
privatizer shifts the class-0 mean up by ``beta0`` and the class-1 mean down by
``beta1`` and may add class-independent noise ``gamma * N(0, 1)``.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import special

from .errors import ConstraintViolation, DomainError

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)

# Tolerance used when checking the ordering constraint mu0' <= mu1'.
ORDER_TOL = 1e-12


def _erfc_q(x):
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / _SQRT2)


_q_impl: Callable = _erfc_q


def q_function(x):
    """Standard normal tail probability ``Q(x) = P(N(0,1) > x)``.

    Accepts scalars or arrays; returns a float for scalar input.

    Raises
    ------
    DomainError
        If any input is NaN or infinite.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("Q is only evaluated at finite arguments")
    out = _q_impl(arr)
    return float(out) if np.ndim(out) == 0 else out


@contextlib.contextmanager
def q_override(fn: Callable):
    """Temporarily replace the Q implementation used by every metric.

    Fault-injection hook for the verification suite; not thread-safe.
    """
    global _q_impl
    saved = _q_impl
    _q_impl = fn
    try:
        yield
    finally:
        _q_impl = saved


def normal_pdf(x, mean=0.0, sigma=1.0):
    u = (np.asarray(x, dtype=float) - mean) / sigma
    return np.exp(-0.5 * u * u) / (_SQRT2PI * sigma)


@dataclass(frozen=True)
class BinaryGaussianMixture:
    """Two equal-variance Gaussian classes with prior ``p_tilde = P(C=0)``."""

    mu0: float
    mu1: float
    sigma: float
    p_tilde: float = 0.5

    def __post_init__(self):
        for name in ("mu0", "mu1", "sigma", "p_tilde"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.sigma <= 0:
            raise DomainError("sigma must be positive")
        if not 0.0 <= self.p_tilde <= 1.0:
            raise DomainError("p_tilde must lie in [0, 1]")
        if self.mu0 > self.mu1:
            raise ConstraintViolation(
                f"canonical orientation requires mu0 <= mu1 (got {self.mu0} > {self.mu1})"
            )

    @property
    def gap(self) -> float:
        return self.mu1 - self.mu0

    @property
    def d(self) -> float:
        return self.gap / self.sigma


@dataclass(frozen=True)
class TransformedModel:
    """Class-conditional laws of the released ``Z``: ``N(mu0p, s^2)``, ``N(mu1p, s^2)``."""

    mu0p: float
    mu1p: float
    sigma_eff: float
    p_tilde: float = 0.5

    def __post_init__(self):
        if self.sigma_eff <= 0:
            raise DomainError("sigma_eff must be positive")
        if not 0.0 <= self.p_tilde <= 1.0:
            raise DomainError("p_tilde must lie in [0, 1]")
        if self.mu0p > self.mu1p + ORDER_TOL:
            raise ConstraintViolation("transformed means are crossed (mu0' > mu1')")

    @property
    def d(self) -> float:
        """Normalized gap ``(mu1' - mu0') / sigma_eff`` (clipped at 0)."""
        return max(self.mu1p - self.mu0p, 0.0) / self.sigma_eff

    @classmethod
    def from_gap(cls, d: float, p_tilde: float = 0.5, sigma: float = 1.0):
        """Model centred at 0 with normalized gap ``d``."""
        half = 0.5 * d * sigma
        return cls(-half, half, sigma, p_tilde)


class LabeledSample(NamedTuple):
    x: float
    c: int


def mixture_pdf(model: BinaryGaussianMixture, x):
    """Mixture density ``p*N(mu0, s^2) + (1-p)*N(mu1, s^2)`` at ``x``."""
    p = model.p_tilde
    return p * normal_pdf(x, model.mu0, model.sigma) + (1.0 - p) * normal_pdf(
        x, model.mu1, model.sigma
    )


def sample_pairs(model: BinaryGaussianMixture, n: int, seed=None):
    """Draw ``n`` labelled pairs from the mixture.

    Parameters
    ----------
    model : BinaryGaussianMixture
    n : int
        Number of pairs.
    seed : int or numpy.random.Generator, optional

    Returns
    -------
    x : ndarray of float, shape (n,)
    c : ndarray of int, shape (n,)
        Labels; ``c == 1`` with probability ``1 - p_tilde``.
    """
    if n < 0:
        raise DomainError("n must be nonnegative")
    rng = np.random.default_rng(seed)
    c = (rng.random(n) >= model.p_tilde).astype(np.int64)
    means = np.where(c == 0, model.mu0, model.mu1)
    x = means + model.sigma * rng.standard_normal(n)
    return x, c


def apply_affine(
    model: BinaryGaussianMixture, beta0: float, beta1: float, gamma: float = 0.0
) -> TransformedModel:
    """Push the mixture through ``Z = X + (1-C)*beta0 - C*beta1 + gamma*N``.

    Raises
    ------
    DomainError
        Negative parameters.
    ConstraintViolation
        If the shifted means cross, which would reverse the MAP decision rule.
    """
    if beta0 < 0 or beta1 < 0 or gamma < 0:
        raise DomainError("beta0, beta1 and gamma must be nonnegative")
    mu0p = model.mu0 + beta0
    mu1p = model.mu1 - beta1
    if mu0p > mu1p + ORDER_TOL:
        raise ConstraintViolation(
            f"mu0 + beta0 = {mu0p} exceeds mu1 - beta1 = {mu1p}"
        )
    mu1p = max(mu1p, mu0p)
    return TransformedModel(
        mu0p, mu1p, math.sqrt(model.sigma**2 + gamma**2), model.p_tilde
    )
