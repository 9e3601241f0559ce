"""Plug-in estimates of Sibson MI and Shannon MI from adversary posteriors.

Both estimators average over a batch of ``N`` inputs with ``S`` latent draws
each.  The posterior tensor has shape ``(N, S, G)``; a 2-D ``(N, G)`` array is
read as ``S = 1``.

The class sum inside each estimate runs over all ``G`` classes, so an
estimate depends only on the posteriors and the prior, never on the true
labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError
from .leakage_metrics import check_alpha

POSTERIOR_FLOOR = 1e-12


@dataclass(frozen=True)
class PriorDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise DomainError("prior must be a nonempty vector")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise DomainError("prior must lie on the probability simplex")
        object.__setattr__(self, "probs", p)


@dataclass(frozen=True)
class PosteriorBatch:
    posteriors: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        q = np.asarray(self.posteriors, dtype=float)
        if q.ndim == 2:
            q = q[:, None, :]
        if q.ndim != 3:
            raise DomainError("posteriors must have shape (N, S, G)")
        if np.any(q < 0) or np.any(q > 1) or np.any(np.abs(q.sum(axis=-1) - 1.0) > 1e-9):
            raise DomainError("each posterior slice must be a probability vector")
        object.__setattr__(self, "posteriors", q)
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (q.shape[0],) or np.any(lab < 0) or np.any(lab >= q.shape[2]):
                raise DomainError("labels must be class indices, one per input")
            object.__setattr__(self, "labels", lab)


def _prepare(posteriors, prior):
    if not isinstance(posteriors, PosteriorBatch):
        posteriors = PosteriorBatch(posteriors)
    if not isinstance(prior, PriorDistribution):
        prior = PriorDistribution(prior)
    q, pc = posteriors.posteriors, prior.probs
    if q.shape[-1] != pc.size:
        raise DomainError(f"posterior has {q.shape[-1]} classes but prior has {pc.size}")
    if q.shape[0] == 0:
        raise DomainError("empty posterior batch")
    dead = pc == 0
    if np.any(dead):
        if np.any(q[..., dead] > 0):
            raise ZeroDivisionError("posterior puts mass on a class with zero prior")
        q, pc = q[..., ~dead], pc[~dead]
    return q, pc


def _sibson_terms(q, pc, alpha):
    lq = np.log(np.clip(q, POSTERIOR_FLOOR, 1.0))
    lpc = np.log(pc)
    # log of sum_c P_C(c) * (q_c / P_C(c))^alpha for every (n, i)
    log_inner = logsumexp(alpha * lq + (1.0 - alpha) * lpc, axis=-1)
    log_mean = logsumexp(log_inner / alpha) - math.log(log_inner.size)
    return lq, lpc, log_inner, log_mean


def empirical_sibson_mi(posteriors, prior, alpha: float) -> float:
    """``a/(a-1) * ln mean_{n,i} (sum_c P_C(c) (q(c|z)/P_C(c))^a)^(1/a)``."""
    alpha = check_alpha(alpha)
    q, pc = _prepare(posteriors, prior)
    *_, log_mean = _sibson_terms(q, pc, alpha)
    return float(alpha / (alpha - 1.0) * log_mean)


def empirical_sibson_mi_grad(posteriors, prior, alpha: float):
    """Estimate and its gradient with respect to every posterior entry.

    Entries clamped at the floor get zero gradient.  Returns ``(value, grad)``
    with ``grad`` shaped like the ``(N, S, G)`` posterior tensor.
    """
    alpha = check_alpha(alpha)
    if not isinstance(prior, PriorDistribution):
        prior = PriorDistribution(prior)
    q_in = np.asarray(posteriors.posteriors if isinstance(posteriors, PosteriorBatch) else posteriors, dtype=float)
    if np.any(prior.probs == 0):
        raise DomainError("gradient needs a prior with full support")
    q, pc = _prepare(q_in, prior)
    lq, lpc, log_inner, log_mean = _sibson_terms(q, pc, alpha)
    log_g = (
        (1.0 / alpha - 1.0) * log_inner[..., None]
        + (1.0 - alpha) * lpc
        + (alpha - 1.0) * lq
        - log_mean
        - math.log(log_inner.size)
    )
    grad = alpha / (alpha - 1.0) * np.exp(log_g)
    grad[q < POSTERIOR_FLOOR] = 0.0
    return float(alpha / (alpha - 1.0) * log_mean), grad.reshape(q_in.shape)


def empirical_mi(posteriors, prior) -> float:
    """Mean KL divergence from the prior to each posterior, ``0 ln 0 = 0``."""
    q, pc = _prepare(posteriors, prior)
    pos = q > 0
    terms = np.zeros_like(q)
    ratio = np.broadcast_to(pc, q.shape)
    terms[pos] = q[pos] * np.log(q[pos] / ratio[pos])
    return float(terms.sum(axis=-1).mean())


def empirical_mi_grad(posteriors, prior):
    """Estimate and gradient ``(ln(q/P_C) + 1) / (N S)``."""
    if not isinstance(prior, PriorDistribution):
        prior = PriorDistribution(prior)
    q_in = np.asarray(posteriors.posteriors if isinstance(posteriors, PosteriorBatch) else posteriors, dtype=float)
    if np.any(prior.probs == 0):
        raise DomainError("gradient needs a prior with full support")
    q, pc = _prepare(q_in, prior)
    count = q.shape[0] * q.shape[1]
    grad = (np.log(np.clip(q, POSTERIOR_FLOOR, 1.0) / pc) + 1.0) / count
    return empirical_mi(q, pc), grad.reshape(q_in.shape)
