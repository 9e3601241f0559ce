"""Alternating privatizer/adversary training.

Each iteration takes ``k`` Adam steps on the adversary (cross-entropy, the
privatizer frozen, a fresh random minibatch per step) followed by one Adam
step on the privatizer, which minimizes an empirical leakage estimate plus a
growing hinge penalty ``rho_t * max(0, distortion - D)``.

One iteration consumes one minibatch of an epoch-wise shuffle, so a run has
``T = epochs * ceil(N / M)`` iterations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import estimators, nn_engine
from .datasets import Dataset, minibatches
from .errors import DomainError, TrainingDiverged

METRICS = ("sibson", "mi")
PRIVATIZERS = ("affine", "noisy_affine", "mlp")
RHO_SCHEDULES = ("linear10", "linear1000")
LOG_SIGMA_INIT = -2.0
TRACE_COLUMNS = ("epoch", "adversary_loss", "privatizer_loss", "mean_distortion", "adversary_accuracy", "rho")


@dataclass(frozen=True)
class TrainingConfig:
    batch_size: int = 500
    samples_s: int = 12
    adversary_steps_k: int = 20
    epochs: int = 1000
    d_budget: float = 1.0
    alpha: float = 20.0
    metric: str = "sibson"
    privatizer: str = "affine"
    learning_rate: float = 1e-3
    privatizer_learning_rate: Optional[float] = None  # defaults to learning_rate
    seed: int = 0
    rho_schedule: str = "linear10"
    adversary_hidden: tuple = (4,)
    privatizer_hidden: tuple = (16, 16)
    latent_dim: Optional[int] = None  # defaults to the feature dimension
    dropout: float = 0.0
    distortion_per_feature: bool = False

    def __post_init__(self):
        for name in ("batch_size", "samples_s", "adversary_steps_k", "epochs"):
            if int(getattr(self, name)) < 1:
                raise DomainError(f"{name} must be at least 1")
        if not self.d_budget >= 0:
            raise DomainError("distortion budget must be nonnegative")
        if self.metric not in METRICS:
            raise DomainError(f"metric must be one of {METRICS}")
        if self.metric == "sibson" and not self.alpha > 1:
            raise DomainError("Sibson order must exceed 1")
        if self.privatizer not in PRIVATIZERS:
            raise DomainError(f"privatizer must be one of {PRIVATIZERS}")
        if self.rho_schedule not in RHO_SCHEDULES:
            raise DomainError(f"rho_schedule must be one of {RHO_SCHEDULES}")
        if not self.learning_rate > 0:
            raise DomainError("learning rate must be positive")


def rho(t: int, total: int, schedule: str = "linear10") -> float:
    """Penalty weight at iteration ``t`` of ``total``: 1 at the start, 11 at the end."""
    slope = 10.0 if schedule == "linear10" else 1000.0
    return slope * t / total + 1.0


# ---------------------------------------------------------------------------
# losses and distortion
# ---------------------------------------------------------------------------


def adversary_loss(posteriors, labels):
    """Mean cross-entropy over the minibatch (and latent draws, if present)."""
    q = np.asarray(posteriors, dtype=float)
    lab = np.asarray(labels)
    if q.ndim == 3:
        lab = lab[:, None]
    return nn_engine.mean_cross_entropy(q, lab)[0]


def distortion_l2(x, x_hat):
    x, x_hat = np.asarray(x, dtype=float), np.asarray(x_hat, dtype=float)
    if x.shape != x_hat.shape:
        raise DomainError("x and x_hat must have equal dimension")
    diff = x - x_hat
    return np.sum(diff * diff, axis=-1)


def distortion_affine(params, p_tilde, noisy=False):
    """``(1-p) beta0^2 + p beta1^2`` plus ``gamma^2`` for the noisy variant."""
    params = np.asarray(params, dtype=float)
    if np.any(params < 0):
        raise DomainError("affine parameters must be nonnegative")
    value = (1.0 - p_tilde) * params[0] ** 2 + p_tilde * params[1] ** 2
    if noisy:
        value += params[2] ** 2
    return float(value)


def _leakage(metric, posteriors, prior, alpha):
    if metric == "sibson":
        return estimators.empirical_sibson_mi_grad(posteriors, prior, alpha)
    return estimators.empirical_mi_grad(posteriors, prior)


def privatizer_loss(posteriors, prior, alpha, distortions, d_budget, rho_t, metric="sibson"):
    """Leakage estimate plus ``rho_t * max(0, mean distortion - D)``."""
    if rho_t < 0:
        raise DomainError("penalty weight must be nonnegative")
    if metric == "sibson":
        leak = estimators.empirical_sibson_mi(posteriors, prior, alpha)
    else:
        leak = estimators.empirical_mi(posteriors, prior)
    excess = float(np.mean(distortions)) - d_budget
    return leak + rho_t * max(0.0, excess)


# ---------------------------------------------------------------------------
# privatizers
# ---------------------------------------------------------------------------


class AffinePrivatizer:
    """Class-dependent shift ``Z = X + (1-C) beta0 - C beta1`` (plus ``gamma * N``)."""

    def __init__(self, noisy: bool, p_tilde: float, params=None):
        self.noisy = noisy
        self.kind = "noisy_affine" if noisy else "affine"
        self.p_tilde = p_tilde
        size = 3 if noisy else 2
        self.theta = np.zeros(size) if params is None else np.asarray(params, dtype=float).copy()

    def params(self):
        return [self.theta]

    def set_params(self, params):
        # nonnegativity by clamping after every update
        self.theta = np.maximum(params[0], 0.0)

    def release(self, x, c, rng, s):
        b0, b1 = self.theta[0], self.theta[1]
        shift = np.where(c == 0, b0, -b1)[:, None, None]
        z = x[:, None, :] + shift
        eps = None
        if self.noisy:
            eps = rng.standard_normal(z.shape)
            z = z + self.theta[2] * eps
        return z, (c, eps)

    def release_grad(self, cache, g_z):
        c, eps = cache
        per_input = g_z.sum(axis=(1, 2))
        g = np.zeros_like(self.theta)
        g[0] = per_input[c == 0].sum()
        g[1] = -per_input[c == 1].sum()
        if self.noisy:
            g[2] = np.sum(g_z * eps)
        return [g]

    def distortion(self, x, c, z, cache):
        """Closed-form expected distortion and its parameter gradient."""
        p = self.p_tilde
        value = distortion_affine(self.theta, p, self.noisy)
        g = np.zeros_like(self.theta)
        g[0] = 2.0 * (1.0 - p) * self.theta[0]
        g[1] = 2.0 * p * self.theta[1]
        if self.noisy:
            g[2] = 2.0 * self.theta[2]
        return value, [g]

    def decoder_step(self, x, z):
        pass

    def eval_distortion(self, x, c, z):
        return distortion_affine(self.theta, self.p_tilde, self.noisy)


class MLPPrivatizer:
    """Gaussian encoder of ``(x, onehot(c))`` with a reconstruction decoder.

    The encoder outputs the mean and log-std of ``Z``.  Distortion is the
    squared error between ``x`` and the decoder's reconstruction from the
    average of the ``S`` latent draws.  The decoder is refit to that squared
    error at every privatizer step, so distortion always refers to the best
    reconstruction the current release allows.
    """

    kind = "mlp"

    def __init__(self, in_dim, n_classes, latent_dim, hidden, rng, lr, dropout=0.0, per_feature=False):
        self.in_dim, self.n_classes, self.latent_dim = in_dim, n_classes, latent_dim
        self.per_feature = per_feature
        sizes = (in_dim + n_classes, *hidden, 2 * latent_dim)
        acts = ["relu"] * len(hidden) + ["identity"]
        drop = [dropout] * len(hidden) + [0.0]
        self.encoder = nn_engine.init_dense(sizes, acts, rng, drop)
        # With a skip connection the encoder starts as the identity release,
        # like the affine privatizers at zero shift.
        self.residual = latent_dim == in_dim
        if self.residual:
            last = self.encoder.layers[-1]
            last.weight[:] = 0.0
            last.bias[latent_dim:] = LOG_SIGMA_INIT
        dec_sizes = (latent_dim, *hidden, in_dim)
        self.decoder = nn_engine.init_dense(dec_sizes, acts, rng, drop)
        self.decoder_opt = nn_engine.adam_init(self.decoder.params(), lr)
        self._rng = rng

    def params(self):
        return self.encoder.params()

    def set_params(self, params):
        self.encoder = self.encoder.with_params(params)

    def _inputs(self, x, c):
        return np.concatenate([x, np.eye(self.n_classes)[c]], axis=1)

    def release(self, x, c, rng, s, train=True):
        out, enc_cache = nn_engine.forward_cache(self.encoder, self._inputs(x, c), rng if train else None)
        mu, log_sigma = out[:, : self.latent_dim], out[:, self.latent_dim :]
        if self.residual:
            mu = mu + x
        eps = rng.standard_normal((x.shape[0], s, self.latent_dim))
        head = nn_engine.GaussianHead(mu[:, None, :], log_sigma[:, None, :])
        z = nn_engine.reparam_sample(head, eps)
        return z, (enc_cache, eps, head.sigma)

    def release_grad(self, cache, g_z):
        enc_cache, eps, sigma = cache
        g_mu = g_z.sum(axis=1)
        g_ls = (g_z * sigma * eps).sum(axis=1)
        grads, _ = nn_engine.backward(self.encoder, enc_cache, np.concatenate([g_mu, g_ls], axis=1))
        return grads

    def _scale(self):
        return self.in_dim if self.per_feature else 1.0

    def distortion(self, x, c, z, cache):
        z_bar = z.mean(axis=1)
        x_hat, dec_cache = nn_engine.forward_cache(self.decoder, z_bar)
        n = x.shape[0]
        value = float(distortion_l2(x, x_hat).mean()) / self._scale()
        g_xhat = 2.0 * (x_hat - x) / (n * self._scale())
        _, g_zbar = nn_engine.backward(self.decoder, dec_cache, g_xhat)
        g_z = np.repeat(g_zbar[:, None, :] / z.shape[1], z.shape[1], axis=1)
        return value, self.release_grad(cache, g_z)

    def decoder_step(self, x, z):
        z_bar = z.mean(axis=1)
        x_hat, dec_cache = nn_engine.forward_cache(self.decoder, z_bar, self._rng)
        g = 2.0 * (x_hat - x) / (x.shape[0] * self._scale())
        grads, _ = nn_engine.backward(self.decoder, dec_cache, g)
        params, self.decoder_opt = nn_engine.adam_step(self.decoder_opt, self.decoder.params(), grads)
        self.decoder = self.decoder.with_params(params)

    def eval_distortion(self, x, c, z):
        x_hat = nn_engine.forward(self.decoder, z.mean(axis=1))
        return float(distortion_l2(x, x_hat).mean()) / self._scale()


def make_privatizer(config: TrainingConfig, in_dim, n_classes, p_tilde, rng):
    if config.privatizer in ("affine", "noisy_affine"):
        if n_classes != 2:
            raise DomainError("affine privatizers need a binary label")
        return AffinePrivatizer(config.privatizer == "noisy_affine", p_tilde)
    latent = config.latent_dim or in_dim
    return MLPPrivatizer(
        in_dim, n_classes, latent, config.privatizer_hidden, rng, config.learning_rate,
        config.dropout, config.distortion_per_feature,
    )


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


@dataclass
class TraceRow:
    epoch: int
    adversary_loss: float
    privatizer_loss: float
    mean_distortion: float
    adversary_accuracy: float
    rho: float


@dataclass
class TrainedPair:
    privatizer: object
    adversary: nn_engine.DenseNet
    trace: List[TraceRow] = field(default_factory=list)
    adversary_updates: int = 0
    privatizer_updates: int = 0
    config: Optional[TrainingConfig] = None

    def write_trace(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for row in self.trace:
                w.writerow([row.epoch] + [repr(float(getattr(row, k))) for k in TRACE_COLUMNS[1:]])


def _posteriors(adversary, z, rng=None):
    return nn_engine.forward_cache(adversary, z, rng)


def _finite(value, what, pair):
    if not math.isfinite(value):
        raise TrainingDiverged(f"{what} became non-finite ({value})", partial=pair)


def alternating_train(config: TrainingConfig, train: Dataset, validation: Optional[Dataset] = None) -> TrainedPair:
    """Train a privatizer against an adversary; deterministic given ``config.seed``."""
    n = len(train)
    if n == 0:
        raise DomainError("training set is empty")
    rng = np.random.default_rng(config.seed)
    x_all, c_all = train.features, train.labels
    prior = train.label_frequencies()
    if np.any(prior == 0):
        raise DomainError("every class must appear in the training set")
    d_in, g = x_all.shape[1], train.n_classes
    privatizer = make_privatizer(config, d_in, g, float(prior[0]), rng)
    latent = d_in if config.privatizer != "mlp" else privatizer.latent_dim
    adv_sizes = (latent, *config.adversary_hidden, g)
    adversary = nn_engine.init_dense(
        adv_sizes, ["relu"] * len(config.adversary_hidden) + ["softmax"], rng,
        [config.dropout] * len(config.adversary_hidden) + [0.0],
    )
    adv_opt = nn_engine.adam_init(adversary.params(), config.learning_rate)
    priv_lr = config.privatizer_learning_rate or config.learning_rate
    priv_opt = nn_engine.adam_init(privatizer.params(), priv_lr)
    pair = TrainedPair(privatizer, adversary, config=config)

    per_epoch = -(-n // config.batch_size)
    total = config.epochs * per_epoch
    m, s, t = config.batch_size, config.samples_s, 0
    for epoch in range(config.epochs):
        adv_losses, priv_losses, dists = [], [], []
        epoch_seed = np.random.SeedSequence([config.seed, epoch])
        for block in minibatches(n, m, epoch_seed):
            t += 1
            rho_t = rho(t, total, config.rho_schedule)
            # adversary: k steps, privatizer frozen
            for _ in range(config.adversary_steps_k):
                idx = rng.integers(0, n, size=min(m, n))
                z, _ = privatizer.release(x_all[idx], c_all[idx], rng, s)
                q, cache = _posteriors(pair.adversary, z, rng)
                loss, g_q = nn_engine.mean_cross_entropy(q, c_all[idx][:, None])
                _finite(loss, "adversary loss", pair)
                grads, _ = nn_engine.backward(pair.adversary, cache, g_q)
                params, adv_opt = nn_engine.adam_step(adv_opt, pair.adversary.params(), grads)
                pair.adversary = pair.adversary.with_params(params)
                pair.adversary_updates += 1
            adv_losses.append(loss)
            # privatizer: one step, adversary frozen
            xb, cb = x_all[block], c_all[block]
            z, rel_cache = privatizer.release(xb, cb, rng, s)
            q, adv_cache = _posteriors(pair.adversary, z)
            leak, g_q = _leakage(config.metric, q, prior, config.alpha)
            _, g_z = nn_engine.backward(pair.adversary, adv_cache, g_q)
            grads = privatizer.release_grad(rel_cache, g_z)
            dist, d_grads = privatizer.distortion(xb, cb, z, rel_cache)
            excess = dist - config.d_budget
            total_loss = leak + rho_t * max(0.0, excess)
            _finite(total_loss, "privatizer loss", pair)
            if excess > 0:
                grads = [a + rho_t * b for a, b in zip(grads, d_grads)]
            params, priv_opt = nn_engine.adam_step(priv_opt, privatizer.params(), grads)
            privatizer.set_params(params)
            privatizer.decoder_step(xb, z)
            pair.privatizer_updates += 1
            priv_losses.append(total_loss)
            dists.append(dist)
        if validation is not None and len(validation):
            acc, _ = evaluate_adversary(pair.adversary, privatizer, validation, s, seed=config.seed)
        else:
            acc, _ = evaluate_adversary(pair.adversary, privatizer, train, s, seed=config.seed)
        pair.trace.append(
            TraceRow(epoch + 1, float(np.mean(adv_losses)), float(np.mean(priv_losses)),
                     float(np.mean(dists)), acc, rho_t)
        )
    return pair


def evaluate_adversary(adversary, privatizer, dataset: Dataset, samples_s: int = 12, seed=0):
    """Accuracy of the adversary's S-averaged posterior argmax, and mean distortion."""
    rng = np.random.default_rng(seed)
    x, c = dataset.features, dataset.labels
    if len(dataset) == 0:
        raise DomainError("evaluation set is empty")
    if privatizer is None:
        z = np.repeat(x[:, None, :], samples_s, axis=1)
        dist = 0.0
    else:
        kw = {"train": False} if isinstance(privatizer, MLPPrivatizer) else {}
        z, _ = privatizer.release(x, c, rng, samples_s, **kw)
        dist = privatizer.eval_distortion(x, c, z)
    q = nn_engine.forward(adversary, z) if not callable(adversary) else adversary(z)
    guess = np.argmax(q.mean(axis=1), axis=-1)
    return float(np.mean(guess == c)), float(dist)
