"""Trainers that produce the small models the estimators are evaluated on.

RBMs train by contrastive divergence (CD-k), persistent contrastive
divergence (PCD), or an exact-gradient ascent that enumerates the model
expectation and therefore works only on small models (it is the test oracle
and the recommended way to build controlled-quality model ladders).
Mixtures fit by expectation-maximization with one shared isotropic standard
deviation. Training exists to produce evaluation subjects, not to chase
state-of-the-art likelihoods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .errors import NumericalError, ValidationError
from .models import (
    GmmModel,
    RbmModel,
    _iter_binary_chunks,
    _require,
    as_binary_matrix,
    exact_log_z,
    hidden_free_energy_many,
)
from .rng import check_seed, stream

ALGORITHMS = ("cd", "pcd", "exact-gradient")


@dataclass(frozen=True)
class TrainConfig:
    """RBM training settings."""

    algorithm: str = "cd"
    k: int = 1
    learning_rate: float = 0.05
    n_epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    weight_init_scale: float = 0.01

    def __post_init__(self):
        _require(self.algorithm in ALGORITHMS,
                 f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        _require(int(self.k) >= 1, "k must be a positive integer")
        _require(float(self.learning_rate) > 0, "learning_rate must be positive")
        _require(int(self.n_epochs) >= 1, "n_epochs must be a positive integer")
        _require(int(self.batch_size) >= 1, "batch_size must be a positive integer")
        _require(float(self.weight_init_scale) >= 0, "weight_init_scale must be nonnegative")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "learning_rate", float(self.learning_rate))
        object.__setattr__(self, "n_epochs", int(self.n_epochs))
        object.__setattr__(self, "batch_size", int(self.batch_size))
        object.__setattr__(self, "seed", check_seed(self.seed))
        object.__setattr__(self, "weight_init_scale", float(self.weight_init_scale))

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "k": self.k,
            "learning_rate": self.learning_rate,
            "n_epochs": self.n_epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "weight_init_scale": self.weight_init_scale,
        }


def init_rbm(n_visible: int, n_hidden: int, seed: int = 0, scale: float = 0.01) -> RbmModel:
    """Fresh RBM: weights i.i.d. uniform in [-scale, scale], biases zero."""
    _require(int(n_visible) >= 1 and int(n_hidden) >= 1, "layer sizes must be positive")
    _require(float(scale) >= 0, "scale must be nonnegative")
    rng = stream(check_seed(seed), 5)
    weights = rng.uniform(-scale, scale, size=(int(n_visible), int(n_hidden)))
    return RbmModel(
        weights=weights,
        bias_visible=np.zeros(int(n_visible)),
        bias_hidden=np.zeros(int(n_hidden)),
    )


def exact_log_likelihood_grad(model: RbmModel, data):
    """Gradient of mean log-likelihood: data expectations minus exact model expectations.

    The model expectation enumerates the hidden layer, so this requires a
    tractable model. Returns ``(d_weights, d_bias_visible, d_bias_hidden)``.
    """
    xs = as_binary_matrix(data, model.n_visible, "data")
    _require(xs.shape[0] >= 1, "data is empty")
    w, bv, bh = model.weights, model.bias_visible, model.bias_hidden
    n = xs.shape[0]

    ph = expit(xs @ w + bh)
    pos_w = xs.T @ ph / n
    pos_bv = xs.mean(axis=0)
    pos_bh = ph.mean(axis=0)

    log_z = exact_log_z(model)
    neg_w = np.zeros_like(w)
    neg_bv = np.zeros_like(bv)
    neg_bh = np.zeros_like(bh)
    for block in _iter_binary_chunks(model.n_hidden):
        p = np.exp(-hidden_free_energy_many(model, block) - log_z)
        pv = expit(block @ w.T + bv)
        neg_w += pv.T @ (block * p[:, None])
        neg_bv += p @ pv
        neg_bh += p @ block
    return pos_w - neg_w, pos_bv - neg_bv, pos_bh - neg_bh


def _check_finite(w, bv, bh):
    if not (np.isfinite(w).all() and np.isfinite(bv).all() and np.isfinite(bh).all()):
        raise NumericalError("training produced nonfinite parameters")


def train_rbm(model: RbmModel, data, config: TrainConfig) -> RbmModel:
    """Train an RBM and return the updated (new, immutable) model.

    CD-k restarts its negative chains at each data batch; PCD keeps one
    persistent fantasy chain per batch slot. The exact-gradient algorithm
    performs full-batch ascent on the exact mean log-likelihood (batch_size
    is ignored), which is deterministic and monotone for small step sizes.
    """
    xs = as_binary_matrix(data, model.n_visible, "data")
    _require(xs.shape[0] >= 1, "data is empty")
    w = model.weights.copy()
    bv = model.bias_visible.copy()
    bh = model.bias_hidden.copy()
    lr = config.learning_rate

    if config.algorithm == "exact-gradient":
        current = model
        for _ in range(config.n_epochs):
            dw, dbv, dbh = exact_log_likelihood_grad(current, xs)
            w = current.weights + lr * dw
            bv = current.bias_visible + lr * dbv
            bh = current.bias_hidden + lr * dbh
            _check_finite(w, bv, bh)
            current = RbmModel(weights=w, bias_visible=bv, bias_hidden=bh)
        return current

    rng = stream(config.seed, 6)
    n = xs.shape[0]
    nv, nh = model.n_visible, model.n_hidden
    fantasy = None
    if config.algorithm == "pcd":
        fantasy = (rng.random((config.batch_size, nv)) < 0.5).astype(np.float64)

    for _ in range(config.n_epochs):
        order = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            batch = xs[order[lo : lo + config.batch_size]]
            m = batch.shape[0]
            ph_pos = expit(batch @ w + bh)

            v_neg = batch if config.algorithm == "cd" else fantasy[:m]
            for _step in range(config.k):
                h_neg = (rng.random((v_neg.shape[0], nh)) < expit(v_neg @ w + bh)).astype(np.float64)
                v_neg = (rng.random((v_neg.shape[0], nv)) < expit(h_neg @ w.T + bv)).astype(np.float64)
            if config.algorithm == "pcd":
                fantasy[:m] = v_neg
            ph_neg = expit(v_neg @ w + bh)

            w = w + lr * (batch.T @ ph_pos - v_neg.T @ ph_neg) / m
            bv = bv + lr * (batch.mean(axis=0) - v_neg.mean(axis=0))
            bh = bh + lr * (ph_pos.mean(axis=0) - ph_neg.mean(axis=0))
            _check_finite(w, bv, bh)
    return RbmModel(weights=w, bias_visible=bv, bias_hidden=bh)


def _em_update(xs, log_w, means, sigma):
    """One E+M sweep; returns (log_w, means, sigma, loglik before the update)."""
    n, dim = xs.shape
    sq_norm = (xs * xs).sum(axis=1)
    sq = sq_norm[:, None] - 2.0 * xs @ means.T + (means * means).sum(axis=1)[None, :]
    log_cond = -0.5 * sq / sigma**2 - 0.5 * dim * (math.log(2 * math.pi) + 2 * math.log(sigma))
    joint = log_w[None, :] + log_cond
    norm = logsumexp(joint, axis=1)
    ll = float(norm.mean())

    resp = np.exp(joint - norm[:, None])
    counts = resp.sum(axis=0)
    if bool((counts < 1e-10).any()):
        raise NumericalError("component collapse: a component lost all responsibility")
    means = (resp.T @ xs) / counts[:, None]
    sq = sq_norm[:, None] - 2.0 * xs @ means.T + (means * means).sum(axis=1)[None, :]
    var = float((resp * sq).sum() / (n * dim))
    if var <= 1e-12:
        raise NumericalError("component collapse: shared variance vanished")
    return np.log(counts / n), means, math.sqrt(var), ll


def gmm_em_step(model: GmmModel, data) -> GmmModel:
    """One EM iteration from the given mixture parameters."""
    xs = np.asarray(data, dtype=np.float64)
    if xs.ndim == 1:
        xs = xs[:, None]
    _require(xs.shape[1] == model.dim, "data dimension does not match the mixture")
    log_w, means, sigma, _ = _em_update(xs, model.log_weights, model.means, model.sigma)
    return GmmModel(log_weights=log_w - logsumexp(log_w), means=means, sigma=sigma)


def fit_gmm(data, n_components: int, seed: int = 0, n_iters: int = 100) -> GmmModel:
    """Maximum-likelihood mixture fit by EM with a shared isotropic sigma.

    Means initialize at distinct random data points; the log-likelihood is
    checked to be nondecreasing (within 1e-8) every iteration. A vanishing
    shared variance or an emptied component raises a "component collapse"
    error instead of returning a degenerate model.
    """
    xs = np.asarray(data, dtype=np.float64)
    if xs.ndim == 1:
        xs = xs[:, None]
    _require(xs.ndim == 2 and xs.shape[0] >= 1, "data must be a nonempty (n, dim) matrix")
    _require(bool(np.isfinite(xs).all()), "data contains nonfinite values")
    k = int(n_components)
    _require(k >= 1, "n_components must be positive")
    _require(xs.shape[0] >= k, f"need at least {k} data points to fit {k} components")
    _require(int(n_iters) >= 1, "n_iters must be positive")

    n, _ = xs.shape
    rng = stream(check_seed(seed), 7)
    means = xs[rng.choice(n, size=k, replace=False)].copy()
    log_w = np.full(k, -math.log(k))
    var = float(xs.var(axis=0).mean())
    if var <= 1e-12:
        raise NumericalError("component collapse: data has vanishing variance")
    sigma = math.sqrt(var)

    prev_ll = -np.inf
    for _ in range(int(n_iters)):
        log_w, means, sigma, ll = _em_update(xs, log_w, means, sigma)
        if ll < prev_ll - 1e-8:
            raise NumericalError("EM log-likelihood decreased beyond tolerance")
        prev_ll = ll

    log_w = log_w - logsumexp(log_w)
    return GmmModel(log_weights=log_w, means=means, sigma=sigma)
