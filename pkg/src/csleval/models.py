"""Latent-conditional generative models and exact small-model oracles.

A model is usable by the sampling-based likelihood estimators when it
exposes the conditional ``log P(x | h)`` of an observation given one latent
state plus a way of drawing latent states (block Gibbs for the RBM,
ancestral draws for the mixture). Two concrete families live here, each
with enumeration oracles that make the estimators testable against ground
truth on small instances.

Conventions: observed vectors are 1-D float arrays and binary data uses 0/1
entries. RBM latent states are 0/1 vectors of length ``n_hidden``; mixture
latent states are integer component indices. All probability arithmetic is
done in the log domain; Bernoulli log-probabilities are computed from
logits through softplus identities, never by taking ``log`` of a sigmoid,
so finite parameters can never underflow to ``-inf``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .errors import IntractableModelError, ValidationError

# 2^25 enumerated configurations keep the exact oracles under a minute.
ENUMERATION_LIMIT = 25

_ENUM_CHUNK = 1 << 16
_LOG_2PI = math.log(2.0 * math.pi)


def _softplus(x):
    return np.logaddexp(0.0, x)


def _frozen_array(a, dtype=np.float64):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValidationError(msg)


def as_binary_vector(x, length: int, name: str = "x") -> np.ndarray:
    """Validate a 0/1 vector of the given length and return it as float64."""
    v = np.asarray(x, dtype=np.float64)
    _require(
        v.ndim == 1 and v.shape[0] == length,
        f"{name} must be a vector of length {length}, got shape {v.shape}",
    )
    _require(bool(((v == 0.0) | (v == 1.0)).all()), f"{name} must contain only 0/1 entries")
    return v


def as_binary_matrix(x, dim: int, name: str = "x") -> np.ndarray:
    """Validate an (n, dim) matrix of 0/1 rows and return it as float64."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim == 1:
        m = m[None, :]
    _require(
        m.ndim == 2 and m.shape[1] == dim,
        f"{name} must be an (n, {dim}) matrix, got shape {np.asarray(x).shape}",
    )
    _require(bool(((m == 0.0) | (m == 1.0)).all()), f"{name} must contain only 0/1 entries")
    return m


def as_real_matrix(x, dim: int, name: str = "x") -> np.ndarray:
    """Validate an (n, dim) matrix of finite reals and return it as float64."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim == 1:
        m = m[None, :]
    _require(
        m.ndim == 2 and m.shape[1] == dim,
        f"{name} must be an (n, {dim}) matrix, got shape {np.asarray(x).shape}",
    )
    _require(bool(np.isfinite(m).all()), f"{name} contains nonfinite values")
    return m


@dataclass(frozen=True)
class RbmModel:
    """Bernoulli-Bernoulli restricted Boltzmann machine.

    Parameters are a visible-by-hidden weight matrix and two bias vectors;
    the joint energy of a configuration is ``-v@W@h - bv@v - bh@h``.
    Instances are immutable: arrays are copied at construction and marked
    read-only, so a model may be shared freely across threads.
    """

    weights: np.ndarray
    bias_visible: np.ndarray
    bias_hidden: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        _require(w.ndim == 2 and w.shape[0] >= 1 and w.shape[1] >= 1,
                 f"weights must be a (n_visible, n_hidden) matrix, got shape {w.shape}")
        bv = np.asarray(self.bias_visible, dtype=np.float64)
        bh = np.asarray(self.bias_hidden, dtype=np.float64)
        _require(bv.shape == (w.shape[0],),
                 f"bias_visible must have length {w.shape[0]}, got shape {bv.shape}")
        _require(bh.shape == (w.shape[1],),
                 f"bias_hidden must have length {w.shape[1]}, got shape {bh.shape}")
        for name, a in (("weights", w), ("bias_visible", bv), ("bias_hidden", bh)):
            _require(bool(np.isfinite(a).all()), f"{name} contains nonfinite values")
        object.__setattr__(self, "weights", _frozen_array(w))
        object.__setattr__(self, "bias_visible", _frozen_array(bv))
        object.__setattr__(self, "bias_hidden", _frozen_array(bh))

    @property
    def n_visible(self) -> int:
        return self.weights.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class GmmModel:
    """Mixture of isotropic Gaussians with one shared standard deviation.

    The latent state is the component index and the conditional ``P(x|k)``
    is ``N(means[k], sigma^2 I)``, so ``sigma`` doubles as the natural kernel
    width when the mixture is evaluated by latent-sample estimators.
    ``log_weights`` must be normalized (logsumexp equal to 0 within 1e-10).
    """

    log_weights: np.ndarray
    means: np.ndarray
    sigma: float

    def __post_init__(self):
        lw = np.asarray(self.log_weights, dtype=np.float64)
        mu = np.asarray(self.means, dtype=np.float64)
        _require(lw.ndim == 1 and lw.shape[0] >= 1,
                 f"log_weights must be a nonempty vector, got shape {lw.shape}")
        _require(mu.ndim == 2 and mu.shape[0] == lw.shape[0],
                 f"means must be a ({lw.shape[0]}, dim) matrix, got shape {mu.shape}")
        _require(bool(np.isfinite(lw).all()), "log_weights contains nonfinite values")
        _require(bool(np.isfinite(mu).all()), "means contains nonfinite values")
        _require(abs(float(logsumexp(lw))) <= 1e-10,
                 "log_weights must be normalized (logsumexp within 1e-10 of 0)")
        sigma = float(self.sigma)
        _require(math.isfinite(sigma) and sigma > 0.0, "sigma must be a positive real")
        object.__setattr__(self, "log_weights", _frozen_array(lw))
        object.__setattr__(self, "means", _frozen_array(mu))
        object.__setattr__(self, "sigma", sigma)

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def gmm_from_weights(weights, means, sigma) -> GmmModel:
    """Build a GmmModel from unnormalized positive weights."""
    w = np.asarray(weights, dtype=np.float64)
    _require(bool((w > 0).all()), "weights must be strictly positive")
    lw = np.log(w) - math.log(w.sum())
    lw = lw - logsumexp(lw)
    return GmmModel(log_weights=lw, means=means, sigma=sigma)


# ---------------------------------------------------------------------------
# RBM energies and conditionals


def rbm_energy(model: RbmModel, v, h) -> float:
    """Joint energy ``-v@W@h - bv@v - bh@h`` of a visible/hidden configuration."""
    v = as_binary_vector(v, model.n_visible, "v")
    h = as_binary_vector(h, model.n_hidden, "h")
    return float(-(v @ model.weights @ h) - model.bias_visible @ v - model.bias_hidden @ h)


def cond_mean_h_given_x(model: RbmModel, x) -> np.ndarray:
    """Hidden activation probabilities ``sigmoid(W.T x + bias_hidden)``."""
    x = as_binary_vector(x, model.n_visible, "x")
    return expit(model.weights.T @ x + model.bias_hidden)


def cond_mean_x_given_h(model: RbmModel, h) -> np.ndarray:
    """Visible activation probabilities ``sigmoid(W h + bias_visible)``."""
    h = as_binary_vector(h, model.n_hidden, "h")
    return expit(model.weights @ h + model.bias_visible)


def free_energy_many(model: RbmModel, xs) -> np.ndarray:
    """Visible free energies, hidden units analytically summed out.

    ``F(x) = -bv@x - sum_j softplus((W.T x + bh)_j)`` and the unnormalized
    log marginal of ``x`` is ``-F(x)``.
    """
    xs = as_binary_matrix(xs, model.n_visible, "xs")
    return -(xs @ model.bias_visible) - _softplus(xs @ model.weights + model.bias_hidden).sum(axis=1)


def free_energy(model: RbmModel, x) -> float:
    """Free energy of a single visible configuration."""
    return float(free_energy_many(model, np.asarray(x, dtype=np.float64)[None, :])[0])


def hidden_free_energy_many(model: RbmModel, hs) -> np.ndarray:
    """Hidden-side free energies, visible units analytically summed out."""
    hs = as_binary_matrix(hs, model.n_hidden, "hs")
    return -(hs @ model.bias_hidden) - _softplus(hs @ model.weights.T + model.bias_visible).sum(axis=1)


def hidden_free_energy(model: RbmModel, h) -> float:
    return float(hidden_free_energy_many(model, np.asarray(h, dtype=np.float64)[None, :])[0])


# ---------------------------------------------------------------------------
# Conditional log-likelihood of observations given latent states


def log_p_x_given_h(model, x, h) -> float:
    """Log conditional probability (RBM) or density (mixture) of ``x`` given one latent state.

    For the RBM, ``h`` is a 0/1 hidden vector and each visible unit is an
    independent Bernoulli with logit ``(W h + bias_visible)_i``. For the
    mixture, ``h`` is a component index and the conditional is the isotropic
    Gaussian at that component's mean.
    """
    if isinstance(model, RbmModel):
        x = as_binary_vector(x, model.n_visible, "x")
        h = as_binary_vector(h, model.n_hidden, "h")
        a = model.weights @ h + model.bias_visible
        return float(-(x @ _softplus(-a)) - ((1.0 - x) @ _softplus(a)))
    if isinstance(model, GmmModel):
        x = np.asarray(x, dtype=np.float64)
        _require(x.shape == (model.dim,), f"x must have shape ({model.dim},), got {x.shape}")
        k = int(h)
        _require(0 <= k < model.n_components,
                 f"component index {k} out of range [0, {model.n_components})")
        diff = x - model.means[k]
        var = model.sigma**2
        return float(-0.5 * (diff @ diff) / var - 0.5 * model.dim * (_LOG_2PI + 2.0 * math.log(model.sigma)))
    raise ValidationError(f"unsupported model type {type(model).__name__}")


def log_p_x_given_h_many(model, xs, latents) -> np.ndarray:
    """Matrix of ``log P(x_i | h_s)`` with shape ``(len(xs), len(latents))``.

    The workhorse behind the latent-sample estimators; it is exact (not an
    approximation) and vectorized over both test points and latent states.
    """
    if isinstance(model, RbmModel):
        xs = as_binary_matrix(xs, model.n_visible, "xs")
        hs = as_binary_matrix(latents, model.n_hidden, "latents")
        logits = hs @ model.weights.T + model.bias_visible  # (S, n_visible)
        lp_one = -_softplus(-logits)
        lp_zero = -_softplus(logits)
        return xs @ (lp_one - lp_zero).T + lp_zero.sum(axis=1)[None, :]
    if isinstance(model, GmmModel):
        xs = as_real_matrix(xs, model.dim, "xs")
        ks = np.asarray(latents)
        _require(ks.ndim == 1, "latents must be a vector of component indices")
        _require(bool(np.isin(ks, np.arange(model.n_components)).all()),
                 "latents contains out-of-range component indices")
        mu = model.means[ks.astype(np.int64)]  # (S, dim)
        sq = (
            (xs * xs).sum(axis=1)[:, None]
            - 2.0 * (xs @ mu.T)
            + (mu * mu).sum(axis=1)[None, :]
        )
        var = model.sigma**2
        return -0.5 * sq / var - 0.5 * model.dim * (_LOG_2PI + 2.0 * math.log(model.sigma))
    raise ValidationError(f"unsupported model type {type(model).__name__}")


# ---------------------------------------------------------------------------
# Exact oracles by enumeration


def _iter_binary_chunks(n_bits: int, chunk: int = _ENUM_CHUNK):
    """Yield (m, n_bits) float blocks covering all 2^n_bits configurations.

    Enumeration order is fixed: configuration ``i`` has bit ``j`` equal to
    ``(i >> j) & 1``.
    """
    total = 1 << n_bits
    shifts = np.arange(n_bits, dtype=np.uint64)
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(lo + chunk, total), dtype=np.uint64)
        yield ((idx[:, None] >> shifts) & np.uint64(1)).astype(np.float64)


def _logsumexp_stream(pairs):
    """Combine per-chunk (max, sumexp) pairs into one logsumexp value."""
    maxes = np.array([m for m, _ in pairs])
    sums = np.array([s for _, s in pairs])
    m = maxes.max()
    return float(m + np.log((np.exp(maxes - m) * sums).sum()))


def exact_log_z(model: RbmModel) -> float:
    """Exact RBM log partition function by enumerating the smaller layer.

    Requires ``min(n_visible, n_hidden) <= ENUMERATION_LIMIT``; the other
    layer is marginalized analytically, so the cost is ``2^min(...)`` rows.
    """
    _require(isinstance(model, RbmModel), "exact_log_z is defined for RBM models")
    n_enum = min(model.n_visible, model.n_hidden)
    if n_enum > ENUMERATION_LIMIT:
        raise IntractableModelError(
            f"intractable: both layers exceed {ENUMERATION_LIMIT} units "
            f"({model.n_visible} visible, {model.n_hidden} hidden)"
        )
    over_hidden = model.n_hidden <= model.n_visible
    pairs = []
    for block in _iter_binary_chunks(n_enum):
        if over_hidden:
            terms = -hidden_free_energy_many(model, block)
        else:
            terms = -free_energy_many(model, block)
        m = float(terms.max())
        pairs.append((m, float(np.exp(terms - m).sum())))
    return _logsumexp_stream(pairs)


def hidden_log_prob_many(model: RbmModel, hs, log_z: float | None = None) -> np.ndarray:
    """Exact marginal log P(h) of hidden configurations."""
    if log_z is None:
        log_z = exact_log_z(model)
    return -hidden_free_energy_many(model, hs) - log_z


def exact_log_likelihood_many(model, xs) -> np.ndarray:
    """Exact log-likelihood of each row of ``xs`` under the model.

    For the RBM this is ``-F(x) - log Z`` and requires a tractable partition
    function; the mixture is always tractable.
    """
    if isinstance(model, RbmModel):
        log_z = exact_log_z(model)
        return free_energy_many(model, xs) * -1.0 - log_z
    if isinstance(model, GmmModel):
        xs = as_real_matrix(xs, model.dim, "xs")
        comp = log_p_x_given_h_many(model, xs, np.arange(model.n_components))
        return logsumexp(comp + model.log_weights[None, :], axis=1)
    raise ValidationError(f"unsupported model type {type(model).__name__}")


def exact_log_likelihood(model, x) -> float:
    """Exact log-likelihood of a single observation."""
    return float(exact_log_likelihood_many(model, np.asarray(x, dtype=np.float64)[None, :])[0])


# ---------------------------------------------------------------------------
# Serialization

_JSON_SIG_DIGITS = ".17g"  # 17 significant digits round-trip binary64 exactly


def _num17(v) -> str:
    return format(float(v), _JSON_SIG_DIGITS)


def _vec17(a) -> str:
    return "[" + ", ".join(_num17(v) for v in a) + "]"


def _mat17(a) -> str:
    return "[" + ", ".join(_vec17(row) for row in a) + "]"


def model_to_json(model) -> str:
    """Serialize a model to a single JSON document.

    Numbers are written with 17 significant digits so that loading the
    document reproduces the parameters bit for bit.
    """
    if isinstance(model, RbmModel):
        return (
            '{"type": "rbm"'
            f', "n_visible": {model.n_visible}'
            f', "n_hidden": {model.n_hidden}'
            f', "weights": {_mat17(model.weights)}'
            f', "bias_visible": {_vec17(model.bias_visible)}'
            f', "bias_hidden": {_vec17(model.bias_hidden)}'
            "}"
        )
    if isinstance(model, GmmModel):
        return (
            '{"type": "gmm"'
            f', "n_components": {model.n_components}'
            f', "dim": {model.dim}'
            f', "log_weights": {_vec17(model.log_weights)}'
            f', "means": {_mat17(model.means)}'
            f', "sigma": {_num17(model.sigma)}'
            "}"
        )
    raise ValidationError(f"unsupported model type {type(model).__name__}")


def model_from_json(text: str):
    """Parse a model from its JSON document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid model JSON: {exc}") from exc
    kind = doc.get("type")
    if kind == "rbm":
        model = RbmModel(
            weights=np.array(doc["weights"], dtype=np.float64),
            bias_visible=np.array(doc["bias_visible"], dtype=np.float64),
            bias_hidden=np.array(doc["bias_hidden"], dtype=np.float64),
        )
        _require(model.n_visible == int(doc["n_visible"]) and model.n_hidden == int(doc["n_hidden"]),
                 "model JSON shape fields disagree with parameter arrays")
        return model
    if kind == "gmm":
        model = GmmModel(
            log_weights=np.array(doc["log_weights"], dtype=np.float64),
            means=np.array(doc["means"], dtype=np.float64),
            sigma=float(doc["sigma"]),
        )
        _require(model.n_components == int(doc["n_components"]) and model.dim == int(doc["dim"]),
                 "model JSON shape fields disagree with parameter arrays")
        return model
    raise ValidationError(f"unknown model type {kind!r} in JSON document")


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))
        fh.write("\n")


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_json(fh.read())


def model_summary(model) -> dict:
    """Small JSON-friendly description used in report config snapshots."""
    if isinstance(model, RbmModel):
        return {"type": "rbm", "n_visible": model.n_visible, "n_hidden": model.n_hidden}
    if isinstance(model, GmmModel):
        return {"type": "gmm", "n_components": model.n_components, "dim": model.dim}
    raise ValidationError(f"unsupported model type {type(model).__name__}")
