"""Sample-based log-likelihood estimators and their exact counterparts.

Every estimator returns an :class:`EvalReport` (or a scalar for the
single-point operations) and works entirely in the log domain: the average
of conditional probabilities over a latent sample set is computed as
``logsumexp(log P(x|h')) - log |S|``, which is mathematically identical to
averaging raw probabilities but cannot underflow. The logsumexp reduction
subtracts the running maximum and sums in index order, so estimates are
invariant under permutations of the sample set to within 1e-12.
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
    _softplus,
    as_binary_vector,
    as_real_matrix,
    exact_log_z,
    free_energy_many,
    hidden_free_energy_many,
    log_p_x_given_h_many,
    model_summary,
)
from .sampler import LatentSampleSet
from .rng import check_seed, stream

# Pairwise log-likelihood blocks are chunked to roughly this many entries.
_CHUNK_ENTRIES = 2_000_000


@dataclass(frozen=True)
class EvalReport:
    """Per-test-point estimates plus summary statistics and configuration."""

    estimator_name: str
    per_example_loglik: np.ndarray
    mean_loglik: float
    std_error: float
    config_snapshot: dict
    sample_count_used: int

    def __post_init__(self):
        values = np.array(self.per_example_loglik, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "per_example_loglik", values)


def _make_report(name: str, values: np.ndarray, snapshot: dict, sample_count: int) -> EvalReport:
    values = np.asarray(values, dtype=np.float64)
    if not np.isfinite(values).all():
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise NumericalError(f"{name}: nonfinite log-likelihood for test example {bad}")
    n = values.shape[0]
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EvalReport(
        estimator_name=name,
        per_example_loglik=values,
        mean_loglik=float(values.mean()),
        std_error=se,
        config_snapshot=snapshot,
        sample_count_used=int(sample_count),
    )


def _logmeanexp_chunked(term_fn, n_terms: int, n_rows: int) -> np.ndarray:
    """log of the column-mean of exp(terms), streaming over column chunks.

    ``term_fn(lo, hi)`` must return the (n_rows, hi - lo) block of log
    terms. Per-chunk maxima and sums are combined exactly as a single
    max-subtracted reduction would be, so chunking does not change results
    beyond float rounding.
    """
    chunk = max(1, _CHUNK_ENTRIES // max(1, n_rows))
    maxes, sums = [], []
    for lo in range(0, n_terms, chunk):
        block = term_fn(lo, min(lo + chunk, n_terms))
        m = block.max(axis=1)
        maxes.append(m)
        sums.append(np.exp(block - m[:, None]).sum(axis=1))
    maxes = np.stack(maxes)
    sums = np.stack(sums)
    overall = maxes.max(axis=0)
    total = (np.exp(maxes - overall[None, :]) * sums).sum(axis=0)
    return overall + np.log(total) - math.log(n_terms)


def _check_sample_set(model, sample_set: LatentSampleSet) -> None:
    _require(isinstance(sample_set, LatentSampleSet), "sample_set must be a LatentSampleSet")
    if len(sample_set) == 0:
        raise ValidationError("estimator undefined on empty sample set")
    if isinstance(model, RbmModel):
        _require(sample_set.kind == "binary", "RBM estimators need binary latent samples")
        _require(sample_set.samples.shape[1] == model.n_hidden,
                 "latent sample width does not match the model's hidden layer")
    elif isinstance(model, GmmModel):
        _require(sample_set.kind == "component", "mixture estimators need component-index samples")
        _require(int(sample_set.samples.max()) < model.n_components,
                 "component index out of range for this mixture")
    else:
        raise ValidationError(f"unsupported model type {type(model).__name__}")


def _test_matrix(model, test_set) -> np.ndarray:
    if isinstance(model, RbmModel):
        from .models import as_binary_matrix

        xs = as_binary_matrix(test_set, model.n_visible, "test_set")
    else:
        xs = as_real_matrix(test_set, model.dim, "test_set")
    _require(xs.shape[0] >= 1, "test set is empty")
    return xs


# ---------------------------------------------------------------------------
# Conservative latent-sample estimator


def csl(model, sample_set: LatentSampleSet, test_set) -> EvalReport:
    """Latent-sample log-likelihood estimate of every test point.

    ``per_example[i] = logsumexp_{h' in S} log P(x_i | h') - log |S|``: the
    log of the sample mean of the conditional likelihood, a conservative
    (downward-biased in expectation) estimate of the true log-likelihood
    that becomes exact as the chain grows.
    """
    _check_sample_set(model, sample_set)
    xs = _test_matrix(model, test_set)
    latents = sample_set.samples

    def block(lo, hi):
        return log_p_x_given_h_many(model, xs, latents[lo:hi])

    values = _logmeanexp_chunked(block, len(sample_set), xs.shape[0])
    snapshot = {
        "estimator": "csl",
        "model": model_summary(model),
        "chain": sample_set.provenance.to_dict(),
        "n_test": int(xs.shape[0]),
    }
    return _make_report("csl", values, snapshot, len(sample_set))


def csl_exact_expectation(model, x) -> float:
    """Infinite-sample limit of the latent-sample estimator at one point.

    Computed by exact enumeration of the latent prior:
    ``logsumexp_h [log P(h) + log P(x|h)]``, which must equal the exact
    log-likelihood. Requires an enumerable latent space.
    """
    if isinstance(model, GmmModel):
        xs = as_real_matrix(np.asarray(x, dtype=np.float64)[None, :], model.dim, "x")
        comp = log_p_x_given_h_many(model, xs, np.arange(model.n_components))[0]
        return float(logsumexp(model.log_weights + comp))
    _require(isinstance(model, RbmModel), f"unsupported model type {type(model).__name__}")
    from .models import ENUMERATION_LIMIT, IntractableModelError

    if model.n_hidden > ENUMERATION_LIMIT:
        raise IntractableModelError(
            f"intractable: enumerating 2^{model.n_hidden} latent states exceeds the "
            f"2^{ENUMERATION_LIMIT} limit"
        )
    log_z = exact_log_z(model)
    xs = np.asarray(x, dtype=np.float64)[None, :]
    pairs = []
    for block in _iter_binary_chunks(model.n_hidden):
        terms = (-hidden_free_energy_many(model, block) - log_z) + log_p_x_given_h_many(
            model, xs, block
        )[0]
        m = float(terms.max())
        pairs.append((m, float(np.exp(terms - m).sum())))
    maxes = np.array([m for m, _ in pairs])
    sums = np.array([s for _, s in pairs])
    overall = maxes.max()
    return float(overall + np.log((np.exp(maxes - overall) * sums).sum()))


# ---------------------------------------------------------------------------
# Biased variant for model comparison


# Step counts worth trying first: a single anchored draw, a short walk, and
# a long one. n_steps stays a free parameter.
BIASED_STEP_CHOICES = (1, 30, 300)


@dataclass(frozen=True)
class BiasedCslConfig:
    """Short test-anchored chains: ``n_chains`` per point, ``n_steps`` each."""

    n_chains: int = 10
    n_steps: int = 30
    seed: int = 0

    def __post_init__(self):
        _require(int(self.n_chains) >= 1, "n_chains must be at least 1")
        _require(int(self.n_steps) >= 1, "n_steps must be at least 1")
        object.__setattr__(self, "n_chains", int(self.n_chains))
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "seed", check_seed(self.seed))

    def to_dict(self) -> dict:
        return {"n_chains": self.n_chains, "n_steps": self.n_steps, "seed": self.seed}


def _biased_latents(model: RbmModel, x: np.ndarray, config: BiasedCslConfig, key) -> np.ndarray:
    """Pooled consecutive latent draws from chains started at ``x``.

    Chain ``c`` uses the stream ``(*key, c)``; its first hidden draw comes
    from ``P(h | x)`` and counts as step 1. No burn-in, no thinning.
    """
    nv, nh = model.n_visible, model.n_hidden
    gens = [stream(*key, c) for c in range(config.n_chains)]
    uniforms = np.stack([g.random((config.n_steps, nh + nv)) for g in gens])
    v = np.tile(x, (config.n_chains, 1))
    out = np.empty((config.n_chains, config.n_steps, nh), dtype=np.float64)
    for t in range(config.n_steps):
        h = (uniforms[:, t, :nh] < expit(v @ model.weights + model.bias_hidden)).astype(np.float64)
        out[:, t] = h
        v = (uniforms[:, t, nh:] < expit(h @ model.weights.T + model.bias_visible)).astype(np.float64)
    return out.reshape(config.n_chains * config.n_steps, nh)


def biased_csl(model, x, config: BiasedCslConfig) -> float:
    """Biased log-likelihood estimate of one test point from chains started there.

    Pools the first ``n_steps`` consecutive latent samples of ``n_chains``
    chains whose visible state is initialized at ``x`` and returns
    ``logsumexp log P(x|h') - log |S_x|``. Anchoring at the test point makes
    the estimate reliable with very few samples but optimistic on average.
    """
    if not isinstance(model, RbmModel):
        raise ValidationError(
            "biased_csl needs a model with a visible-conditioned latent kernel (an RBM)"
        )
    x = as_binary_vector(x, model.n_visible, "x")
    latents = _biased_latents(model, x, config, (config.seed, 1))
    terms = log_p_x_given_h_many(model, x[None, :], latents)[0]
    value = float(logsumexp(terms) - math.log(terms.shape[0]))
    if not math.isfinite(value):
        raise NumericalError("biased_csl produced a nonfinite estimate")
    return value


def biased_csl_report(model, test_set, config: BiasedCslConfig) -> EvalReport:
    """Biased estimate for every test point; each point gets substream ``(seed, 1, i)``."""
    if not isinstance(model, RbmModel):
        raise ValidationError(
            "biased_csl needs a model with a visible-conditioned latent kernel (an RBM)"
        )
    xs = _test_matrix(model, test_set)
    values = np.empty(xs.shape[0])
    for i, x in enumerate(xs):
        latents = _biased_latents(model, x, config, (config.seed, 1, i))
        terms = log_p_x_given_h_many(model, x[None, :], latents)[0]
        values[i] = logsumexp(terms) - math.log(terms.shape[0])
    snapshot = {
        "estimator": "biased-csl",
        "model": model_summary(model),
        "config": config.to_dict(),
        "n_test": int(xs.shape[0]),
    }
    return _make_report("biased-csl", values, snapshot, config.n_chains * config.n_steps)


# ---------------------------------------------------------------------------
# Parzen window baseline on generated observations


def _parzen_values(samples: np.ndarray, sigma: float, xs: np.ndarray) -> np.ndarray:
    dim = samples.shape[1]
    const = -0.5 * dim * (math.log(2.0 * math.pi) + 2.0 * math.log(sigma))
    var = sigma**2

    def block(lo, hi):
        diff = xs[:, None, :] - samples[None, lo:hi, :]
        return -0.5 * (diff * diff).sum(axis=2) / var + const

    return _logmeanexp_chunked(block, samples.shape[0], xs.shape[0])


def parzen_log_density(generated_x, sigma: float, x) -> float:
    """Kernel density estimate at ``x`` from generated observations.

    Places an isotropic Gaussian of width ``sigma`` on every generated
    sample and evaluates the log of their mean density at ``x``.
    """
    samples = np.asarray(generated_x, dtype=np.float64)
    _require(samples.ndim == 2 and samples.shape[0] >= 1,
             "generated_x must be a nonempty (n, dim) matrix")
    sigma = float(sigma)
    _require(math.isfinite(sigma) and sigma > 0.0, "sigma must be a positive real")
    x = np.asarray(x, dtype=np.float64)
    _require(x.shape == (samples.shape[1],),
             f"x must have shape ({samples.shape[1]},), got {x.shape}")
    return float(_parzen_values(samples, sigma, x[None, :])[0])


def parzen_report(generated_x, sigma: float, test_set) -> EvalReport:
    """Parzen estimate for every test point."""
    samples = np.asarray(generated_x, dtype=np.float64)
    _require(samples.ndim == 2 and samples.shape[0] >= 1,
             "generated_x must be a nonempty (n, dim) matrix")
    sigma = float(sigma)
    _require(math.isfinite(sigma) and sigma > 0.0, "sigma must be a positive real")
    xs = as_real_matrix(test_set, samples.shape[1], "test_set")
    _require(xs.shape[0] >= 1, "test set is empty")
    values = _parzen_values(samples, sigma, xs)
    snapshot = {
        "estimator": "parzen",
        "sigma": sigma,
        "n_generated": int(samples.shape[0]),
        "n_test": int(xs.shape[0]),
    }
    return _make_report("parzen", values, snapshot, samples.shape[0])


DEFAULT_BANDWIDTH_GRID = tuple(np.geomspace(1e-2, 1e1, 20))


def select_bandwidth(generated_x, validation_set, grid=DEFAULT_BANDWIDTH_GRID):
    """Pick the kernel width maximizing mean validation log-density.

    Returns ``(sigma, scores)`` where ``scores[i]`` is the mean validation
    log-density at ``grid[i]``. Ties are broken toward the smaller width and,
    among duplicates, toward the first occurrence.
    """
    grid = [float(s) for s in grid]
    _require(len(grid) >= 1, "bandwidth grid is empty")
    for s in grid:
        _require(math.isfinite(s) and s > 0.0, f"bandwidth grid contains nonpositive value {s}")
    samples = np.asarray(generated_x, dtype=np.float64)
    _require(samples.ndim == 2 and samples.shape[0] >= 1,
             "generated_x must be a nonempty (n, dim) matrix")
    xs = as_real_matrix(validation_set, samples.shape[1], "validation_set")
    _require(xs.shape[0] >= 1, "validation set is empty")
    scores = np.array([_parzen_values(samples, s, xs).mean() for s in grid])
    best = 0
    for i in range(1, len(grid)):
        if scores[i] > scores[best] or (scores[i] == scores[best] and grid[i] < grid[best]):
            best = i
    return grid[best], scores


# ---------------------------------------------------------------------------
# Annealed importance sampling


@dataclass(frozen=True)
class AisConfig:
    """Annealing path and run count for the importance-sampling estimator."""

    n_temperatures: int = 1000
    n_runs: int = 100
    schedule: str = "linear"
    seed: int = 0

    def __post_init__(self):
        _require(int(self.n_temperatures) >= 2, "n_temperatures must be at least 2")
        _require(int(self.n_runs) >= 1, "n_runs must be at least 1")
        _require(self.schedule in ("linear", "geometric-tail"),
                 f"unknown schedule {self.schedule!r}")
        object.__setattr__(self, "n_temperatures", int(self.n_temperatures))
        object.__setattr__(self, "n_runs", int(self.n_runs))
        object.__setattr__(self, "seed", check_seed(self.seed))

    def to_dict(self) -> dict:
        return {
            "n_temperatures": self.n_temperatures,
            "n_runs": self.n_runs,
            "schedule": self.schedule,
            "seed": self.seed,
        }


def ais_schedule(config: AisConfig) -> np.ndarray:
    """Inverse temperatures from 0 to 1 inclusive."""
    n = config.n_temperatures
    if config.schedule == "linear":
        return np.linspace(0.0, 1.0, n)
    # Tail-heavy: gaps shrink geometrically toward beta = 1.
    betas = np.empty(n)
    betas[: n - 1] = 1.0 - np.geomspace(1.0, 1e-4, n - 1)
    betas[n - 1] = 1.0
    return betas


def _base_biases(model: RbmModel, reference) -> np.ndarray:
    if reference is None:
        return np.zeros(model.n_visible)
    from .models import as_binary_matrix

    ref = as_binary_matrix(reference, model.n_visible, "reference")
    p = np.clip(ref.mean(axis=0), 0.01, 0.99)
    return np.log(p / (1.0 - p))


def ais_log_z(model: RbmModel, config: AisConfig, reference=None):
    """Annealed importance-sampling estimate of the RBM log partition function.

    The base distribution is an independent-unit RBM (zero weights, zero
    hidden biases) whose visible biases are fit to the mean of ``reference``
    (clipped to [0.01, 0.99] before the logit) or zero when no reference is
    given. Intermediate distributions scale the weights and hidden biases by
    beta and interpolate the visible biases linearly; each run performs one
    block Gibbs sweep per intermediate temperature. Run ``r`` draws from the
    stream ``(seed, 2, r)``.

    Returns ``(log_z_estimate, std_error, log_weights)`` where the standard
    error of the log estimate comes from the delta method on the run weights
    (0 when all weights agree or only one run was made).
    """
    _require(isinstance(model, RbmModel), "ais_log_z is defined for RBM models")
    nv, nh = model.n_visible, model.n_hidden
    w, bv, bh = model.weights, model.bias_visible, model.bias_hidden
    bva = _base_biases(model, reference)
    betas = ais_schedule(config)
    n_temps = betas.shape[0]
    n_runs = config.n_runs

    u_init = np.empty((n_runs, nv))
    n_sweeps = n_temps - 2
    uniforms = np.empty((n_runs, n_sweeps, nh + nv)) if n_sweeps > 0 else None
    for r in range(n_runs):
        g = stream(config.seed, 2, r)
        u_init[r] = g.random(nv)
        if n_sweeps > 0:
            uniforms[r] = g.random((n_sweeps, nh + nv))

    v = (u_init < expit(bva)[None, :]).astype(np.float64)
    log_w = np.zeros(n_runs)
    for k in range(1, n_temps):
        b_prev, b_cur = betas[k - 1], betas[k]
        gap = v @ w + bh  # shared hidden logits at beta = 1
        log_w += (
            v @ ((b_cur - b_prev) * bv + (b_prev - b_cur) * bva)
            + _softplus(b_cur * gap).sum(axis=1)
            - _softplus(b_prev * gap).sum(axis=1)
        )
        if k < n_temps - 1:
            h = (uniforms[:, k - 1, :nh] < expit(b_cur * gap)).astype(np.float64)
            pv = expit(b_cur * (h @ w.T) + (1.0 - b_cur) * bva + b_cur * bv)
            v = (uniforms[:, k - 1, nh:] < pv).astype(np.float64)
    if not np.isfinite(log_w).all():
        bad = int(np.flatnonzero(~np.isfinite(log_w))[0])
        raise NumericalError(f"AIS produced a nonfinite weight in run {bad}")

    log_z_base = float(_softplus(bva).sum() + nh * math.log(2.0))
    log_ratio = float(logsumexp(log_w) - math.log(n_runs))
    estimate = log_ratio + log_z_base
    if n_runs > 1:
        centered = np.exp(log_w - log_ratio)
        std_error = float(centered.std(ddof=1) / math.sqrt(n_runs))
    else:
        std_error = 0.0
    return estimate, std_error, log_w


def ais_log_likelihood(model, test_set, config: AisConfig, reference=None) -> EvalReport:
    """Per-example log-likelihood ``-F(x) - log Z_hat`` using the AIS estimate."""
    xs = _test_matrix(model, test_set)
    log_z, std_error, _ = ais_log_z(model, config, reference=reference)
    values = -free_energy_many(model, xs) - log_z
    snapshot = {
        "estimator": "ais",
        "model": model_summary(model),
        "config": config.to_dict(),
        "log_z_estimate": log_z,
        "log_z_std_error": std_error,
        "n_test": int(xs.shape[0]),
    }
    return _make_report("ais", values, snapshot, config.n_runs)


def exact_report(model, test_set) -> EvalReport:
    """Exact log-likelihood of every test point, packaged as a report."""
    from .models import exact_log_likelihood_many

    xs = _test_matrix(model, test_set)
    values = exact_log_likelihood_many(model, xs)
    snapshot = {"estimator": "exact", "model": model_summary(model), "n_test": int(xs.shape[0])}
    return _make_report("exact", values, snapshot, 0)


# ---------------------------------------------------------------------------
# Report serialization


def report_to_dict(report: EvalReport) -> dict:
    """JSON-friendly summary of a report (per-example values go to CSV)."""
    return {
        "estimator_name": report.estimator_name,
        "mean_loglik": report.mean_loglik,
        "std_error": report.std_error,
        "n_examples": int(report.per_example_loglik.shape[0]),
        "sample_count_used": report.sample_count_used,
        "config_snapshot": report.config_snapshot,
    }


def write_report_json(report: EvalReport, path) -> None:
    import json as _json

    with open(path, "w", encoding="utf-8") as fh:
        _json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_report_csv(report: EvalReport, path) -> None:
    """Per-example values, one row per test point, five decimal places."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("example_index,loglik\n")
        for i, v in enumerate(report.per_example_loglik):
            fh.write(f"{i},{v:.5f}\n")
