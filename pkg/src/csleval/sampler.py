"""Latent-variable Markov chains with reproducible per-chain random streams.

Chains are the sole source of the latent sample sets the estimators consume.
Every chain owns the Philox stream ``(seed, chain_index)`` and consumes, per
Gibbs step, ``n_hidden`` uniforms for the hidden draw followed by
``n_visible`` for the visible draw (plus ``n_visible`` once at start when the
initial state is random). Because the streams are independent and counter
based, results are bitwise identical no matter how chains are grouped onto
threads, and recording every ``thin``-th state of a chain equals recording
every state and subsampling afterwards.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DataFormatError, NumericalError, ValidationError
from .models import (
    GmmModel,
    RbmModel,
    as_binary_vector,
    hidden_free_energy_many,
    _require,
)
from .rng import check_seed, stream

# Uniform blocks are regenerated in slabs of roughly this many doubles.
_BLOCK_BUDGET = 4_000_000


@dataclass(frozen=True)
class ChainConfig:
    """How a latent sample set of size ``n_samples`` is produced.

    ``n_chains`` chains run in parallel, each discarding ``burn_in`` steps
    and then recording every ``thin``-th latent state until it has
    ``n_samples / n_chains`` of them. ``init`` is either ``None`` (visible
    state drawn uniform Bernoulli(1/2) per chain) or a fixed 0/1 visible
    vector shared by all chains.
    """

    n_samples: int
    burn_in: int = 1000
    thin: int = 100
    n_chains: int = 1
    seed: int = 0
    init: np.ndarray | None = None

    def __post_init__(self):
        _require(int(self.n_samples) >= 1, "n_samples must be a positive integer")
        _require(int(self.burn_in) >= 0, "burn_in must be nonnegative")
        _require(int(self.thin) >= 1, "thin must be at least 1")
        _require(int(self.n_chains) >= 1, "n_chains must be a positive integer")
        _require(
            int(self.n_samples) % int(self.n_chains) == 0,
            f"n_samples ({self.n_samples}) must be divisible by n_chains ({self.n_chains})",
        )
        object.__setattr__(self, "n_samples", int(self.n_samples))
        object.__setattr__(self, "burn_in", int(self.burn_in))
        object.__setattr__(self, "thin", int(self.thin))
        object.__setattr__(self, "n_chains", int(self.n_chains))
        object.__setattr__(self, "seed", check_seed(self.seed))
        if self.init is not None:
            init = np.array(self.init, dtype=np.float64)
            _require(init.ndim == 1, "init must be a 1-D 0/1 vector")
            _require(bool(((init == 0.0) | (init == 1.0)).all()), "init must contain only 0/1 entries")
            init.setflags(write=False)
            object.__setattr__(self, "init", init)

    @property
    def samples_per_chain(self) -> int:
        return self.n_samples // self.n_chains

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "burn_in": self.burn_in,
            "thin": self.thin,
            "n_chains": self.n_chains,
            "seed": self.seed,
            "init": None if self.init is None else [float(v) for v in self.init],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ChainConfig":
        init = doc.get("init")
        return cls(
            n_samples=doc["n_samples"],
            burn_in=doc["burn_in"],
            thin=doc["thin"],
            n_chains=doc["n_chains"],
            seed=doc["seed"],
            init=None if init is None else np.array(init, dtype=np.float64),
        )


@dataclass(frozen=True)
class LatentSampleSet:
    """An ordered latent sample set with its chain provenance.

    ``samples`` is either a (n, n_hidden) uint8 matrix of 0/1 hidden states
    (``kind="binary"``) or an (n,) int64 vector of component indices
    (``kind="component"``). Samples are stored chain-major: all of chain 0,
    then chain 1, and so on.
    """

    samples: np.ndarray
    kind: str
    provenance: ChainConfig
    chain_index: np.ndarray

    def __post_init__(self):
        _require(self.kind in ("binary", "component"), f"unknown sample kind {self.kind!r}")
        if self.kind == "binary":
            s = np.array(self.samples, dtype=np.uint8)
            _require(s.ndim == 2, "binary samples must be a (n, n_hidden) matrix")
            _require(bool((s <= 1).all()), "binary samples must contain only 0/1 entries")
        else:
            s = np.array(self.samples, dtype=np.int64)
            _require(s.ndim == 1, "component samples must be a 1-D index vector")
            _require(bool((s >= 0).all()), "component indices must be nonnegative")
        ci = np.array(self.chain_index, dtype=np.int32)
        _require(ci.shape == (s.shape[0],), "chain_index must have one entry per sample")
        _require(
            s.shape[0] == self.provenance.n_samples,
            f"sample count {s.shape[0]} does not match provenance n_samples {self.provenance.n_samples}",
        )
        s.setflags(write=False)
        ci.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "chain_index", ci)

    def __len__(self) -> int:
        return self.samples.shape[0]


def _chain_major_index(config: ChainConfig) -> np.ndarray:
    return np.repeat(np.arange(config.n_chains, dtype=np.int32), config.samples_per_chain)


def gibbs_step(model: RbmModel, v, rng: np.random.Generator):
    """One block Gibbs step: draw ``h' ~ P(h|v)`` then ``v' ~ P(v|h')``.

    Returns ``(v', h')``; ``h'`` is the latent sample associated with the
    step. Consumes ``n_hidden`` then ``n_visible`` uniforms from ``rng``.
    """
    v = as_binary_vector(v, model.n_visible, "v")
    ph = expit(model.weights.T @ v + model.bias_hidden)
    h = (rng.random(model.n_hidden) < ph).astype(np.float64)
    pv = expit(model.weights @ h + model.bias_visible)
    v_new = (rng.random(model.n_visible) < pv).astype(np.float64)
    return v_new, h


def _sigmoid_(buf: np.ndarray) -> np.ndarray:
    """In-place logistic of ``buf``; returns ``buf``."""
    np.negative(buf, out=buf)
    np.exp(buf, out=buf)
    buf += 1.0
    np.reciprocal(buf, out=buf)
    return buf


def _run_chain_group(model: RbmModel, config: ChainConfig, chain_ids) -> np.ndarray:
    """Run a group of chains in lockstep; returns (n_group, per_chain, n_hidden) uint8.

    Chains advance together one step at a time, but each consumes only its
    own stream, so the result per chain is identical to running it alone.
    """
    w = model.weights
    w_t = np.ascontiguousarray(w.T)
    bv = model.bias_visible
    bh = model.bias_hidden
    nv, nh = model.n_visible, model.n_hidden
    per_chain = config.samples_per_chain
    total_steps = config.burn_in + config.thin * per_chain
    gens = [stream(config.seed, int(c)) for c in chain_ids]
    n_group = len(gens)

    if config.init is None:
        v = (np.stack([g.random(nv) for g in gens]) < 0.5).astype(np.float64)
    else:
        init = as_binary_vector(config.init, nv, "init")
        v = np.tile(init, (n_group, 1))

    out = np.empty((n_group, per_chain, nh), dtype=np.uint8)
    h = np.empty((n_group, nh))
    logits_h = np.empty((n_group, nh))
    logits_v = np.empty((n_group, nv))
    block = max(1, _BLOCK_BUDGET // (n_group * (nh + nv)))
    uniforms = np.empty((n_group, min(block, total_steps), nh + nv))
    step = 0
    recorded = 0
    while step < total_steps:
        todo = min(block, total_steps - step)
        for c, g in enumerate(gens):
            g.random(out=uniforms[c, :todo])
        for t in range(todo):
            step += 1
            np.matmul(v, w, out=logits_h)
            logits_h += bh
            _sigmoid_(logits_h)
            h[...] = uniforms[:, t, :nh] < logits_h
            np.matmul(h, w_t, out=logits_v)
            logits_v += bv
            _sigmoid_(logits_v)
            v[...] = uniforms[:, t, nh:] < logits_v
            offset = step - config.burn_in
            if offset > 0 and offset % config.thin == 0:
                out[:, recorded] = h
                recorded += 1
    return out


def run_chain(model, config: ChainConfig, threads: int = 1) -> LatentSampleSet:
    """Produce a latent sample set from the model's own sampling procedure.

    For an RBM this runs ``config.n_chains`` block Gibbs chains; for a
    mixture (which needs no Markov chain) it delegates to
    ``gmm_sample_latent``. Output is a pure function of ``(model, config)``;
    ``threads`` only partitions chains across workers and never changes the
    result.
    """
    if isinstance(model, GmmModel):
        return gmm_sample_latent(model, config)
    _require(isinstance(model, RbmModel), f"unsupported model type {type(model).__name__}")
    if config.init is not None:
        as_binary_vector(config.init, model.n_visible, "init")

    chain_ids = list(range(config.n_chains))
    threads = max(1, int(threads))
    if threads == 1 or config.n_chains == 1:
        blocks = [_run_chain_group(model, config, chain_ids)]
    else:
        n_groups = min(threads, config.n_chains)
        groups = [chain_ids[i::n_groups] for i in range(n_groups)]
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_groups) as pool:
            results = list(pool.map(lambda g: _run_chain_group(model, config, g), groups))
        per_chain = {c: results[gi][ci] for gi, group in enumerate(groups) for ci, c in enumerate(group)}
        blocks = [np.stack([per_chain[c] for c in chain_ids])]
    samples = blocks[0].reshape(config.n_samples, model.n_hidden)
    return LatentSampleSet(
        samples=samples,
        kind="binary",
        provenance=config,
        chain_index=_chain_major_index(config),
    )


def gmm_sample_latent(model: GmmModel, config: ChainConfig) -> LatentSampleSet:
    """Draw i.i.d. component indices from the mixture weights.

    There is no chain to burn in or thin, so the recorded provenance carries
    ``burn_in=0`` and ``thin=1`` regardless of the requested values.
    """
    _require(isinstance(model, GmmModel), "gmm_sample_latent needs a GmmModel")
    cdf = np.cumsum(np.exp(model.log_weights))
    per_chain = config.samples_per_chain
    parts = []
    for c in range(config.n_chains):
        u = stream(config.seed, c).random(per_chain)
        parts.append(np.minimum(np.searchsorted(cdf, u, side="right"), model.n_components - 1))
    stored = dataclasses.replace(config, burn_in=0, thin=1)
    return LatentSampleSet(
        samples=np.concatenate(parts).astype(np.int64),
        kind="component",
        provenance=stored,
        chain_index=_chain_major_index(stored),
    )


def subset_sample_set(sample_set: LatentSampleSet, n_samples: int) -> LatentSampleSet:
    """Per-chain prefix of a sample set.

    Taking the first ``n_samples / n_chains`` samples of every chain
    reproduces, bit for bit, an independent run with ``n_samples`` and the
    same seed, because each chain's stream does not depend on how long the
    chain runs.
    """
    cfg = sample_set.provenance
    _require(1 <= n_samples <= cfg.n_samples,
             f"subset size {n_samples} out of range [1, {cfg.n_samples}]")
    _require(n_samples % cfg.n_chains == 0,
             f"subset size {n_samples} must be divisible by n_chains ({cfg.n_chains})")
    take = n_samples // cfg.n_chains
    per = cfg.samples_per_chain
    rows = (np.arange(cfg.n_chains)[:, None] * per + np.arange(take)[None, :]).ravel()
    new_cfg = dataclasses.replace(cfg, n_samples=n_samples)
    return LatentSampleSet(
        samples=sample_set.samples[rows],
        kind=sample_set.kind,
        provenance=new_cfg,
        chain_index=_chain_major_index(new_cfg),
    )


def sample_visible_given_latents(model, sample_set: LatentSampleSet, seed: int = 0) -> np.ndarray:
    """One observation drawn from ``P(x | h)`` for every latent sample.

    This is how "generated samples" for observation-space baselines (such as
    the Parzen estimator) are materialized from a latent sample set.
    """
    # 3-integer key so the stream can never collide with a chain's (seed, c).
    rng = stream(check_seed(seed), 3, 0)
    if isinstance(model, RbmModel):
        _require(sample_set.kind == "binary", "RBM needs binary latent samples")
        hs = sample_set.samples.astype(np.float64)
        probs = expit(hs @ model.weights.T + model.bias_visible)
        return (rng.random(probs.shape) < probs).astype(np.float64)
    if isinstance(model, GmmModel):
        _require(sample_set.kind == "component", "mixture needs component-index samples")
        mu = model.means[sample_set.samples]
        return mu + model.sigma * rng.standard_normal(mu.shape)
    raise ValidationError(f"unsupported model type {type(model).__name__}")


# ---------------------------------------------------------------------------
# Chain diagnostics


def effective_sample_size(series) -> float:
    """Effective sample size ``N / (1 + 2 * sum_k rho_k)`` of a scalar series.

    Autocorrelations ``rho_k`` are summed from lag 1 until the first
    nonpositive estimate (initial-positive-sequence truncation), so the
    result always lies in ``(0, N]``.
    """
    x = np.asarray(series, dtype=np.float64)
    _require(x.ndim == 1, "series must be 1-D")
    _require(x.shape[0] >= 10, f"series must have at least 10 entries, got {x.shape[0]}")
    _require(bool(np.isfinite(x).all()), "series contains nonfinite values")
    n = x.shape[0]
    if bool(np.all(x == x[0])):
        raise NumericalError("degenerate chain: series is constant")
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n]
    rho = acov / acov[0]
    nonpos = np.nonzero(rho[1:] <= 0.0)[0]
    last = int(nonpos[0]) if nonpos.size else n - 1
    total = float(rho[1 : last + 1].sum())
    return float(n / (1.0 + 2.0 * total))


def latent_series(model, sample_set: LatentSampleSet) -> np.ndarray:
    """Scalar chain summary per latent sample, used for mixing diagnostics.

    For RBM latents this is the hidden-side free energy under the model; for
    mixture latents it is the negative log prior weight of the component.
    """
    if isinstance(model, RbmModel):
        _require(sample_set.kind == "binary", "RBM needs binary latent samples")
        return hidden_free_energy_many(model, sample_set.samples.astype(np.float64))
    if isinstance(model, GmmModel):
        _require(sample_set.kind == "component", "mixture needs component-index samples")
        return -model.log_weights[sample_set.samples]
    raise ValidationError(f"unsupported model type {type(model).__name__}")


def sample_set_ess(model, sample_set: LatentSampleSet) -> dict:
    """Per-chain effective sample sizes of a sample set, plus their sum."""
    series = latent_series(model, sample_set)
    per = sample_set.provenance.samples_per_chain
    per_chain = []
    for c in range(sample_set.provenance.n_chains):
        per_chain.append(effective_sample_size(series[c * per : (c + 1) * per]))
    return {"per_chain": per_chain, "total": float(sum(per_chain))}


# ---------------------------------------------------------------------------
# Sample-set files

_MAGIC = b"CSLS"
_VERSION = 1
_KIND_CODES = {"binary": 0, "component": 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


def save_sample_set(sample_set: LatentSampleSet, path) -> None:
    """Write a sample set to its binary file format.

    Layout (little-endian): magic ``CSLS``, version u32, kind u8, n_samples
    u64, latent dim u32, then the packed samples (bit-packed rows for binary
    latents, u32 for component indices), then a JSON footer holding the
    ChainConfig.
    """
    kind = sample_set.kind
    if kind == "binary":
        dim = sample_set.samples.shape[1]
        payload = np.packbits(sample_set.samples, axis=1, bitorder="little").tobytes()
    else:
        dim = int(sample_set.samples.max()) + 1 if len(sample_set) else 0
        payload = sample_set.samples.astype("<u4").tobytes()
    header = _MAGIC + struct.pack("<IBQI", _VERSION, _KIND_CODES[kind], len(sample_set), dim)
    footer = json.dumps(sample_set.provenance.to_dict(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        fh.write(footer)


def load_sample_set(path) -> LatentSampleSet:
    """Read a sample set written by :func:`save_sample_set`."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC:
        raise DataFormatError(f"{path}: bad magic {raw[:4]!r}, expected {_MAGIC!r}")
    try:
        version, kind_code, n_samples, dim = struct.unpack_from("<IBQI", raw, 4)
    except struct.error as exc:
        raise DataFormatError(f"{path}: truncated header ({exc})") from exc
    if version != _VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    if kind_code not in _KIND_NAMES:
        raise DataFormatError(f"{path}: unknown sample kind code {kind_code}")
    kind = _KIND_NAMES[kind_code]
    offset = 4 + struct.calcsize("<IBQI")
    if kind == "binary":
        row_bytes = (dim + 7) // 8
        end = offset + n_samples * row_bytes
        if end > len(raw):
            raise DataFormatError(f"{path}: truncated payload at byte offset {len(raw)}")
        packed = np.frombuffer(raw[offset:end], dtype=np.uint8).reshape(n_samples, row_bytes)
        samples = np.unpackbits(packed, axis=1, bitorder="little")[:, :dim]
    else:
        end = offset + n_samples * 4
        if end > len(raw):
            raise DataFormatError(f"{path}: truncated payload at byte offset {len(raw)}")
        samples = np.frombuffer(raw[offset:end], dtype="<u4").astype(np.int64)
    try:
        config = ChainConfig.from_dict(json.loads(raw[end:].decode("utf-8")))
    except (json.JSONDecodeError, KeyError, UnicodeDecodeError) as exc:
        raise DataFormatError(f"{path}: invalid JSON footer ({exc})") from exc
    return LatentSampleSet(
        samples=samples,
        kind=kind,
        provenance=config,
        chain_index=_chain_major_index(config),
    )
