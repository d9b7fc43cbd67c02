"""Experiment orchestration: sample-count sweeps and model-comparison reports.

A sweep experiment runs one long chain, evaluates each selected estimator on
nested per-chain prefixes of it (so the row for n samples is exactly what an
independent n-sample run would produce), and writes a CSV table whose rows
are sample counts and whose columns are estimators, with exact and
importance-sampling reference rows appended when available. Everything is a
pure function of the spec, so reruns produce byte-identical files.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .estimators import (
    AisConfig,
    BiasedCslConfig,
    ais_log_likelihood,
    biased_csl_report,
    csl,
    parzen_report,
    select_bandwidth,
)
from .models import (
    GmmModel,
    RbmModel,
    _require,
    exact_log_likelihood_many,
    load_model,
    ENUMERATION_LIMIT,
)
from .datasets import load_dataset
from .rng import check_seed
from .sampler import ChainConfig, run_chain, sample_visible_given_latents, subset_sample_set

EXPERIMENT_ESTIMATORS = ("csl", "parzen")

# Fixed offsets decorrelating derived streams from the chain streams.
_AIS_SEED_SALT = 0x9E3779B97F4A7C15
_PARZEN_SEED_SALT = 0xC2B2AE3D27D4EB4F


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything a sweep experiment depends on."""

    model_path: str
    test_path: str
    output_dir: str
    sweep: tuple
    estimators: tuple = ("csl",)
    seed: int = 0
    burn_in: int = 1000
    thin: int = 100
    n_chains: int = 1
    threshold: float = 0.5
    test_size: int | None = 1000
    validation_path: str | None = None
    parzen_sigma: float | None = None
    include_exact: bool = True
    include_ais: bool = False
    ais_temperatures: int = 1000
    ais_runs: int = 100
    ais_schedule: str = "linear"
    threads: int = 1

    def __post_init__(self):
        sweep = tuple(int(n) for n in self.sweep)
        _require(len(sweep) >= 1, "sweep list is empty")
        _require(all(n >= 1 for n in sweep), "sweep values must be positive")
        _require(all(a < b for a, b in zip(sweep, sweep[1:])),
                 "sweep list must be strictly increasing")
        _require(all(n % int(self.n_chains) == 0 for n in sweep),
                 f"every sweep value must be divisible by n_chains ({self.n_chains})")
        estimators = tuple(self.estimators)
        _require(len(estimators) >= 1, "estimator selection is empty")
        for e in estimators:
            _require(e in EXPERIMENT_ESTIMATORS,
                     f"unknown estimator {e!r}; choose from {EXPERIMENT_ESTIMATORS}")
        object.__setattr__(self, "sweep", sweep)
        object.__setattr__(self, "estimators", estimators)
        object.__setattr__(self, "seed", check_seed(self.seed))
        if self.test_size is not None:
            _require(int(self.test_size) >= 1, "test_size must be positive when given")
            object.__setattr__(self, "test_size", int(self.test_size))

    def to_dict(self) -> dict:
        return {
            "model_path": self.model_path,
            "test_path": self.test_path,
            "output_dir": self.output_dir,
            "sweep": list(self.sweep),
            "estimators": list(self.estimators),
            "seed": self.seed,
            "burn_in": self.burn_in,
            "thin": self.thin,
            "n_chains": self.n_chains,
            "threshold": self.threshold,
            "test_size": self.test_size,
            "validation_path": self.validation_path,
            "parzen_sigma": self.parzen_sigma,
            "include_exact": self.include_exact,
            "include_ais": self.include_ais,
            "ais_temperatures": self.ais_temperatures,
            "ais_runs": self.ais_runs,
            "ais_schedule": self.ais_schedule,
        }


def _limit_test(dataset, test_size):
    xs = dataset.vectors
    if test_size is not None and xs.shape[0] > test_size:
        xs = xs[:test_size]
    return xs


def _is_tractable(model) -> bool:
    if isinstance(model, GmmModel):
        return True
    return min(model.n_visible, model.n_hidden) <= ENUMERATION_LIMIT


def _parzen_sigma_for(spec, model, generated, validation_vectors):
    if spec.parzen_sigma is not None:
        return float(spec.parzen_sigma)
    if isinstance(model, GmmModel):
        return model.sigma  # the conditional width is the natural kernel width
    _require(validation_vectors is not None,
             "parzen estimator needs either parzen_sigma or a validation_path")
    sigma, _ = select_bandwidth(generated, validation_vectors)
    return sigma


def run_experiment(spec: ExperimentSpec) -> dict:
    """Run a sample-count sweep and write ``table.csv`` plus ``manifest.json``.

    Returns a dict with the table rows and the output paths. The chain for
    the largest sweep entry is run once; smaller entries reuse its per-chain
    prefixes, which match independent shorter runs bit for bit.
    """
    model = load_model(spec.model_path)
    test = load_dataset(spec.test_path, threshold=spec.threshold, split="test")
    xs = _limit_test(test, spec.test_size)
    validation = None
    if spec.validation_path is not None:
        validation = load_dataset(spec.validation_path, threshold=spec.threshold,
                                  split="validation").vectors

    config = ChainConfig(
        n_samples=max(spec.sweep),
        burn_in=spec.burn_in,
        thin=spec.thin,
        n_chains=spec.n_chains,
        seed=spec.seed,
    )
    full = run_chain(model, config, threads=spec.threads)

    rows = []
    for n in spec.sweep:
        subset = subset_sample_set(full, n)
        row = {"n_samples": n}
        for name in spec.estimators:
            if name == "csl":
                row["csl"] = csl(model, subset, xs).mean_loglik
            else:
                generated = sample_visible_given_latents(
                    model, subset, seed=(spec.seed ^ _PARZEN_SEED_SALT) ^ n
                )
                sigma = _parzen_sigma_for(spec, model, generated, validation)
                row["parzen"] = parzen_report(generated, sigma, xs).mean_loglik
        rows.append(row)

    footer = {}
    if spec.include_exact and _is_tractable(model):
        footer["exact"] = float(exact_log_likelihood_many(model, xs).mean())
    if spec.include_ais:
        _require(isinstance(model, RbmModel), "the AIS reference row needs an RBM model")
        ais_cfg = AisConfig(
            n_temperatures=spec.ais_temperatures,
            n_runs=spec.ais_runs,
            schedule=spec.ais_schedule,
            seed=spec.seed ^ _AIS_SEED_SALT,
        )
        footer["ais"] = ais_log_likelihood(model, xs, ais_cfg).mean_loglik

    os.makedirs(spec.output_dir, exist_ok=True)
    csv_path = os.path.join(spec.output_dir, "table.csv")
    manifest_path = os.path.join(spec.output_dir, "manifest.json")

    columns = list(spec.estimators)
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("n_samples," + ",".join(columns) + "\n")
        for row in rows:
            fh.write(str(row["n_samples"]) + "," + ",".join(f"{row[c]:.5f}" for c in columns) + "\n")
        for label, value in footer.items():
            fh.write(label + "," + ",".join(f"{value:.5f}" for _ in columns) + "\n")

    manifest = {
        "spec": spec.to_dict(),
        "chain": config.to_dict(),
        "n_test": int(xs.shape[0]),
        "rows": rows,
        "footer": footer,
        "table_csv": os.path.basename(csv_path),
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return {"rows": rows, "footer": footer, "csv_path": csv_path, "manifest_path": manifest_path}


def spearman_rank_correlation(a, b) -> float:
    """Spearman correlation of two score vectors (average ranks for ties).

    When either side is constant the correlation is defined as 1.0; this
    covers comparisons of identical models, where all scores tie.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _require(a.shape == b.shape and a.ndim == 1 and a.shape[0] >= 2,
             "rank correlation needs two equal-length vectors of at least 2 scores")
    ra = rankdata(a)
    rb = rankdata(b)
    if ra.std() == 0.0 or rb.std() == 0.0:
        return 1.0
    if np.array_equal(ra, rb):
        return 1.0
    if np.array_equal(ra, ra.shape[0] + 1 - rb):
        return -1.0
    return float(np.corrcoef(ra, rb)[0, 1])


def compare_models(
    model_paths,
    test_set,
    config: BiasedCslConfig,
    include_exact: bool = False,
    include_ais: bool = False,
    ais_config: AisConfig | None = None,
) -> dict:
    """Rank models by the biased test-anchored estimator.

    Emits per-model biased scores, optional exact and/or AIS reference
    scores, the model order (best first), and the Spearman correlation of
    the biased ranking against the reference ranking (exact when available,
    otherwise AIS).
    """
    paths = [str(p) for p in model_paths]
    _require(len(paths) >= 2, "model comparison needs at least 2 models")
    models = [load_model(p) for p in paths]
    for m in models:
        _require(isinstance(m, RbmModel), "compare_models ranks RBM models")
    dims = {m.n_visible for m in models}
    _require(len(dims) == 1, f"models have mixed visible dimensionalities: {sorted(dims)}")

    xs = np.asarray(test_set, dtype=np.float64)
    biased = [biased_csl_report(m, xs, config).mean_loglik for m in models]
    result = {
        "models": paths,
        "biased_csl": biased,
        "biased_csl_config": config.to_dict(),
        "ranking": [paths[i] for i in np.argsort(biased)[::-1]],
    }
    reference = None
    if include_exact:
        exact = [float(exact_log_likelihood_many(m, xs).mean()) for m in models]
        result["exact"] = exact
        reference = exact
    if include_ais:
        ais_cfg = ais_config if ais_config is not None else AisConfig()
        ais = [ais_log_likelihood(m, xs, ais_cfg).mean_loglik for m in models]
        result["ais"] = ais
        if reference is None:
            reference = ais
    if reference is not None:
        result["spearman"] = spearman_rank_correlation(biased, reference)
    return result
