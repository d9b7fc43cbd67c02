"""Sample-based log-likelihood evaluation for latent-variable generative models.

The package trains small restricted Boltzmann machines and Gaussian
mixtures, draws latent samples from them with reproducible Markov chains,
and estimates held-out log-likelihood from those samples: a conservative
latent-sample estimator (``csl``), a biased test-anchored variant for cheap
model ranking, a Parzen-window baseline on generated observations, annealed
importance sampling, and exact enumeration oracles for small models.
"""

from .datasets import Dataset, load_dataset, load_idx, make_synthetic, save_dataset, save_idx
from .errors import DataFormatError, IntractableModelError, NumericalError, ValidationError
from .estimators import (
    AisConfig,
    BIASED_STEP_CHOICES,
    BiasedCslConfig,
    EvalReport,
    ais_log_likelihood,
    ais_log_z,
    biased_csl,
    biased_csl_report,
    csl,
    csl_exact_expectation,
    exact_report,
    parzen_log_density,
    parzen_report,
    report_to_dict,
    select_bandwidth,
    write_report_csv,
    write_report_json,
)
from .experiment import ExperimentSpec, compare_models, run_experiment, spearman_rank_correlation
from .models import (
    GmmModel,
    RbmModel,
    cond_mean_h_given_x,
    cond_mean_x_given_h,
    exact_log_likelihood,
    exact_log_likelihood_many,
    exact_log_z,
    free_energy,
    free_energy_many,
    gmm_from_weights,
    hidden_free_energy,
    hidden_free_energy_many,
    load_model,
    log_p_x_given_h,
    log_p_x_given_h_many,
    model_from_json,
    model_to_json,
    rbm_energy,
    save_model,
)
from .sampler import (
    ChainConfig,
    LatentSampleSet,
    effective_sample_size,
    gibbs_step,
    gmm_sample_latent,
    latent_series,
    load_sample_set,
    run_chain,
    sample_set_ess,
    sample_visible_given_latents,
    save_sample_set,
    subset_sample_set,
)
from .training import (
    TrainConfig,
    exact_log_likelihood_grad,
    fit_gmm,
    gmm_em_step,
    init_rbm,
    train_rbm,
)

__version__ = "0.1.0"

__all__ = [
    "AisConfig",
    "BIASED_STEP_CHOICES",
    "BiasedCslConfig",
    "ChainConfig",
    "Dataset",
    "DataFormatError",
    "EvalReport",
    "ExperimentSpec",
    "GmmModel",
    "IntractableModelError",
    "LatentSampleSet",
    "NumericalError",
    "RbmModel",
    "TrainConfig",
    "ValidationError",
    "ais_log_likelihood",
    "ais_log_z",
    "biased_csl",
    "biased_csl_report",
    "compare_models",
    "cond_mean_h_given_x",
    "cond_mean_x_given_h",
    "csl",
    "csl_exact_expectation",
    "effective_sample_size",
    "exact_log_likelihood",
    "exact_log_likelihood_grad",
    "exact_log_likelihood_many",
    "exact_log_z",
    "exact_report",
    "fit_gmm",
    "free_energy",
    "free_energy_many",
    "gibbs_step",
    "gmm_em_step",
    "gmm_from_weights",
    "gmm_sample_latent",
    "hidden_free_energy",
    "hidden_free_energy_many",
    "init_rbm",
    "latent_series",
    "load_dataset",
    "load_idx",
    "load_model",
    "load_sample_set",
    "log_p_x_given_h",
    "log_p_x_given_h_many",
    "make_synthetic",
    "model_from_json",
    "model_to_json",
    "parzen_log_density",
    "parzen_report",
    "rbm_energy",
    "report_to_dict",
    "run_chain",
    "run_experiment",
    "sample_set_ess",
    "sample_visible_given_latents",
    "save_dataset",
    "save_idx",
    "save_model",
    "save_sample_set",
    "select_bandwidth",
    "spearman_rank_correlation",
    "subset_sample_set",
    "train_rbm",
    "write_report_csv",
    "write_report_json",
]
