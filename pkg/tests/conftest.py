"""Shared fixtures: trained models and the heavy convergence runs.

Session scope keeps the expensive artifacts (exact-gradient training, the
20-seed convergence sweep) computed once and shared between the module
tests and the acceptance suite.
"""

import numpy as np
import pytest

import csleval as ce


@pytest.fixture(scope="session")
def bars_train():
    return ce.make_synthetic("tiny-bars", {"n": 500, "noise": 0.05}, seed=11)


@pytest.fixture(scope="session")
def bars_test():
    return ce.make_synthetic("tiny-bars", {"n": 200, "noise": 0.05}, seed=12)


@pytest.fixture(scope="session")
def rbm_sharp(bars_train):
    """Well-trained 16-visible/5-hidden RBM; sharp modes, slow Gibbs mixing."""
    model = ce.init_rbm(16, 5, seed=1, scale=0.01)
    config = ce.TrainConfig(algorithm="exact-gradient", learning_rate=0.3, n_epochs=1500, seed=1)
    return ce.train_rbm(model, bars_train.vectors, config)


@pytest.fixture(scope="session")
def rbm_tiny():
    """Random 4x3 RBM with moderate couplings; fully enumerable."""
    rng = np.random.default_rng(7)
    return ce.RbmModel(
        weights=rng.normal(0, 0.7, (4, 3)),
        bias_visible=rng.normal(0, 0.4, 4),
        bias_hidden=rng.normal(0, 0.4, 3),
    )


@pytest.fixture(scope="session")
def ladder(bars_train):
    """Four RBMs of increasing capacity and training effort on the same data."""
    models = []
    for n_hidden, epochs in [(2, 150), (5, 250), (10, 350), (15, 450)]:
        model = ce.init_rbm(16, n_hidden, seed=n_hidden, scale=0.01)
        config = ce.TrainConfig(
            algorithm="exact-gradient", learning_rate=0.3, n_epochs=epochs, seed=n_hidden
        )
        models.append(ce.train_rbm(model, bars_train.vectors, config))
    return models


@pytest.fixture(scope="session")
def convergence_errors(rbm_sharp, bars_test):
    """|CSL - exact| for 20 seeds at |S| in {1k, 10k, 100k}, thin=100.

    Smaller sample counts are per-chain prefixes of the 100k run, exactly
    what independent shorter runs would produce.
    """
    xs = bars_test.vectors
    exact = float(ce.exact_log_likelihood_many(rbm_sharp, xs).mean())
    errors = {1_000: [], 10_000: [], 100_000: []}
    for seed in range(20):
        config = ce.ChainConfig(
            n_samples=100_000, burn_in=1000, thin=100, n_chains=500, seed=seed
        )
        full = ce.run_chain(rbm_sharp, config)
        for n in errors:
            subset = ce.subset_sample_set(full, n)
            value = ce.csl(rbm_sharp, subset, xs).mean_loglik
            errors[n].append(abs(value - exact))
    return {"errors": errors, "exact": exact}


@pytest.fixture(scope="session")
def gmm_2comp_3d():
    return ce.gmm_from_weights([0.4, 0.6], [[0.0, 0.0, 0.0], [2.5, -1.0, 1.5]], 0.7)


@pytest.fixture(scope="session")
def gmm_2comp_1d():
    return ce.gmm_from_weights([0.5, 0.5], [[-3.0], [3.0]], 0.5)
