"""Trainers: init contracts, gradient correctness, CD/PCD sanity, EM."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

import csleval as ce
from csleval.errors import NumericalError, ValidationError


class TestInitRbm:
    def test_zero_scale_gives_zero_weights(self):
        m = ce.init_rbm(6, 4, seed=3, scale=0.0)
        assert np.all(m.weights == 0.0)
        assert np.all(m.bias_visible == 0.0) and np.all(m.bias_hidden == 0.0)

    def test_same_seed_identical(self):
        a = ce.init_rbm(8, 5, seed=7, scale=0.1)
        b = ce.init_rbm(8, 5, seed=7, scale=0.1)
        assert np.array_equal(a.weights, b.weights)

    def test_scale_bounds_weights(self):
        m = ce.init_rbm(784, 500, seed=0, scale=0.01)
        assert np.all(np.abs(m.weights) <= 0.01)
        assert m.weights.shape == (784, 500)


class TestExactGradient:
    def test_matches_central_finite_differences(self):
        # epsilon = 1e-5, relative error per parameter below 1e-6
        rng = np.random.default_rng(13)
        m = ce.RbmModel(rng.normal(0, 0.5, (4, 3)), rng.normal(0, 0.3, 4),
                        rng.normal(0, 0.3, 3))
        data = (rng.random((30, 4)) < 0.5).astype(float)
        dw, dbv, dbh = ce.exact_log_likelihood_grad(m, data)
        eps = 1e-5

        def mean_ll(weights, bv, bh):
            mm = ce.RbmModel(weights, bv, bh)
            return ce.exact_log_likelihood_many(mm, data).mean()

        def rel_err(analytic, fd):
            return abs(analytic - fd) / max(abs(fd), 1e-12)

        for i in range(4):
            for j in range(3):
                wp, wm = m.weights.copy(), m.weights.copy()
                wp[i, j] += eps
                wm[i, j] -= eps
                fd = (mean_ll(wp, m.bias_visible, m.bias_hidden)
                      - mean_ll(wm, m.bias_visible, m.bias_hidden)) / (2 * eps)
                assert rel_err(dw[i, j], fd) < 1e-6
        for i in range(4):
            bp, bm = m.bias_visible.copy(), m.bias_visible.copy()
            bp[i] += eps
            bm[i] -= eps
            fd = (mean_ll(m.weights, bp, m.bias_hidden)
                  - mean_ll(m.weights, bm, m.bias_hidden)) / (2 * eps)
            assert rel_err(dbv[i], fd) < 1e-6
        for j in range(3):
            bp, bm = m.bias_hidden.copy(), m.bias_hidden.copy()
            bp[j] += eps
            bm[j] -= eps
            fd = (mean_ll(m.weights, m.bias_visible, bp)
                  - mean_ll(m.weights, m.bias_visible, bm)) / (2 * eps)
            assert rel_err(dbh[j], fd) < 1e-6


class TestTrainRbm:
    def test_exact_gradient_improves_monotonically(self):
        rng = np.random.default_rng(2)
        data = (rng.random((60, 4)) < rng.random(4)).astype(float)
        model = ce.init_rbm(4, 3, seed=2, scale=0.01)
        previous = ce.exact_log_likelihood_many(model, data).mean()
        for _ in range(50):
            model = ce.train_rbm(
                model, data,
                ce.TrainConfig(algorithm="exact-gradient", learning_rate=0.01,
                               n_epochs=1, seed=2),
            )
            current = ce.exact_log_likelihood_many(model, data).mean()
            assert current >= previous - 1e-6
            previous = current

    def test_exact_gradient_deterministic(self):
        rng = np.random.default_rng(3)
        data = (rng.random((40, 4)) < 0.5).astype(float)
        cfg = ce.TrainConfig(algorithm="exact-gradient", learning_rate=0.05,
                             n_epochs=20, seed=5)
        a = ce.train_rbm(ce.init_rbm(4, 2, seed=5, scale=0.01), data, cfg)
        b = ce.train_rbm(ce.init_rbm(4, 2, seed=5, scale=0.01), data, cfg)
        assert np.array_equal(a.weights, b.weights)

    def test_cd1_learns_all_zero_data(self):
        data = np.zeros((100, 6))
        model = ce.init_rbm(6, 3, seed=1, scale=0.01)
        cfg = ce.TrainConfig(algorithm="cd", k=1, learning_rate=0.2, n_epochs=40,
                             batch_size=20, seed=1)
        trained = ce.train_rbm(model, data, cfg)
        before = ce.cond_mean_x_given_h(model, np.zeros(3)).mean()
        after = ce.cond_mean_x_given_h(trained, np.zeros(3)).mean()
        assert after < before
        assert after < 0.1

    def test_pcd_runs_and_improves_likelihood(self):
        data = ce.make_synthetic("tiny-bars", {"n": 200, "noise": 0.02}, seed=4).vectors
        model = ce.init_rbm(16, 4, seed=4, scale=0.01)
        cfg = ce.TrainConfig(algorithm="pcd", k=1, learning_rate=0.1, n_epochs=30,
                             batch_size=20, seed=4)
        trained = ce.train_rbm(model, data, cfg)
        before = ce.exact_log_likelihood_many(model, data).mean()
        after = ce.exact_log_likelihood_many(trained, data).mean()
        assert after > before

    def test_parameters_stay_finite(self):
        data = np.zeros((20, 3))
        model = ce.init_rbm(3, 2, seed=0, scale=0.01)
        cfg = ce.TrainConfig(algorithm="cd", learning_rate=0.5, n_epochs=10,
                             batch_size=10, seed=0)
        trained = ce.train_rbm(model, data, cfg)
        assert np.isfinite(trained.weights).all()

    def test_empty_data_rejected(self):
        model = ce.init_rbm(3, 2, seed=0, scale=0.01)
        with pytest.raises(ValidationError):
            ce.train_rbm(model, np.zeros((0, 3)), ce.TrainConfig(algorithm="cd"))

    def test_unknown_algorithm_rejected(self):
        with pytest.raises(ValidationError):
            ce.TrainConfig(algorithm="sgd")


class TestFitGmm:
    def test_one_component_closed_form(self):
        rng = np.random.default_rng(5)
        data = rng.normal(1.5, 2.0, (500, 3))
        g = ce.fit_gmm(data, 1, seed=0, n_iters=5)
        assert_allclose(g.means[0], data.mean(axis=0), atol=1e-10)
        assert g.sigma**2 == pytest.approx(data.var(axis=0).mean(), abs=1e-10)
        assert g.log_weights[0] == 0.0

    def test_recovers_two_components(self):
        data = ce.make_synthetic(
            "gmm-blobs", {"n": 10_000, "means": [[-3.0], [3.0]], "sigma": 0.5}, seed=21
        )
        g = ce.fit_gmm(data.vectors, 2, seed=5, n_iters=200)
        recovered = sorted(g.means.ravel())
        assert abs(recovered[0] + 3.0) < 0.1
        assert abs(recovered[1] - 3.0) < 0.1
        assert abs(g.sigma - 0.5) < 0.05

    def test_em_step_never_decreases_likelihood(self, gmm_2comp_1d):
        data = ce.make_synthetic(
            "gmm-blobs",
            {"n": 500, "means": gmm_2comp_1d.means.tolist(), "sigma": gmm_2comp_1d.sigma},
            seed=6,
        )
        before = ce.exact_log_likelihood_many(gmm_2comp_1d, data.vectors).mean()
        stepped = ce.gmm_em_step(gmm_2comp_1d, data.vectors)
        after = ce.exact_log_likelihood_many(stepped, data.vectors).mean()
        assert after >= before - 1e-12

    def test_degenerate_data_collapses(self):
        with pytest.raises(NumericalError, match="component collapse"):
            ce.fit_gmm(np.zeros((50, 2)), 1, seed=0, n_iters=5)

    def test_needs_enough_points(self):
        with pytest.raises(ValidationError):
            ce.fit_gmm(np.zeros((2, 1)), 3, seed=0)
