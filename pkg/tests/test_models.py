"""Model oracles: energies, conditionals, enumeration, serialization."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

import csleval as ce
from csleval.errors import IntractableModelError, ValidationError

LOG2 = math.log(2.0)


def random_rbm(seed, nv=3, nh=2, scale=1.0):
    rng = np.random.default_rng(seed)
    return ce.RbmModel(
        weights=rng.normal(0, scale, (nv, nh)),
        bias_visible=rng.normal(0, scale, nv),
        bias_hidden=rng.normal(0, scale, nh),
    )


def all_bits(n):
    return np.array(list(itertools.product([0, 1], repeat=n)), dtype=float)


class TestRbmEnergy:
    def test_zero_model_zero_config(self):
        m = ce.RbmModel(np.zeros((2, 2)), np.zeros(2), np.zeros(2))
        assert ce.rbm_energy(m, [0, 0], [0, 0]) == 0.0

    def test_linear_terms_only(self):
        m = ce.RbmModel(np.zeros((2, 1)), [1.0, -1.0], [0.5])
        assert ce.rbm_energy(m, [1, 1], [1]) == pytest.approx(-0.5)

    @settings(deadline=None, max_examples=30)
    @given(st.integers(0, 10_000))
    def test_matches_scalar_loop(self, seed):
        m = random_rbm(seed, nv=3, nh=2)
        rng = np.random.default_rng(seed + 1)
        v = (rng.random(3) < 0.5).astype(float)
        h = (rng.random(2) < 0.5).astype(float)
        expected = 0.0
        for i in range(3):
            for j in range(2):
                expected -= v[i] * m.weights[i, j] * h[j]
        expected -= sum(m.bias_visible[i] * v[i] for i in range(3))
        expected -= sum(m.bias_hidden[j] * h[j] for j in range(2))
        assert ce.rbm_energy(m, v, h) == pytest.approx(expected, abs=1e-12)

    def test_dimension_mismatch(self):
        m = random_rbm(0)
        with pytest.raises(ValidationError):
            ce.rbm_energy(m, [0, 1], [0, 1])


class TestLogPxGivenH:
    def test_zero_rbm_is_uniform(self):
        m = ce.RbmModel(np.zeros((3, 2)), np.zeros(3), np.zeros(2))
        for x in ([0, 0, 0], [1, 0, 1]):
            assert ce.log_p_x_given_h(m, x, [0, 1]) == pytest.approx(-3 * LOG2, abs=1e-12)

    def test_sigmoid_hand_case(self):
        m = ce.RbmModel([[1.0], [-1.0]], [0.5, -0.5], [0.0])
        expected = 2 * math.log(1.0 / (1.0 + math.exp(-1.5)))
        assert ce.log_p_x_given_h(m, [1, 0], [1]) == pytest.approx(expected, abs=1e-12)

    def test_gmm_standard_normal_at_mode(self):
        g = ce.GmmModel(log_weights=[0.0], means=[[0.0]], sigma=1.0)
        assert ce.log_p_x_given_h(g, [0.0], 0) == pytest.approx(-0.5 * math.log(2 * math.pi))

    def test_rbm_value_nonpositive(self):
        m = random_rbm(3)
        assert ce.log_p_x_given_h(m, [1, 1, 0], [1, 0]) <= 0.0

    def test_matrix_matches_scalar(self):
        m = random_rbm(5, nv=4, nh=3)
        rng = np.random.default_rng(9)
        xs = (rng.random((6, 4)) < 0.5).astype(float)
        hs = (rng.random((5, 3)) < 0.5).astype(float)
        mat = ce.log_p_x_given_h_many(m, xs, hs)
        for i in range(6):
            for s in range(5):
                assert mat[i, s] == pytest.approx(ce.log_p_x_given_h(m, xs[i], hs[s]), abs=1e-10)

    def test_extreme_logits_stay_finite(self):
        # softplus form: no sigmoid is ever logged, so +-500 logits are safe
        m = ce.RbmModel(np.full((2, 1), 500.0), [-500.0, 500.0], [0.0])
        value = ce.log_p_x_given_h(m, [0, 1], [1])
        assert np.isfinite(value)


class TestConditionalMeans:
    def test_zero_model_half(self):
        m = ce.RbmModel(np.zeros((3, 2)), np.zeros(3), np.zeros(2))
        assert_allclose(ce.cond_mean_h_given_x(m, [1, 0, 1]), 0.5)
        assert_allclose(ce.cond_mean_x_given_h(m, [1, 0]), 0.5)

    def test_zero_weights_bias_only(self):
        from scipy.special import expit

        m = ce.RbmModel(np.zeros((2, 2)), [1.0, -2.0], [0.3, 0.7])
        for x in all_bits(2):
            assert_allclose(ce.cond_mean_h_given_x(m, x), expit([0.3, 0.7]))
            assert_allclose(ce.cond_mean_x_given_h(m, x), expit([1.0, -2.0]))

    def test_matches_scalar_sigmoid_both_loop_orders(self):
        m = random_rbm(11, nv=4, nh=3)
        x = np.array([1.0, 0.0, 1.0, 1.0])
        got = ce.cond_mean_h_given_x(m, x)
        for j in range(3):
            a_ij = sum(m.weights[i, j] * x[i] for i in range(4)) + m.bias_hidden[j]
            a_ji = m.bias_hidden[j]
            for i in range(4):
                a_ji += x[i] * m.weights[i, j]
            assert abs(got[j] - 1.0 / (1.0 + math.exp(-a_ij))) < 1e-12
            assert abs(got[j] - 1.0 / (1.0 + math.exp(-a_ji))) < 1e-12

    def test_outputs_in_unit_interval(self):
        m = random_rbm(13)
        p = ce.cond_mean_h_given_x(m, [1, 0, 1])
        assert np.all(p > 0) and np.all(p < 1)


class TestExactLogZ:
    def test_zero_model(self):
        m = ce.RbmModel(np.zeros((2, 3)), np.zeros(2), np.zeros(3))
        assert ce.exact_log_z(m) == pytest.approx(5 * LOG2, abs=1e-12)

    def test_zero_weights_factorizes(self):
        rng = np.random.default_rng(2)
        bv, bh = rng.normal(0, 1, 3), rng.normal(0, 1, 2)
        m = ce.RbmModel(np.zeros((3, 2)), bv, bh)
        expected = np.logaddexp(0, bv).sum() + np.logaddexp(0, bh).sum()
        assert ce.exact_log_z(m) == pytest.approx(expected, abs=1e-10)

    def test_dual_enumeration_agrees(self):
        m = random_rbm(17, nv=4, nh=3)
        # independent oracle: enumerate the visible side by explicit loops
        terms = []
        for v in itertools.product([0, 1], repeat=4):
            v = np.array(v, dtype=float)
            t = m.bias_visible @ v
            for j in range(3):
                t += np.logaddexp(0.0, m.weights[:, j] @ v + m.bias_hidden[j])
            terms.append(t)
        from scipy.special import logsumexp

        assert ce.exact_log_z(m) == pytest.approx(float(logsumexp(terms)), abs=1e-9)

    def test_intractable_raises(self):
        m = ce.RbmModel(np.zeros((26, 30)), np.zeros(26), np.zeros(30))
        with pytest.raises(IntractableModelError, match="intractable"):
            ce.exact_log_z(m)


class TestExactLogLikelihood:
    def test_zero_rbm_uniform(self):
        m = ce.RbmModel(np.zeros((4, 2)), np.zeros(4), np.zeros(2))
        assert ce.exact_log_likelihood(m, [1, 0, 1, 0]) == pytest.approx(-4 * LOG2, abs=1e-12)

    def test_gmm_two_term_hand_computation(self):
        g = ce.gmm_from_weights([1.0, 1.0], [[1.0], [-1.0]], 1.0)
        expected = math.log(math.exp(-0.5) / math.sqrt(2 * math.pi))
        assert ce.exact_log_likelihood(g, [0.0]) == pytest.approx(expected, abs=1e-12)

    def test_probabilities_sum_to_one(self, rbm_tiny):
        ll = ce.exact_log_likelihood_many(rbm_tiny, all_bits(4))
        assert np.exp(ll).sum() == pytest.approx(1.0, abs=1e-9)

    def test_two_factorizations_agree(self, rbm_tiny):
        # logsumexp_h [log P(h) + log P(x|h)] with P(h) enumerated explicitly
        from scipy.special import logsumexp

        log_z = ce.exact_log_z(rbm_tiny)
        hs = all_bits(3)
        log_ph = -ce.hidden_free_energy_many(rbm_tiny, hs) - log_z
        for x in all_bits(4)[::3]:
            terms = log_ph + np.array([ce.log_p_x_given_h(rbm_tiny, x, h) for h in hs])
            assert ce.exact_log_likelihood(rbm_tiny, x) == pytest.approx(
                float(logsumexp(terms)), abs=1e-9
            )

    def test_one_component_gmm_equals_conditional(self):
        g = ce.GmmModel(log_weights=[0.0], means=[[0.3, -0.7]], sigma=0.5)
        x = np.array([0.1, 0.2])
        assert ce.exact_log_likelihood(g, x) == ce.log_p_x_given_h(g, x, 0)


class TestModelValidation:
    def test_nonfinite_rejected(self):
        with pytest.raises(ValidationError, match="nonfinite"):
            ce.RbmModel(np.full((2, 2), np.nan), np.zeros(2), np.zeros(2))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            ce.RbmModel(np.zeros((2, 2)), np.zeros(3), np.zeros(2))

    def test_gmm_unnormalized_rejected(self):
        with pytest.raises(ValidationError, match="normalized"):
            ce.GmmModel(log_weights=[0.0, 0.0], means=[[0.0], [1.0]], sigma=1.0)

    def test_gmm_bad_sigma_rejected(self):
        with pytest.raises(ValidationError):
            ce.GmmModel(log_weights=[0.0], means=[[0.0]], sigma=0.0)

    def test_models_are_read_only(self):
        m = random_rbm(1)
        with pytest.raises(ValueError):
            m.weights[0, 0] = 1.0


class TestSerialization:
    def test_rbm_round_trip_exact(self):
        m = random_rbm(23, nv=5, nh=4)
        back = ce.model_from_json(ce.model_to_json(m))
        assert np.array_equal(back.weights, m.weights)
        assert np.array_equal(back.bias_visible, m.bias_visible)
        assert np.array_equal(back.bias_hidden, m.bias_hidden)

    def test_gmm_round_trip_exact(self):
        rng = np.random.default_rng(29)
        g = ce.gmm_from_weights(rng.random(3) + 0.1, rng.normal(0, 1, (3, 2)), 0.37)
        back = ce.model_from_json(ce.model_to_json(g))
        assert np.array_equal(back.log_weights, g.log_weights)
        assert np.array_equal(back.means, g.means)
        assert back.sigma == g.sigma

    def test_seventeen_significant_digits(self):
        m = ce.RbmModel([[0.1]], [0.2], [0.3])
        text = ce.model_to_json(m)
        assert "0.10000000000000001" in text  # repr of 0.1 at 17 significant digits

    def test_file_round_trip(self, tmp_path):
        m = random_rbm(31)
        path = tmp_path / "model.json"
        ce.save_model(m, path)
        back = ce.load_model(path)
        assert np.array_equal(back.weights, m.weights)

    def test_unknown_type_rejected(self):
        with pytest.raises(ValidationError, match="unknown model type"):
            ce.model_from_json('{"type": "vae"}')
