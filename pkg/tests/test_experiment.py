"""Sweep experiments and model comparison reports."""

import json

import numpy as np
import pytest

import csleval as ce
from csleval.errors import ValidationError


@pytest.fixture()
def workdir(tmp_path, rbm_tiny):
    ce.save_model(rbm_tiny, tmp_path / "model.json")
    rng = np.random.default_rng(1)
    test = ce.Dataset(vectors=(rng.random((40, 4)) < 0.5).astype(float), kind="binary",
                      split="test")
    ce.save_dataset(test, tmp_path / "test.npy")
    return tmp_path


def make_spec(workdir, out="run", **kwargs):
    defaults = dict(
        model_path=str(workdir / "model.json"),
        test_path=str(workdir / "test.npy"),
        output_dir=str(workdir / out),
        sweep=(20, 40),
        estimators=("csl",),
        seed=5,
        burn_in=10,
        thin=2,
        n_chains=2,
        include_exact=True,
        include_ais=True,
        ais_temperatures=50,
        ais_runs=10,
    )
    defaults.update(kwargs)
    return ce.ExperimentSpec(**defaults)


class TestExperimentSpec:
    def test_sweep_must_increase(self, workdir):
        with pytest.raises(ValidationError, match="strictly increasing"):
            make_spec(workdir, sweep=(40, 20))

    def test_empty_estimators_rejected(self, workdir):
        with pytest.raises(ValidationError, match="estimator selection"):
            make_spec(workdir, estimators=())

    def test_unknown_estimator_rejected(self, workdir):
        with pytest.raises(ValidationError, match="unknown estimator"):
            make_spec(workdir, estimators=("magic",))

    def test_sweep_chain_divisibility(self, workdir):
        with pytest.raises(ValidationError, match="divisible"):
            make_spec(workdir, sweep=(30,), n_chains=4)


class TestRunExperiment:
    def test_table_structure(self, workdir):
        result = ce.run_experiment(make_spec(workdir, estimators=("csl", "parzen"),
                                             parzen_sigma=1.0))
        lines = (workdir / "run" / "table.csv").read_text().strip().splitlines()
        assert lines[0] == "n_samples,csl,parzen"
        assert len(lines) == 1 + 2 + 2  # header, two sweep rows, exact + ais
        assert lines[1].startswith("20,") and lines[2].startswith("40,")
        assert lines[3].startswith("exact,") and lines[4].startswith("ais,")
        manifest = json.loads((workdir / "run" / "manifest.json").read_text())
        assert manifest["n_test"] == 40
        assert [row["n_samples"] for row in manifest["rows"]] == [20, 40]

    def test_rerun_byte_identical(self, workdir):
        spec = make_spec(workdir, out="a")
        ce.run_experiment(spec)
        first_csv = (workdir / "a" / "table.csv").read_bytes()
        first_manifest = (workdir / "a" / "manifest.json").read_bytes()
        ce.run_experiment(spec)
        assert (workdir / "a" / "table.csv").read_bytes() == first_csv
        assert (workdir / "a" / "manifest.json").read_bytes() == first_manifest

    def test_sweep_prefix_matches_independent_run(self, workdir):
        full = ce.run_experiment(make_spec(workdir, out="full"))
        short = ce.run_experiment(make_spec(workdir, out="short", sweep=(20,)))
        assert full["rows"][0]["csl"] == short["rows"][0]["csl"]

    def test_csl_values_sane(self, workdir, rbm_tiny):
        result = ce.run_experiment(make_spec(workdir, sweep=(200, 400), burn_in=100))
        test = ce.load_dataset(workdir / "test.npy")
        exact = ce.exact_log_likelihood_many(rbm_tiny, test.vectors).mean()
        assert abs(result["footer"]["exact"] - exact) < 1e-9
        assert abs(result["rows"][1]["csl"] - exact) < 0.5


class TestSpearman:
    def test_perfect_agreement(self):
        assert ce.spearman_rank_correlation([1, 2, 3], [10, 20, 30]) == 1.0

    def test_perfect_reversal(self):
        assert ce.spearman_rank_correlation([1, 2, 3], [3, 2, 1]) == -1.0

    def test_constant_scores_convention(self):
        assert ce.spearman_rank_correlation([1.0, 1.0], [2.0, 2.0]) == 1.0


class TestCompareModels:
    def test_identical_models_tie(self, workdir, rbm_tiny):
        ce.save_model(rbm_tiny, workdir / "m2.json")
        xs = ce.load_dataset(workdir / "test.npy").vectors
        result = ce.compare_models(
            [workdir / "model.json", workdir / "m2.json"],
            xs,
            ce.BiasedCslConfig(n_chains=2, n_steps=3, seed=1),
            include_exact=True,
        )
        assert result["biased_csl"][0] == result["biased_csl"][1]
        assert result["spearman"] == 1.0

    def test_single_model_rejected(self, workdir):
        with pytest.raises(ValidationError, match="at least 2"):
            ce.compare_models([workdir / "model.json"], np.zeros((1, 4)),
                              ce.BiasedCslConfig())

    def test_mixed_dimensions_rejected(self, workdir):
        other = ce.RbmModel(np.zeros((6, 2)), np.zeros(6), np.zeros(2))
        ce.save_model(other, workdir / "wide.json")
        with pytest.raises(ValidationError, match="mixed"):
            ce.compare_models(
                [workdir / "model.json", workdir / "wide.json"],
                np.zeros((1, 4)),
                ce.BiasedCslConfig(),
            )

    def test_ranking_orders_by_biased_score(self, workdir, rbm_tiny):
        # a clearly broken model (huge wrong biases) scores below the real one
        bad = ce.RbmModel(rbm_tiny.weights, rbm_tiny.bias_visible - 8.0, rbm_tiny.bias_hidden)
        ce.save_model(bad, workdir / "bad.json")
        xs = ce.load_dataset(workdir / "test.npy").vectors[:10]
        result = ce.compare_models(
            [workdir / "bad.json", workdir / "model.json"],
            xs,
            ce.BiasedCslConfig(n_chains=4, n_steps=10, seed=2),
            include_exact=True,
        )
        assert result["ranking"][0] == str(workdir / "model.json")
        assert result["spearman"] == 1.0
