"""Command-line surface: train models, draw samples, evaluate, compare.

Exit codes: 0 success, 2 validation error, 3 numerical error, 4 I/O or
parse error. Every stochastic command takes ``--seed``; outputs are fully
determined by (inputs, flags, seed). ``--threads`` caps sampler parallelism
and never changes results; its default comes from the CSLEVAL_THREADS
environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .datasets import load_dataset, make_synthetic, save_dataset
from .errors import DataFormatError, NumericalError, ValidationError
from .estimators import (
    AisConfig,
    BiasedCslConfig,
    ais_log_likelihood,
    biased_csl_report,
    csl,
    exact_report,
    parzen_report,
    select_bandwidth,
    write_report_csv,
    write_report_json,
)
from .experiment import ExperimentSpec, compare_models, run_experiment
from .models import load_model, save_model
from .sampler import (
    ChainConfig,
    load_sample_set,
    run_chain,
    sample_set_ess,
    sample_visible_given_latents,
    save_sample_set,
)
from .training import TrainConfig, fit_gmm, init_rbm, train_rbm


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("CSLEVAL_THREADS", "1")))
    except ValueError:
        return 1


def _add_seed(p):
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")


def _emit_report(report, args) -> None:
    if getattr(args, "report", None):
        write_report_json(report, args.report)
    if getattr(args, "per_example", None):
        write_report_csv(report, args.per_example)
    print(
        f"{report.estimator_name}: mean_loglik={report.mean_loglik:.5f} "
        f"std_error={report.std_error:.5f} n={report.per_example_loglik.shape[0]}"
    )


def _load_test(args):
    data = load_dataset(args.test, threshold=args.threshold, split="test")
    xs = data.vectors
    if args.test_size is not None and xs.shape[0] > args.test_size:
        xs = xs[: args.test_size]
    return xs


def _parse_grid(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _parse_means(text):
    return [[float(v) for v in row.split(",")] for row in text.split(";") if row.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csleval",
                                     description="Sample-based log-likelihood evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-data", help="generate a synthetic dataset file")
    p.add_argument("generator", choices=("tiny-bars", "gmm-blobs"))
    p.add_argument("--out", required=True, help="output path (.npy or IDX)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.0, help="tiny-bars bit-flip rate")
    p.add_argument("--means", type=str, default=None,
                   help="gmm-blobs means, rows separated by ';' (e.g. '0,0;3,3')")
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--weights", type=str, default=None, help="comma-separated weights")
    _add_seed(p)

    p = sub.add_parser("train", help="train a model and write it as JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", choices=("rbm", "gmm"), default="rbm")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--n-hidden", type=int, default=5)
    p.add_argument("--algorithm", choices=("cd", "pcd", "exact-gradient"), default="cd")
    p.add_argument("--k", type=int, default=1, help="Gibbs steps per update")
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--init-scale", type=float, default=0.01)
    p.add_argument("--components", type=int, default=2, help="mixture components (gmm)")
    p.add_argument("--iters", type=int, default=100, help="EM iterations (gmm)")
    _add_seed(p)

    p = sub.add_parser("sample", help="run chains and write a latent sample set")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-samples", type=int, required=True)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--thin", type=int, default=100)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--visible-out", default=None,
                   help="also draw one observation per latent sample into this .npy")
    p.add_argument("--visible-seed", type=int, default=0)
    _add_seed(p)

    pe = sub.add_parser("eval", help="evaluate an estimator on a test set")
    esub = pe.add_subparsers(dest="estimator", required=True)

    def _eval_common(q, needs_model=True):
        if needs_model:
            q.add_argument("--model", required=True)
        q.add_argument("--test", required=True)
        q.add_argument("--threshold", type=float, default=0.5)
        q.add_argument("--test-size", type=int, default=None)
        q.add_argument("--report", default=None, help="write JSON summary here")
        q.add_argument("--per-example", default=None, help="write per-example CSV here")

    q = esub.add_parser("csl", help="latent-sample estimate from a sample-set file")
    _eval_common(q)
    q.add_argument("--samples", required=True, help="CSLS sample-set file")

    q = esub.add_parser("biased-csl", help="test-anchored short-chain estimate")
    _eval_common(q)
    q.add_argument("--chains", type=int, default=10)
    q.add_argument("--steps", type=int, default=30)
    _add_seed(q)

    q = esub.add_parser("parzen", help="kernel density baseline on generated samples")
    _eval_common(q, needs_model=False)
    q.add_argument("--gen", required=True, help="generated observations (.npy or IDX)")
    q.add_argument("--sigma", type=float, default=None)
    q.add_argument("--validation", default=None, help="select sigma on this set")
    q.add_argument("--grid", type=str, default=None, help="comma-separated sigma grid")

    q = esub.add_parser("ais", help="annealed importance sampling estimate")
    _eval_common(q)
    q.add_argument("--temperatures", type=int, default=1000)
    q.add_argument("--runs", type=int, default=100)
    q.add_argument("--schedule", choices=("linear", "geometric-tail"), default="linear")
    q.add_argument("--reference", default=None, help="data whose mean sets the base biases")
    _add_seed(q)

    q = esub.add_parser("exact", help="exact enumeration (small models only)")
    _eval_common(q)

    p = sub.add_parser("experiment", help="sample-count sweep with CSV table output")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--sweep", required=True, help="comma-separated sample counts")
    p.add_argument("--estimators", default="csl", help="comma-separated subset of csl,parzen")
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--thin", type=int, default=100)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--test-size", type=int, default=1000)
    p.add_argument("--validation", default=None)
    p.add_argument("--parzen-sigma", type=float, default=None)
    p.add_argument("--no-exact", action="store_true", help="skip the exact reference row")
    p.add_argument("--ais", action="store_true", help="append an AIS reference row")
    p.add_argument("--temperatures", type=int, default=1000)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--schedule", choices=("linear", "geometric-tail"), default="linear")
    p.add_argument("--threads", type=int, default=_default_threads())
    _add_seed(p)

    p = sub.add_parser("compare", help="rank models by the biased estimator")
    p.add_argument("--models", nargs="+", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--test-size", type=int, default=None)
    p.add_argument("--chains", type=int, default=10)
    p.add_argument("--steps", type=int, default=30)
    p.add_argument("--exact", action="store_true", help="include exact reference scores")
    p.add_argument("--ais", action="store_true", help="include AIS reference scores")
    p.add_argument("--temperatures", type=int, default=1000)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--report", default=None)
    _add_seed(p)

    p = sub.add_parser("ess", help="effective sample size of a sample-set file")
    p.add_argument("--model", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--report", default=None)

    return parser


def _cmd_make_data(args) -> int:
    if args.generator == "tiny-bars":
        params = {"n": args.n, "noise": args.noise}
    else:
        if args.means is None or args.sigma is None:
            raise ValidationError("gmm-blobs needs --means and --sigma")
        params = {"n": args.n, "means": _parse_means(args.means), "sigma": args.sigma}
        if args.weights is not None:
            params["weights"] = _parse_grid(args.weights)
    data = make_synthetic(args.generator, params, seed=args.seed)
    save_dataset(data, args.out)
    print(f"wrote {len(data)} x {data.dim} {data.kind} dataset to {args.out}")
    return 0


def _cmd_train(args) -> int:
    data = load_dataset(args.data, threshold=args.threshold)
    if args.model == "gmm":
        model = fit_gmm(data.vectors, args.components, seed=args.seed, n_iters=args.iters)
    else:
        config = TrainConfig(
            algorithm=args.algorithm,
            k=args.k,
            learning_rate=args.lr,
            n_epochs=args.epochs,
            batch_size=args.batch_size,
            seed=args.seed,
            weight_init_scale=args.init_scale,
        )
        model = init_rbm(data.dim, args.n_hidden, seed=args.seed, scale=args.init_scale)
        model = train_rbm(model, data.vectors, config)
    save_model(model, args.out)
    print(f"wrote model to {args.out}")
    return 0


def _cmd_sample(args) -> int:
    model = load_model(args.model)
    config = ChainConfig(
        n_samples=args.n_samples,
        burn_in=args.burn_in,
        thin=args.thin,
        n_chains=args.chains,
        seed=args.seed,
    )
    sample_set = run_chain(model, config, threads=args.threads)
    save_sample_set(sample_set, args.out)
    print(f"wrote {len(sample_set)} latent samples to {args.out}")
    if args.visible_out:
        xs = sample_visible_given_latents(model, sample_set, seed=args.visible_seed)
        np.save(args.visible_out, xs)
        print(f"wrote {xs.shape[0]} generated observations to {args.visible_out}")
    return 0


def _cmd_eval(args) -> int:
    if args.estimator == "parzen":
        gen = load_dataset(args.gen, threshold=args.threshold).vectors
        xs = load_dataset(args.test, threshold=args.threshold, split="test").vectors
        if args.test_size is not None and xs.shape[0] > args.test_size:
            xs = xs[: args.test_size]
        sigma = args.sigma
        if sigma is None:
            if args.validation is None:
                raise ValidationError("parzen needs --sigma or --validation for selection")
            vali = load_dataset(args.validation, threshold=args.threshold,
                                split="validation").vectors
            grid = _parse_grid(args.grid) if args.grid else None
            if grid:
                sigma, _ = select_bandwidth(gen, vali, grid)
            else:
                sigma, _ = select_bandwidth(gen, vali)
            print(f"selected sigma={sigma:.5g}")
        report = parzen_report(gen, sigma, xs)
        _emit_report(report, args)
        return 0

    model = load_model(args.model)
    xs = _load_test(args)
    if args.estimator == "csl":
        sample_set = load_sample_set(args.samples)
        report = csl(model, sample_set, xs)
    elif args.estimator == "biased-csl":
        config = BiasedCslConfig(n_chains=args.chains, n_steps=args.steps, seed=args.seed)
        report = biased_csl_report(model, xs, config)
    elif args.estimator == "ais":
        config = AisConfig(n_temperatures=args.temperatures, n_runs=args.runs,
                           schedule=args.schedule, seed=args.seed)
        reference = None
        if args.reference is not None:
            reference = load_dataset(args.reference, threshold=args.threshold).vectors
        report = ais_log_likelihood(model, xs, config, reference=reference)
    else:
        report = exact_report(model, xs)
    _emit_report(report, args)
    return 0


def _cmd_experiment(args) -> int:
    spec = ExperimentSpec(
        model_path=args.model,
        test_path=args.test,
        output_dir=args.out,
        sweep=tuple(int(v) for v in args.sweep.split(",") if v.strip()),
        estimators=tuple(e.strip() for e in args.estimators.split(",") if e.strip()),
        seed=args.seed,
        burn_in=args.burn_in,
        thin=args.thin,
        n_chains=args.chains,
        threshold=args.threshold,
        test_size=args.test_size,
        validation_path=args.validation,
        parzen_sigma=args.parzen_sigma,
        include_exact=not args.no_exact,
        include_ais=args.ais,
        ais_temperatures=args.temperatures,
        ais_runs=args.runs,
        ais_schedule=args.schedule,
        threads=args.threads,
    )
    result = run_experiment(spec)
    print(f"wrote {result['csv_path']} and {result['manifest_path']}")
    return 0


def _cmd_compare(args) -> int:
    xs = _load_test(args)
    config = BiasedCslConfig(n_chains=args.chains, n_steps=args.steps, seed=args.seed)
    ais_config = AisConfig(n_temperatures=args.temperatures, n_runs=args.runs, seed=args.seed)
    result = compare_models(
        args.models, xs, config,
        include_exact=args.exact, include_ais=args.ais, ais_config=ais_config,
    )
    for i, path in enumerate(result["models"]):
        line = f"{path}: biased_csl={result['biased_csl'][i]:.5f}"
        if "exact" in result:
            line += f" exact={result['exact'][i]:.5f}"
        if "ais" in result:
            line += f" ais={result['ais'][i]:.5f}"
        print(line)
    if "spearman" in result:
        print(f"spearman={result['spearman']:.5f}")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(result, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _cmd_ess(args) -> int:
    model = load_model(args.model)
    sample_set = load_sample_set(args.samples)
    result = sample_set_ess(model, sample_set)
    print(f"ess_total={result['total']:.2f} over {len(result['per_chain'])} chain(s)")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(result, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


_HANDLERS = {
    "make-data": _cmd_make_data,
    "train": _cmd_train,
    "sample": _cmd_sample,
    "eval": _cmd_eval,
    "experiment": _cmd_experiment,
    "compare": _cmd_compare,
    "ess": _cmd_ess,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except (DataFormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
