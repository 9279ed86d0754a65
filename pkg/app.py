# v1.0.0 - Work Package 5: Command-Line Entry Point
"""
mixsinc command line: generate, fit, eval, cluster, export-curves, toy.

Every command takes its parameters from flags, optionally on top of a JSON
file given with --config (flags win). Exit code 0 means the command completed;
library errors map to the exit code of their class (see errors.py).
"""
import argparse
import json
import os
import sys
import traceback
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from pydantic import ValidationError

from console import log, set_quiet, warn
from controller import PipelineController, coupled_from_document, mixture_from_document
from dataset_manager import DatasetManager, sidecar_path
from errors import (
    DimensionMismatchError,
    IndexOutOfRangeError,
    InputFileError,
    InvalidArgumentError,
    MixSincError,
    ModelKindError,
)
from evaluate import (
    align_factors,
    append_sweep_row,
    clustering_accuracy,
    conditional_l1_error,
    discretize_truth,
    kl_monte_carlo,
    toy_curves,
    toy_kl_table,
)
from mixture import MixtureDensity, ParametricMixture, map_cluster
from models import (
    ClusterConfig,
    EvalConfig,
    EvalReport,
    ExportConfig,
    FitConfig,
    GenerateConfig,
    ModelDocument,
    SettingSpec,
    ToyConfig,
)
from synth import generate_dataset, make_setting, toy_mixture

# sweep-table method column per model document kind
METHOD_BY_KIND = {"coupled-sinc": "cpd", "diag-gmm": "em", "parametric": "truth"}


# --------------------------------------------------------------------------
# Configuration merging
# --------------------------------------------------------------------------
def _merge_config(args: argparse.Namespace, cls):
    """JSON file values, overridden by every flag the user actually gave."""
    base: Dict = {}
    if getattr(args, "config", None):
        if not os.path.exists(args.config):
            raise InputFileError(f"Config file not found: {args.config}")
        try:
            with open(args.config, "r", encoding="utf-8") as f:
                base = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise InputFileError(f"Cannot read config {args.config}: {e}") from e
    for name in cls.model_fields:
        value = getattr(args, name, None)
        if value is not None:
            base[name] = value
    return cls.model_validate(base)


def _print_summary(line: str):
    print(line, flush=True)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------
def cmd_generate(config: GenerateConfig) -> int:
    mix = make_setting(SettingSpec(family=config.family, N=config.n_vars, R=config.rank,
                                   seed=config.seed, alpha=config.alpha))
    data = generate_dataset(mix, config.samples, config.missing_rate, config.seed)
    manager = DatasetManager()
    manager.save_dataset(data, config.out)
    manager.save_document(mix.to_document(config=config.model_dump()), sidecar_path(config.out))
    _print_summary(f"generated {data.M} records x {data.N} variables -> {config.out}")
    return 0


def cmd_fit(config: FitConfig) -> int:
    manager = DatasetManager()
    data = manager.load_dataset(config.data)
    controller = PipelineController(config)

    if config.method == "em":
        model, trajectory = controller.fit_em(data)
        doc = model.to_document(config=config.model_dump(), trajectory=trajectory)
        doc = doc.model_copy(update={"samples": data.M})
        manager.save_document(doc, config.out)
        _print_summary(f"em fit: log-likelihood {trajectory[-1]:.6g} after {len(trajectory)} iterations -> {config.out}")
        return 0

    result = controller.fit_dataset(data)
    adv = result.advisory
    log("Advisory", f"N={adv.N}, I={adv.I}, R={adv.R}: kruskal_ok={adv.kruskal_ok}, "
                    f"theorem1_bound={adv.theorem1_bound}, alpha={adv.alpha}, "
                    f"theorem2_bound={adv.theorem2_bound}, quadratic_bound={adv.quadratic_bound:g}")
    manager.save_document(controller.document(result, samples=data.M), config.out)
    _print_summary(f"cpd fit: objective {result.final_objective:.6g} after {result.report.iterations} rounds "
                   f"(restart {result.report.selected_restart + 1}) -> {config.out}")
    return 0


def _load_model(manager: DatasetManager, path: str):
    return mixture_from_document(manager.load_document(path, ModelDocument))


def cmd_eval(config: EvalConfig) -> int:
    if config.model is None and config.labels is None:
        raise InvalidArgumentError("eval needs --model or --labels")
    manager = DatasetManager()
    truth = learned = None
    samples = None
    family = None
    method = "labels"
    if config.truth:
        truth_doc = manager.load_document(config.truth, ModelDocument)
        if truth_doc.kind != "parametric":
            raise ModelKindError(f"--truth must be a parametric document, got '{truth_doc.kind}'")
        truth = ParametricMixture.from_document(truth_doc)
        family = truth_doc.config.get("family") or truth_doc.conditionals[0][0].kind
    if config.model:
        model_doc = manager.load_document(config.model, ModelDocument)
        learned = mixture_from_document(model_doc)
        samples = model_doc.samples
        method = METHOD_BY_KIND[model_doc.kind]

    report = EvalReport(config=config.model_dump())

    if truth is not None and learned is not None:
        kl, stderr = kl_monte_carlo(truth, learned, config.mc_points, config.seed)
        report.kl_estimate, report.kl_stderr, report.test_size = kl, stderr, config.mc_points

    if config.data:
        data = manager.load_dataset(config.data)
        if data.labels is None:
            raise InvalidArgumentError(f"{config.data} has no 'label' column")
        if config.labels:
            predicted = manager.load_labels(config.labels)
        elif learned is not None:
            predicted = map_cluster(learned, data.values)
        else:
            raise InvalidArgumentError("Accuracy needs --labels or --model")
        R = truth.R if truth is not None else (learned.R if learned is not None else
                                               int(max(data.labels.max(), predicted.max())) + 1)
        accuracy, permutation = clustering_accuracy(data.labels, predicted, R)
        report.accuracy, report.permutation = accuracy, permutation.tolist()

    if truth is not None and learned is not None and truth.R == learned.R:
        if report.permutation is not None:
            permutation = np.asarray(report.permutation)
        elif isinstance(learned, MixtureDensity):
            # no labels: align on the factors
            model, edges = coupled_from_document(model_doc)
            permutation = align_factors(discretize_truth(truth, edges), model.factors)
            report.permutation = permutation.tolist()
        else:
            permutation = None
        if permutation is not None:
            report.l1_errors = conditional_l1_error(truth, learned, permutation, config.l1_points).tolist()

    manager.save_document(report, config.out)
    if config.table:
        append_sweep_row(config.table, {
            "family": family,
            "method": method,
            "samples": samples,
            "model": config.model,
            "kl": report.kl_estimate,
            "kl_stderr": report.kl_stderr,
            "accuracy": report.accuracy,
        })
    parts = []
    if report.kl_estimate is not None:
        parts.append(f"kl {report.kl_estimate:.6g} +- {report.kl_stderr:.2g}")
    if report.accuracy is not None:
        parts.append(f"accuracy {report.accuracy:.4f}")
    _print_summary(f"eval: {', '.join(parts) or 'no metrics'} -> {config.out}")
    return 0


def cmd_cluster(config: ClusterConfig) -> int:
    manager = DatasetManager()
    model = _load_model(manager, config.model)
    data = manager.load_dataset(config.data)
    if data.N != model.N:
        raise DimensionMismatchError(f"Model has {model.N} variables, dataset has {data.N}")
    labels = map_cluster(model, data.values)
    manager.save_labels(labels, config.out)
    _print_summary(f"clustered {data.M} records into {model.R} components -> {config.out}")
    return 0


def _check_index(value: int, upper: int, what: str):
    if not 1 <= value <= upper:
        raise IndexOutOfRangeError(f"{what} {value} outside 1..{upper}")


def cmd_export_curves(config: ExportConfig) -> int:
    manager = DatasetManager()
    model = _load_model(manager, config.model)
    _check_index(config.variable, model.N, "Variable")
    _check_index(config.component, model.R, "Component")
    n, r = config.variable - 1, config.component - 1
    estimate = model.conditional(n, r)
    lo, hi = estimate.support_range()

    true_cond = None
    if config.truth:
        truth = _load_model(manager, config.truth)
        if truth.N != model.N:
            raise DimensionMismatchError(f"Truth has {truth.N} variables, model has {model.N}")
        tr = config.truth_component if config.truth_component is not None else config.component
        _check_index(tr, truth.R, "Truth component")
        true_cond = truth.conditional(n, tr - 1)
        t_lo, t_hi = true_cond.support_range()
        lo, hi = min(lo, t_lo), max(hi, t_hi)

    xs = np.linspace(lo, hi, config.resolution)
    columns = {"x": xs}
    if true_cond is not None:
        columns["cdf_true"] = true_cond.cdf(xs)
    columns["cdf_est"] = estimate.cdf(xs)
    if true_cond is not None:
        columns["pdf_true"] = true_cond.pdf(xs)
    columns["pdf_est"] = estimate.pdf(xs)
    manager.save_table(pd.DataFrame(columns), config.out)
    _print_summary(f"exported {config.resolution} points of variable {config.variable}, "
                   f"component {config.component} -> {config.out}")
    return 0


def cmd_toy(config: ToyConfig) -> int:
    manager = DatasetManager()
    truth = toy_mixture()
    clip = (config.clip_lo, config.clip_hi)
    curves = toy_curves(truth.conditional(0, 0), config.bins, clip, config.sinc_pad, config.resolution)
    manager.save_table(curves, os.path.join(config.out_dir, "toy_curves.csv"))
    pdf_err = float(np.max(np.abs(curves["pdf_est"] - curves["pdf_true"])))
    cdf_err = float(np.max(np.abs(curves["cdf_est"] - curves["cdf_true"])))

    table = toy_kl_table(truth, config.sample_sizes, config.trials, config.bins, clip,
                         config.sinc_pad, config.mc_points, config.seed)
    manager.save_table(table, os.path.join(config.out_dir, "toy_kl.csv"))
    for M, group in table.groupby("samples"):
        wins = int((group["kl_sinc"] < group["kl_histogram"]).sum())
        log("Toy", f"M={int(M)}: sinc below histogram in {wins}/{len(group)} trials "
                   f"(mean KL {group['kl_sinc'].mean():.4g} vs {group['kl_histogram'].mean():.4g}).")
    _print_summary(f"toy: max pdf error {pdf_err:.3g}, max cdf error {cdf_err:.3g} -> {config.out_dir}")
    return 0


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------
def _add_clip(p: argparse.ArgumentParser):
    p.add_argument("--clip-lo", dest="clip_lo", type=float, help="Lower support quantile (default 0.005)")
    p.add_argument("--clip-hi", dest="clip_hi", type=float, help="Upper support quantile (default 0.995)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixsinc", description="Mixtures of smooth product distributions.")
    parser.add_argument("--quiet", action="store_true", help="Silence progress lines")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="Sample a synthetic dataset and its ground truth")
    p.add_argument("--config")
    p.add_argument("--family")
    p.add_argument("--n-vars", dest="n_vars", type=int)
    p.add_argument("--rank", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--missing-rate", dest="missing_rate", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("fit", help="Learn a model from a CSV dataset")
    p.add_argument("--config")
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--method", choices=["cpd", "em"])
    p.add_argument("--bins", type=int)
    p.add_argument("--rank", type=int)
    p.add_argument("--loss", choices=["kl", "fro"])
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-outer-iters", dest="max_outer_iters", type=int)
    p.add_argument("--inner-iters", dest="inner_iters", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--sinc-pad", dest="sinc_pad", type=int)
    p.add_argument("--conditional", choices=["sinc", "histogram"])
    p.add_argument("--em-max-iters", dest="em_max_iters", type=int)
    _add_clip(p)

    p = sub.add_parser("eval", help="KL, accuracy and L1 errors against the truth")
    p.add_argument("--config")
    p.add_argument("--truth")
    p.add_argument("--model")
    p.add_argument("--labels")
    p.add_argument("--data")
    p.add_argument("--mc-points", dest="mc_points", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--l1-points", dest="l1_points", type=int)
    p.add_argument("--out")
    p.add_argument("--table")

    p = sub.add_parser("cluster", help="MAP component of every record")
    p.add_argument("--config")
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--out")

    p = sub.add_parser("export-curves", help="CDF/PDF of one conditional on a uniform grid")
    p.add_argument("--config")
    p.add_argument("--model")
    p.add_argument("--out")
    p.add_argument("--variable", type=int)
    p.add_argument("--component", type=int)
    p.add_argument("--resolution", type=int)
    p.add_argument("--truth")
    p.add_argument("--truth-component", dest="truth_component", type=int)

    p = sub.add_parser("toy", help="Univariate toy example: curves and histogram vs sinc KL")
    p.add_argument("--config")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--bins", type=int)
    p.add_argument("--sinc-pad", dest="sinc_pad", type=int)
    p.add_argument("--sample-sizes", dest="sample_sizes", type=int, nargs="+")
    p.add_argument("--trials", type=int)
    p.add_argument("--mc-points", dest="mc_points", type=int)
    p.add_argument("--resolution", type=int)
    p.add_argument("--seed", type=int)
    _add_clip(p)
    return parser


COMMANDS = {
    "generate": (GenerateConfig, cmd_generate),
    "fit": (FitConfig, cmd_fit),
    "eval": (EvalConfig, cmd_eval),
    "cluster": (ClusterConfig, cmd_cluster),
    "export-curves": (ExportConfig, cmd_export_curves),
    "toy": (ToyConfig, cmd_toy),
}


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.quiet:
        set_quiet(True)

    config_cls, command = COMMANDS[args.command]
    try:
        config = _merge_config(args, config_cls)
        return command(config)
    except ValidationError as e:
        warn("Config", f"Invalid parameters for '{args.command}':\n{e}")
        return InvalidArgumentError.exit_code
    except MixSincError as e:
        warn(type(e).__name__, str(e))
        return e.exit_code
    except Exception as e:
        warn("Fatal", f"Unexpected failure: {e}")
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
