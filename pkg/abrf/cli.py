"""
Command-line entry point.

    python -m abrf.cli run      --dataset Yacht --model abrf1-qp --condition 2
    python -m abrf.cli grid     --generator friedman2 --model abrf1-qp --eps-grid 0,0.5,1
    python -m abrf.cli fit      --dataset train.csv --model abrf3 --out models/yacht
    python -m abrf.cli predict  --model-dir models/yacht --input new.csv --output pred.csv
    python -m abrf.cli kde      --model-dir models/yacht --input new.csv --row 0 --output kde.csv
    python -m abrf.cli gen      --kind friedman1 --n 100 --output friedman1.csv
    python -m abrf.cli datasets

Failures print {"error": <class>, "message": <text>} on stderr and exit with
2 (configuration, dataset or schema problems) or 1 (anything else).
"""

import argparse
import json
import sys
from pathlib import Path

from abrf import config, console
from abrf.attention import MODELS
from abrf.catalog import describe_catalog
from abrf.data import GENERATORS, generate
from abrf.errors import AbrfError, ConfigError, DatasetError, SchemaMismatchError
from abrf.experiment import ExperimentConfig, cmd_grid, cmd_run, load_dataset
from abrf.forest import ENSEMBLES
from abrf.metrics import F1_AVERAGES
from abrf.model_io import cmd_fit, cmd_kde, cmd_predict

USER_ERRORS = (ConfigError, DatasetError, SchemaMismatchError)


def float_list(text):
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def name_list(text):
    return [part.strip() for part in text.split(",") if part.strip()]


def _add_dataset_options(parser):
    group = parser.add_argument_group("data")
    group.add_argument("--dataset", help="catalog name or CSV path")
    group.add_argument("--target", help="target column name or index (default: last column)")
    group.add_argument("--task", choices=["regression", "classification"])
    group.add_argument("--generator", choices=sorted(GENERATORS), help="generate data instead of reading it")
    group.add_argument("--n", type=int, default=None, help="generated sample size")
    group.add_argument("--noise-sd", type=float, default=None, help="generator noise standard deviation")
    group.add_argument("--data-dir", help=f"catalog file directory (default {config.DATA_DIR})")
    group.add_argument("--one-hot", action="store_true", default=None, help="one-hot encode categorical columns")
    group.add_argument("--minmax", action="store_true", default=None, help="min-max scale features to [0, 1]")


def _add_forest_options(parser):
    group = parser.add_argument_group("forest")
    group.add_argument("--ensemble", choices=ENSEMBLES)
    group.add_argument("--condition", help="1, 2, max_depth=<d> or min_leaf=<q>")
    group.add_argument("--n-trees", type=int)
    group.add_argument("--max-features", type=int)


def _add_model_options(parser):
    group = parser.add_argument_group("model")
    group.add_argument("--model", choices=MODELS)
    group.add_argument("--eps-grid", type=float_list)
    group.add_argument("--tau-grid", type=float_list)
    group.add_argument("--softmax-sign", type=int, choices=[-1, 1])
    group.add_argument("--learning-rate", type=float)
    group.add_argument("--max-iters", type=int)
    group.add_argument("--tolerance", type=float)
    group.add_argument("--f1-average", choices=F1_AVERAGES)
    group.add_argument("--train-params", type=name_list,
                       help="abrf2/abrf3 vectors to train, e.g. v,z or w (default: all of them)")


def build_parser():
    parser = argparse.ArgumentParser(prog="abrf", description="Attention-based random forests")
    parser.add_argument("--quiet", action="store_true", help="no progress output")
    commands = parser.add_subparsers(dest="command", required=True)

    for name, text in (("run", "repeated train/test evaluation"), ("grid", "(epsilon, tau) metric surface")):
        sub = commands.add_parser(name, help=text)
        sub.add_argument("--config", help="JSON file of settings; flags override it")
        _add_dataset_options(sub)
        _add_forest_options(sub)
        _add_model_options(sub)
        sub.add_argument("--repetitions", type=int)
        sub.add_argument("--train-fraction", type=float)
        sub.add_argument("--inner-train-fraction", type=float,
                         help="share of the training side that trains each grid cell; the rest scores it (default 0.8)")
        sub.add_argument("--seed", type=int)
        sub.add_argument("--workers", type=int)
        sub.add_argument("--output", help="output path stem (default under ABRF_REPORTS_DIR)")

    fit = commands.add_parser("fit", help="train a model and save it to a directory")
    fit.add_argument("--config", help="JSON file of settings; flags override it")
    _add_dataset_options(fit)
    _add_forest_options(fit)
    _add_model_options(fit)
    fit.add_argument("--epsilon", type=float)
    fit.add_argument("--tau", type=float)
    fit.add_argument("--seed", type=int)
    fit.add_argument("--out", required=True, help="model directory")
    fit.add_argument("--weights-only", action="store_true", help="reuse the saved forest, retrain weights")
    fit.add_argument("--trace", help="write the solver trace CSV here")

    predict = commands.add_parser("predict", help="predict with a saved model")
    predict.add_argument("--model-dir", required=True)
    predict.add_argument("--input", required=True)
    predict.add_argument("--output", required=True)

    kde = commands.add_parser("kde", help="KDE of one instance's attention weights")
    kde.add_argument("--model-dir", required=True)
    kde.add_argument("--input", required=True)
    kde.add_argument("--row", type=int, default=0)
    kde.add_argument("--points", type=int, default=601)
    kde.add_argument("--output", required=True)

    gen = commands.add_parser("gen", help="write a synthetic benchmark to CSV")
    gen.add_argument("--kind", choices=sorted(GENERATORS), required=True)
    gen.add_argument("--n", type=int, default=100)
    gen.add_argument("--m", type=int, help="feature count (regression/sparse only)")
    gen.add_argument("--noise-sd", type=float, default=0.0)
    gen.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    gen.add_argument("--output", required=True)

    datasets = commands.add_parser("datasets", help="list the benchmark catalog")
    datasets.add_argument("--data-dir")
    return parser


def _target(text):
    if text is None:
        return None
    try:
        return int(text)
    except ValueError:
        return text


def experiment_config(args) -> ExperimentConfig:
    """Flags over the optional --config file."""
    fields = {
        "dataset": args.dataset,
        "target": _target(args.target),
        "task": args.task,
        "one_hot": args.one_hot,
        "data_dir": args.data_dir,
        "minmax": args.minmax,
        "ensemble": args.ensemble,
        "condition": args.condition,
        "model": args.model,
        "n_trees": args.n_trees,
        "max_features": args.max_features,
        "eps_grid": args.eps_grid,
        "tau_grid": args.tau_grid,
        "softmax_sign": args.softmax_sign,
        "f1_average": args.f1_average,
        "learning_rate": args.learning_rate,
        "max_iters": args.max_iters,
        "tolerance": args.tolerance,
        "train_params": args.train_params,
        "seed": args.seed,
    }
    for key in ("repetitions", "train_fraction", "inner_train_fraction", "workers", "output"):
        if hasattr(args, key):
            fields[key] = getattr(args, key)
    if args.generator:
        spec = {"kind": args.generator}
        if args.n is not None:
            spec["n"] = args.n
        if args.noise_sd is not None:
            spec["noise_sd"] = args.noise_sd
        fields["generator"] = spec
    if args.config:
        return ExperimentConfig.from_file(args.config, **fields)
    return ExperimentConfig(**fields)


def run_fit(args):
    cfg = experiment_config(args)
    ds = load_dataset(cfg)
    eps_grid, tau_grid = cfg.resolved_grids(ds.task)
    return cmd_fit(ds, cfg.model, args.out, forest_config=cfg.forest_config(cfg.seed),
                   epsilon=args.epsilon, tau=args.tau, weights_only=args.weights_only,
                   softmax_sign=cfg.softmax_sign, grad_config=cfg.grad_config(),
                   eps_grid=eps_grid, tau_grid=tau_grid, trace_path=args.trace, seed=cfg.seed)


def run_gen(args):
    options = {} if args.m is None else {"m": args.m}
    ds = generate(args.kind, n=args.n, noise_sd=args.noise_sd, seed=args.seed, **options)
    path = Path(args.output)
    path.parent.mkdir(parents=True, exist_ok=True)
    ds.to_frame().to_csv(path, index=False, float_format="%.12g", lineterminator="\n")
    console.say(f"✅ {args.kind}: n={ds.n} m={ds.m} → {path}")
    return path


def dispatch(args):
    if args.command == "run":
        return cmd_run(experiment_config(args))
    if args.command == "grid":
        return cmd_grid(experiment_config(args))
    if args.command == "fit":
        return run_fit(args)
    if args.command == "predict":
        return cmd_predict(args.model_dir, args.input, args.output)
    if args.command == "kde":
        return cmd_kde(args.model_dir, args.input, args.output, row=args.row, points=args.points)
    if args.command == "gen":
        return run_gen(args)
    return describe_catalog(data_dir=args.data_dir)


def report_error(exc):
    console.fail(str(exc))
    print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.quiet:
        console.set_verbose(False)
    try:
        dispatch(args)
    except AbrfError as exc:
        report_error(exc)
        return 2 if isinstance(exc, USER_ERRORS) else 1
    except Exception as exc:
        report_error(exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
