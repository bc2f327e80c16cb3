"""
Run the evaluation over many catalog datasets at once.

    python pipeline/run_benchmarks.py                      # every available dataset
    python pipeline/run_benchmarks.py Yacht Friedman2      # just these
    python pipeline/run_benchmarks.py --task classification --model abrf3

Each dataset is one cmd_run; datasets run concurrently (gather_threads) and
a failure on one does not stop the others. --rep-workers gives each run its
own worker processes for the repetitions. Reports land in
ABRF_REPORTS_DIR/<run name>/.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from abrf import config, console  # noqa: E402
from abrf.attention import MODELS  # noqa: E402
from abrf.catalog import DatasetCatalog  # noqa: E402
from abrf.experiment import ExperimentConfig, cmd_run  # noqa: E402
from abrf.forest import ENSEMBLES  # noqa: E402
from abrf.parallel import gather_threads  # noqa: E402


def run_single_dataset(name, settings, output_dir):
    """
    One evaluation run.
    Returns: (success: bool, dataset: str, paths or error text)
    """
    try:
        console.say(f"Processing: {name}...")
        stem = output_dir / f"{name}_{settings['model']}_{settings['ensemble']}_c{settings['condition']}"
        cfg = ExperimentConfig(dataset=name, output=stem, **settings)
        paths = cmd_run(cfg)
        console.say(f"  ✓ {name}: {paths['csv']}")
        return (True, name, paths)
    except Exception as e:
        console.say(f"  ✗ {name}: Error - {e}")
        return (False, name, str(e))


def run_benchmarks(names, settings, output_dir, workers):
    """(success, name, paths or error) per dataset, in the order of `names`."""
    return gather_threads(lambda name: run_single_dataset(name, settings, output_dir), names, limit=workers)


def select_datasets(catalog, names, task, data_dir):
    if names:
        return [catalog.get(name).name for name in names]
    available = catalog.availability(data_dir)
    chosen = [e.name for e in catalog.by_task(task) if available[e.name]]
    skipped = [e.name for e in catalog.by_task(task) if not available[e.name]]
    if skipped:
        console.warn(f"Skipping datasets without files under {data_dir or config.DATA_DIR}: {', '.join(skipped)}")
    return chosen


def main(argv=None):
    parser = argparse.ArgumentParser(description="Run the evaluation over catalog datasets")
    parser.add_argument("datasets", nargs="*", help="catalog names (default: every available one)")
    parser.add_argument("--task", choices=["regression", "classification"])
    parser.add_argument("--model", choices=MODELS, default="abrf1-qp")
    parser.add_argument("--ensemble", choices=ENSEMBLES, default="rf")
    parser.add_argument("--condition", type=int, choices=[1, 2], default=2)
    parser.add_argument("--repetitions", type=int, default=100)
    parser.add_argument("--n-trees", type=int, default=config.DEFAULT_N_TREES)
    parser.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    parser.add_argument("--data-dir")
    parser.add_argument("--workers", type=int, default=config.WORKERS, help="datasets run at once")
    parser.add_argument("--rep-workers", type=int, default=1, help="worker processes per dataset run")
    parser.add_argument("--name", default="benchmarks", help="sub-directory of ABRF_REPORTS_DIR")
    args = parser.parse_args(argv)

    catalog = DatasetCatalog()
    names = select_datasets(catalog, args.datasets, args.task, args.data_dir)
    if args.model == "abrf1-lp":
        names = [n for n in names if catalog.get(n).task == "regression"]
    output_dir = config.REPORTS_DIR / args.name
    output_dir.mkdir(parents=True, exist_ok=True)

    settings = {
        "model": args.model,
        "ensemble": args.ensemble,
        "condition": args.condition,
        "repetitions": args.repetitions,
        "n_trees": args.n_trees,
        "seed": args.seed,
        "data_dir": args.data_dir,
        "workers": args.rep_workers,
    }

    print(f"Found {len(names)} datasets")
    print("=" * 80)
    print(f"Model {args.model} on {args.ensemble.upper()}, condition {args.condition}, "
          f"{args.repetitions} repetitions")
    print("Running datasets in parallel...")
    print("=" * 80)
    print()

    results = run_benchmarks(names, settings, output_dir, args.workers)

    successful = [r for r in results if r[0]]
    failed = [r for r in results if not r[0]]

    print()
    print("=" * 80)
    print("Benchmarks complete!")
    print(f"  ✓ Successfully evaluated: {len(successful)} datasets")
    if failed:
        print(f"  ✗ Errors: {len(failed)} datasets")
        for _, name, error in failed:
            print(f"    - {name}: {error}")
    print(f"  Output directory: {output_dir}/")
    print("=" * 80)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
