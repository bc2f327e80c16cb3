"""
Opt-in acceptance checks against the published reference scores.

    python pipeline/check_acceptance.py                   # every check with data available
    python pipeline/check_acceptance.py yacht ttte --workers 4

friedman2  RF, condition 1, 100 repetitions: ABRF-1 mean R2 >= baseline mean.
yacht      RF, condition 2, 100 repetitions: baseline R2 within 0.03 of the
           reference and ABRF-1 >= baseline in at least 80% of repetitions.
ttte       RF, condition 2, 30 repetitions: ABRF-1 macro-F1 gains >= 0.02.

Each check also reports its wall time against a budget. A check whose
dataset file is missing is skipped, not failed. Exit code 1 if any ran and failed.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from abrf import config, console  # noqa: E402
from abrf.catalog import DatasetCatalog  # noqa: E402
from abrf.experiment import ExperimentConfig, run_experiment  # noqa: E402
from create_comparison_report import find_reference, load_references  # noqa: E402

CHECKS = {
    "friedman2": {"dataset": "Friedman2", "condition": 1, "repetitions": 100, "budget": 5 * 60},
    "yacht": {"dataset": "Yacht", "condition": 2, "repetitions": 100, "budget": 15 * 60},
    "ttte": {"dataset": "TTTE", "condition": 2, "repetitions": 30, "budget": 10 * 60},
}
MODEL = "abrf1-qp"


def model_entry(report, name):
    for entry in report["models"]:
        if entry["model"] == name:
            return entry
    raise KeyError(f"report has no {name} scores")


def judge_mean_gain(report, min_gain=0.0):
    """(ok, detail): mean score of the attention model beats the baseline by min_gain."""
    base, tuned = model_entry(report, "baseline"), model_entry(report, MODEL)
    gain = tuned["mean"] - base["mean"]
    detail = f"{tuned['metric']} {base['mean']:.3f} -> {tuned['mean']:.3f} (gain {gain:+.3f}, need >= {min_gain:+.3f})"
    return gain >= min_gain, detail


def judge_baseline_and_wins(report, reference, tolerance=0.03, min_share=0.8):
    """(ok, detail): baseline near the reference and the attention model winning most repetitions."""
    base, tuned = model_entry(report, "baseline"), model_entry(report, MODEL)
    wins = np.asarray(tuned["values"]) >= np.asarray(base["values"])
    share = float(wins.mean())
    near = abs(base["mean"] - reference) <= tolerance
    detail = (f"baseline {base['mean']:.3f} vs reference {reference:.3f} (±{tolerance}); "
              f"{MODEL} >= baseline in {share:.0%} of repetitions (need {min_share:.0%})")
    return near and share >= min_share, detail


def judge(key, report, references):
    if key == "yacht":
        reference = find_reference(references, "regression", "rf", "2", MODEL, "Yacht")
        return judge_baseline_and_wins(report, reference["baseline"])
    if key == "ttte":
        return judge_mean_gain(report, min_gain=0.02)
    return judge_mean_gain(report)


def run_check(key, data_dir=None, workers=1, seed=config.DEFAULT_SEED):
    """
    One acceptance check.
    Returns: (ok: bool or None when skipped, name, detail)
    """
    check = CHECKS[key]
    entry = DatasetCatalog().get(check["dataset"])
    if not entry.is_available(data_dir):
        return (None, key, f"skipped: no {entry.file} under {data_dir or config.DATA_DIR}")
    cfg = ExperimentConfig(dataset=entry.name, model=MODEL, ensemble="rf", condition=check["condition"],
                           repetitions=check["repetitions"], n_trees=100, seed=seed, data_dir=data_dir,
                           workers=workers)
    started = time.monotonic()
    try:
        report = run_experiment(cfg)
    except Exception as e:
        return (False, key, f"Error - {e}")
    elapsed = time.monotonic() - started
    ok, detail = judge(key, report, load_references())
    detail += f"; {elapsed / 60:.1f} min (budget {check['budget'] / 60:.0f} min)"
    return (ok and elapsed <= check["budget"], key, detail)


def main(argv=None):
    parser = argparse.ArgumentParser(description="Check results against the reference scores")
    parser.add_argument("checks", nargs="*", help=f"any of {', '.join(CHECKS)} (default: all of them)")
    parser.add_argument("--data-dir")
    parser.add_argument("--workers", type=int, default=config.WORKERS, help="worker processes per run")
    parser.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    args = parser.parse_args(argv)
    unknown = sorted(set(args.checks) - set(CHECKS))
    if unknown:
        parser.error(f"unknown checks: {', '.join(unknown)}")

    results = []
    for key in args.checks or list(CHECKS):
        console.say(f"Checking: {key}...")
        results.append(run_check(key, args.data_dir, args.workers, args.seed))

    print()
    print("=" * 80)
    for ok, name, detail in results:
        mark = "-" if ok is None else ("✓" if ok else "✗")
        print(f"  {mark} {name}: {detail}")
    failed = [r for r in results if r[0] is False]
    print(f"  {len(failed)} failed, {sum(r[0] is None for r in results)} skipped")
    print("=" * 80)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
