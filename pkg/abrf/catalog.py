"""
Benchmark Dataset Catalog

Describes the regression and classification benchmarks the experiments are
run on: abbreviation, task, shape, number of classes, where the data comes
from and how to load it.

Three kinds of entries:
1. Generated benchmarks (Friedman 1-3, Regression, Sparse) built on the fly
2. Bundled data (Diabetes, shipped with scikit-learn)
3. UCI files that the user places under ABRF_DATA_DIR as <file>.csv with a
   header row; the target is the last column unless the entry says otherwise

Files are never downloaded; `url` only says where to get them.
"""

import json
from pathlib import Path
from typing import Dict, List, Optional

from abrf import config, console
from abrf.data import Dataset, generate, load_csv, load_diabetes_data
from abrf.errors import DatasetError

UCI_URL = "https://archive.ics.uci.edu"
FRIEDMAN_URL = "https://www.stat.berkeley.edu/~breiman/bagging.pdf"
SKLEARN_URL = "https://scikit-learn.org"


class DatasetEntry:
    """One benchmark dataset."""

    def __init__(self, metadata: dict):
        self.name = metadata["name"]
        self.title = metadata.get("title", self.name)
        self.task = metadata["task"]
        self.m = metadata["m"]
        self.n = metadata["n"]
        self.n_classes = metadata.get("n_classes")
        self.file = metadata.get("file")
        self.target = metadata.get("target", -1)
        self.one_hot = metadata.get("one_hot", False)
        self.generator = metadata.get("generator")
        self.builtin = metadata.get("builtin")
        self.url = metadata.get("url")

    def __repr__(self):
        return f"<DatasetEntry {self.name}: {self.task} m={self.m} n={self.n}>"

    @property
    def source(self):
        if self.generator:
            return "generated"
        if self.builtin:
            return "bundled"
        return "file"

    def path(self, data_dir=None) -> Optional[Path]:
        if not self.file:
            return None
        return Path(data_dir or config.DATA_DIR) / self.file

    def is_available(self, data_dir=None) -> bool:
        return self.source != "file" or self.path(data_dir).exists()

    def load(self, data_dir=None, seed=0, minmax=False) -> Dataset:
        """Build or read the dataset; generated entries use `seed`."""
        if self.generator:
            options = dict(self.generator)
            kind = options.pop("kind")
            ds = generate(kind, n=self.n, seed=seed, **options)
        elif self.builtin == "diabetes":
            ds = load_diabetes_data()
        else:
            path = self.path(data_dir)
            if not path.exists():
                raise DatasetError(
                    f"{self.name}: expected {path} (get it from {self.url}); files are not downloaded")
            ds = load_csv(path, self.target, task=self.task, one_hot=self.one_hot)
        ds.name = self.name
        return ds.minmax_scaled() if minmax else ds

    def to_dict(self):
        return {
            "name": self.name,
            "title": self.title,
            "task": self.task,
            "m": self.m,
            "n": self.n,
            "n_classes": self.n_classes,
            "source": self.source,
            "file": self.file,
            "url": self.url,
        }


def _uci(name, title, task, m, n, n_classes=None, **extra):
    entry = {"name": name, "title": title, "task": task, "m": m, "n": n, "n_classes": n_classes,
             "file": f"{name.lower()}.csv", "url": UCI_URL}
    entry.update(extra)
    return entry


BENCHMARKS: List[dict] = [
    # regression
    {"name": "Diabetes", "title": "Diabetes", "task": "regression", "m": 10, "n": 442,
     "builtin": "diabetes", "url": SKLEARN_URL},
    {"name": "Friedman1", "title": "Friedman 1", "task": "regression", "m": 10, "n": 100,
     "generator": {"kind": "friedman1"}, "url": FRIEDMAN_URL},
    {"name": "Friedman2", "title": "Friedman 2", "task": "regression", "m": 4, "n": 100,
     "generator": {"kind": "friedman2"}, "url": FRIEDMAN_URL},
    {"name": "Friedman3", "title": "Friedman 3", "task": "regression", "m": 4, "n": 100,
     "generator": {"kind": "friedman3"}, "url": FRIEDMAN_URL},
    {"name": "Regression", "title": "Scikit-Learn Regression", "task": "regression", "m": 100, "n": 100,
     "generator": {"kind": "regression", "m": 100}, "url": SKLEARN_URL},
    {"name": "Sparse", "title": "Scikit-Learn Sparse Uncorrelated", "task": "regression", "m": 10,
     "n": 100, "generator": {"kind": "sparse", "m": 10, "noise_sd": 1.0}, "url": SKLEARN_URL},
    _uci("Wine", "UCI Wine red", "regression", 11, 1599),
    _uci("Boston", "UCI Boston Housing", "regression", 13, 506),
    _uci("Concrete", "UCI Concrete", "regression", 8, 1030),
    _uci("Yacht", "UCI Yacht Hydrodynamics", "regression", 6, 308),
    _uci("Airfoil", "UCI Airfoil", "regression", 5, 1503),
    # classification
    _uci("Diabet", "Diabetic Retinopathy", "classification", 20, 1151, 2),
    _uci("Eeg", "Eeg Eyes", "classification", 14, 14980, 2),
    _uci("Haberman", "Haberman's Survival", "classification", 3, 306, 2),
    _uci("Ionosphere", "Ionosphere", "classification", 34, 351, 2),
    _uci("Seeds", "Seeds", "classification", 7, 210, 3),
    _uci("Seismic", "Seismic-Bumps", "classification", 18, 2584, 2),
    _uci("Soybean", "Soybean", "classification", 35, 47, 4),
    _uci("TAE", "Teaching Assistant Evaluation", "classification", 5, 151, 3),
    _uci("TTTE", "Tic-Tac-Toe Endgame", "classification", 27, 957, 2, one_hot=True),
    _uci("Phishing", "Website Phishing", "classification", 9, 1353, 3),
    _uci("Wholesale", "Wholesale Customer", "classification", 6, 440, 3),
]


class DatasetCatalog:
    """Lookup over benchmark entries (case-insensitive names)."""

    def __init__(self, metadata_list: Optional[List[dict]] = None):
        self.entries = [DatasetEntry(m) for m in (metadata_list or BENCHMARKS)]
        self._by_name = {e.name.lower(): e for e in self.entries}

    def __contains__(self, name):
        return str(name).lower() in self._by_name

    def get(self, name) -> DatasetEntry:
        entry = self._by_name.get(str(name).lower())
        if entry is None:
            raise DatasetError(f"unknown dataset {name!r}; catalog has {self.names()}")
        return entry

    def names(self, task=None) -> List[str]:
        return [e.name for e in self.by_task(task)]

    def by_task(self, task=None) -> List[DatasetEntry]:
        return [e for e in self.entries if task is None or e.task == task]

    def availability(self, data_dir=None) -> Dict[str, bool]:
        return {e.name: e.is_available(data_dir) for e in self.entries}

    def export(self) -> List[dict]:
        return [e.to_dict() for e in self.entries]


def describe_catalog(catalog: Optional[DatasetCatalog] = None, data_dir=None):
    """Print the catalog with file availability."""
    catalog = catalog or DatasetCatalog()
    available = catalog.availability(data_dir)

    console.banner("📊 BENCHMARK DATASETS")
    for task in ("regression", "classification"):
        console.say(f"\n📋 {task.upper()}:")
        for entry in catalog.by_task(task):
            classes = f" C={entry.n_classes}" if entry.n_classes else ""
            mark = "✓" if available[entry.name] else "✗"
            console.say(f"   {mark} {entry.name:<11} m={entry.m:<4} n={entry.n:<6}{classes}  ({entry.source})")
    missing = [name for name, ok in available.items() if not ok]
    if missing:
        console.say(f"\n📁 Missing files under {Path(data_dir or config.DATA_DIR)}/: {', '.join(missing)}")
    console.say("\n" + "=" * 80)
    return catalog


if __name__ == "__main__":
    collection = describe_catalog()
    print(json.dumps(collection.export(), indent=2))
