"""Dataset discovery, manifests, and the seeded train/val/test split.

A dataset on disk is a root directory with ``yes/`` and ``no/``
subdirectories of PGM files.  A manifest is the flat list of
(path, label) pairs, always kept sorted by path so repeated scans and
downstream splits are deterministic.

The split shuffles each class with its own seeded stream and assigns
floor(ratio * n) entries to the validation and test sets, remainder to
train.  Flooring favors the training set; with 155 positives and 98
negatives at 80:10:10 this yields 205/24/24.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BadConfig, ClassTooSmall, EmptyClass, MissingDir
from .metrics import CLASSES, NO, YES
from .rng import Rng, STREAM_SPLIT, mix_seed

IMAGE_SUFFIX = ".pgm"
MIN_CLASS_SIZE = 3


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str

    def __post_init__(self):
        if self.label not in CLASSES:
            raise ValueError(f"label must be one of {CLASSES}, got {self.label!r}")


@dataclass
class DatasetManifest:
    """Ordered (path, label) list with unique paths."""

    entries: list[ManifestEntry] = field(default_factory=list)

    def __post_init__(self):
        paths = [e.path for e in self.entries]
        if len(set(paths)) != len(paths):
            raise ValueError("manifest paths must be unique")

    def __len__(self) -> int:
        return len(self.entries)

    def count(self, label: str) -> int:
        return sum(1 for e in self.entries if e.label == label)

    def counts(self) -> dict[str, int]:
        return {label: self.count(label) for label in CLASSES}

    def of_class(self, label: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.label == label]


@dataclass(frozen=True)
class SplitConfig:
    """Ratios for train/val/test, the shuffle seed, and stratification."""

    train_ratio: float = 0.8
    val_ratio: float = 0.1
    test_ratio: float = 0.1
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        ratios = (self.train_ratio, self.val_ratio, self.test_ratio)
        if any(r <= 0 for r in ratios):
            raise BadConfig(f"split ratios must be positive, got {ratios}")
        if abs(sum(ratios) - 1.0) > 1e-9:
            raise BadConfig(f"split ratios must sum to 1, got {sum(ratios)}")


def scan_dataset(root_dir: str | Path) -> DatasetManifest:
    """Enumerate ``root/yes`` and ``root/no``, sorted by path."""
    root = Path(root_dir)
    if not root.is_dir():
        raise MissingDir(f"dataset root {root} does not exist")
    entries: list[ManifestEntry] = []
    for label in (YES, NO):
        class_dir = root / label
        if not class_dir.is_dir():
            raise MissingDir(f"expected class directory {class_dir}")
        files = sorted(p for p in class_dir.iterdir() if p.suffix == IMAGE_SUFFIX and p.is_file())
        if not files:
            raise EmptyClass(f"no {IMAGE_SUFFIX} files in {class_dir}")
        entries.extend(ManifestEntry(str(p), label) for p in files)
    entries.sort(key=lambda e: e.path)
    return DatasetManifest(entries)


def _floor_split(items: list[ManifestEntry], cfg: SplitConfig, rng: Rng):
    """Shuffle, then carve off floor(ratio * n) for val and test."""
    pool = list(items)
    rng.shuffle(pool)
    n = len(pool)
    n_val = math.floor(cfg.val_ratio * n)
    n_test = math.floor(cfg.test_ratio * n)
    return pool[:n_val], pool[n_val : n_val + n_test], pool[n_val + n_test :]


def stratified_split(
    manifest: DatasetManifest, cfg: SplitConfig
) -> tuple[DatasetManifest, DatasetManifest, DatasetManifest]:
    """Partition into (train, val, test) manifests, each sorted by path.

    Stratified mode splits each class independently with its own
    sub-stream; otherwise the whole manifest is shuffled at once.
    """
    val: list[ManifestEntry] = []
    test: list[ManifestEntry] = []
    train: list[ManifestEntry] = []
    if cfg.stratified:
        for class_index, label in enumerate(CLASSES):
            items = manifest.of_class(label)
            if len(items) < MIN_CLASS_SIZE:
                raise ClassTooSmall(
                    f"class {label!r} has {len(items)} entries, needs {MIN_CLASS_SIZE}"
                )
            rng = Rng(mix_seed(cfg.seed, STREAM_SPLIT, class_index))
            v, t, tr = _floor_split(items, cfg, rng)
            val.extend(v)
            test.extend(t)
            train.extend(tr)
    else:
        if len(manifest) < MIN_CLASS_SIZE:
            raise ClassTooSmall(f"{len(manifest)} entries, needs {MIN_CLASS_SIZE}")
        rng = Rng(mix_seed(cfg.seed, STREAM_SPLIT))
        val, test, train = _floor_split(manifest.entries, cfg, rng)
    key = lambda e: e.path
    return (
        DatasetManifest(sorted(train, key=key)),
        DatasetManifest(sorted(val, key=key)),
        DatasetManifest(sorted(test, key=key)),
    )


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write the manifest as a two-column CSV with a header row."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["path", "label"])
        for entry in manifest.entries:
            writer.writerow([entry.path, entry.label])


def read_manifest(path: str | Path) -> DatasetManifest:
    """Read a manifest CSV written by :func:`write_manifest`."""
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows or rows[0] != ["path", "label"]:
        raise BadConfig(f"{path} is not a manifest CSV (missing path,label header)")
    entries = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 2 or row[1] not in CLASSES:
            raise BadConfig(f"{path} line {i}: expected path,{'|'.join(CLASSES)}")
        entries.append(ManifestEntry(row[0], row[1]))
    return DatasetManifest(entries)
