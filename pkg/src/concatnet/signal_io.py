"""Dataset ingestion, stratified splitting, and synthetic signal generation.

Datasets are delimited text files: one row per signal, feature columns
holding real amplitudes and (optionally) an integer class label column.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigError, DataFormatError

SPLITS = ("train", "val", "test")


@dataclass
class Signal:
    """A fixed-length real-valued 1-D sample with an optional class label.

    Invariants: ``samples`` is non-empty and every value is finite.
    """

    samples: np.ndarray
    label: Optional[int] = None
    source_id: Optional[str] = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise DataFormatError("signal must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(self.samples)):
            raise DataFormatError(
                f"signal {self.source_id or '<unnamed>'} contains non-finite samples"
            )
        if self.label is not None and self.label < 0:
            raise DataFormatError(f"label must be a non-negative integer, got {self.label}")

    def __len__(self) -> int:
        return self.samples.size


@dataclass
class Dataset:
    """An ordered collection of equal-length signals plus label vocabulary.

    ``split`` maps each signal to one of ``train``/``val``/``test`` once a
    split has been assigned; it is empty before that.
    """

    signals: list[Signal]
    num_classes: int
    class_names: Sequence[str]
    split: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.num_classes < 1:
            raise DataFormatError("num_classes must be positive")
        if len(self.class_names) != self.num_classes:
            raise DataFormatError(
                f"class_names has {len(self.class_names)} entries for {self.num_classes} classes"
            )
        lengths = {len(s) for s in self.signals}
        if len(lengths) > 1:
            raise DataFormatError(f"signals have mixed lengths {sorted(lengths)}")
        for s in self.signals:
            if s.label is not None and s.label >= self.num_classes:
                raise DataFormatError(
                    f"signal {s.source_id or '<unnamed>'} has label {s.label} "
                    f">= num_classes {self.num_classes}"
                )
        if self.split and len(self.split) != len(self.signals):
            raise DataFormatError("split assignment length does not match signal count")

    def __len__(self) -> int:
        return len(self.signals)

    @property
    def signal_length(self) -> int:
        return len(self.signals[0]) if self.signals else 0

    def indices(self, split: str) -> list[int]:
        """Indices of the signals assigned to one split."""
        if not self.split:
            raise DataFormatError("dataset has no split assignment")
        return [i for i, name in enumerate(self.split) if name == split]

    def subset(self, split: str) -> "Dataset":
        """A new Dataset holding only the signals of one split."""
        idx = self.indices(split)
        return Dataset(
            signals=[self.signals[i] for i in idx],
            num_classes=self.num_classes,
            class_names=list(self.class_names),
        )

    def labels(self) -> np.ndarray:
        """Label vector; raises if any signal is unlabeled."""
        out = np.empty(len(self.signals), dtype=np.int64)
        for i, s in enumerate(self.signals):
            if s.label is None:
                raise DataFormatError(f"signal {i} ({s.source_id or '<unnamed>'}) is unlabeled")
            out[i] = s.label
        return out


@dataclass
class SplitSpec:
    """Train/val/test fractions plus the seed that fixes the assignment."""

    train_fraction: float = 0.8
    val_fraction: float = 0.1
    test_fraction: float = 0.1
    seed: int = 42
    stratified: bool = True

    def __post_init__(self):
        fractions = (self.train_fraction, self.val_fraction, self.test_fraction)
        if not all(0.0 < f < 1.0 for f in fractions):
            raise ConfigError(f"split fractions must lie in (0,1), got {fractions}")
        if abs(sum(fractions) - 1.0) > 1e-12:
            raise ConfigError(f"split fractions must sum to 1, got {sum(fractions)!r}")


def _parse_feature(cell: str, line_no: int, col: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataFormatError(
            f"line {line_no}, column {col + 1}: cannot parse {cell!r} as a real number"
        ) from None
    if not math.isfinite(value):
        raise DataFormatError(f"line {line_no}, column {col + 1}: non-finite value {cell!r}")
    return value


def _parse_label(cell: str, line_no: int, col: int) -> int:
    try:
        return int(cell)
    except ValueError:
        raise DataFormatError(
            f"line {line_no}, column {col + 1}: cannot parse {cell!r} as an integer label"
        ) from None


def _looks_numeric(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def load_csv_dataset(
    path: str | Path,
    label_column: str = "last",
    label_map: Optional[Mapping[int, int]] = None,
    has_labels: bool = True,
    class_names: Optional[Sequence[str]] = None,
) -> Dataset:
    """Load a dataset from a comma-separated file, one signal per row.

    A single header row is auto-detected by a non-numeric first cell.
    ``label_column`` is ``"last"`` or a header name; ``label_map`` remaps raw
    integer labels to class indices (an unmapped raw label is an error).
    With ``has_labels=False`` every column is a feature and signals are
    unlabeled.

    Row order is preserved. ``num_classes`` is ``max(label) + 1``, which for
    zero-based dense labels equals the number of distinct labels.
    """
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"dataset file {path} does not exist")

    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [row for row in rows if row and any(cell.strip() for cell in row)]
    if not rows:
        raise DataFormatError(f"{path}: file contains no data rows")

    header: Optional[list[str]] = None
    if not _looks_numeric(rows[0][0].strip()):
        header = [cell.strip() for cell in rows[0]]
        rows = rows[1:]
        if not rows:
            raise DataFormatError(f"{path}: file contains a header but no data rows")

    width = len(rows[0])
    if has_labels:
        if label_column == "last":
            label_idx = width - 1
        else:
            if header is None:
                raise DataFormatError(
                    f"{path}: label column {label_column!r} requires a header row"
                )
            try:
                label_idx = header.index(label_column)
            except ValueError:
                raise DataFormatError(
                    f"{path}: no column named {label_column!r} in header"
                ) from None
    else:
        label_idx = None

    signals: list[Signal] = []
    first_line = 2 if header is not None else 1
    for r, row in enumerate(rows):
        line_no = first_line + r
        if len(row) != width:
            raise DataFormatError(
                f"{path}: line {line_no} has {len(row)} columns, expected {width}"
            )
        features = []
        label = None
        for c, cell in enumerate(row):
            cell = cell.strip()
            if label_idx is not None and c == label_idx:
                raw = _parse_label(cell, line_no, c)
                if label_map is not None:
                    if raw not in label_map:
                        raise DataFormatError(
                            f"{path}: line {line_no}: raw label {raw} missing from label_map"
                        )
                    label = label_map[raw]
                else:
                    label = raw
            else:
                features.append(_parse_feature(cell, line_no, c))
        signals.append(Signal(np.array(features), label=label, source_id=f"{path.name}:{line_no}"))

    if has_labels:
        labels = [s.label for s in signals]
        num_classes = max(labels) + 1
    else:
        num_classes = 1
    if class_names is None:
        class_names = [str(i) for i in range(num_classes)]
    return Dataset(signals=signals, num_classes=num_classes, class_names=list(class_names))


def save_csv_dataset(dataset: Dataset, path: str | Path, include_labels: bool = True) -> None:
    """Write one row per signal; the label, when present, is the last column.

    Feature values are written with round-trip precision so that loading the
    file back reproduces them bit-exactly.
    """
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for s in dataset.signals:
            row = [repr(float(v)) for v in s.samples]
            if include_labels and s.label is not None:
                row.append(str(s.label))
            writer.writerow(row)


def _allocate(n: int, fractions: Sequence[float]) -> list[int]:
    """Largest-remainder allocation of n items over the split fractions."""
    floors = [int(n * f) for f in fractions]
    remainders = [n * f - fl for f, fl in zip(fractions, floors)]
    short = n - sum(floors)
    # ties go to the earlier split (train before val before test)
    order = sorted(range(len(fractions)), key=lambda i: (-remainders[i], i))
    for i in order[:short]:
        floors[i] += 1
    return floors


def stratified_split(dataset: Dataset, spec: SplitSpec) -> Dataset:
    """Assign every signal to train/val/test, preserving class proportions.

    The assignment is a pure function of the dataset order and ``spec.seed``.
    Within each class the split counts follow a largest-remainder rule, so
    they deviate from the requested fractions by less than one signal.
    """
    labels = dataset.labels()
    fractions = (spec.train_fraction, spec.val_fraction, spec.test_fraction)
    assignment = [""] * len(dataset)

    if spec.stratified:
        groups = [(int(k), np.flatnonzero(labels == k)) for k in np.unique(labels)]
        for k, idx in groups:
            if idx.size < len(SPLITS):
                raise DataFormatError(
                    f"class {k} has {idx.size} members; stratified splitting "
                    f"needs at least {len(SPLITS)} per class"
                )
    else:
        groups = [(0, np.arange(len(dataset)))]

    for k, idx in groups:
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, k]))
        shuffled = idx[rng.permutation(idx.size)]
        counts = _allocate(idx.size, fractions)
        start = 0
        for split_name, count in zip(SPLITS, counts):
            for i in shuffled[start : start + count]:
                assignment[i] = split_name
            start += count

    for split_name in SPLITS:
        if split_name not in assignment:
            raise DataFormatError(
                f"split {split_name!r} is empty under fractions {fractions}; "
                f"supply more data or larger fractions"
            )
    return Dataset(
        signals=dataset.signals,
        num_classes=dataset.num_classes,
        class_names=list(dataset.class_names),
        split=assignment,
    )


def generate_synthetic(
    num_per_class: int,
    length: int,
    class_freqs: Sequence[float],
    noise_std: float = 0.0,
    seed: int = 0,
) -> Dataset:
    """Build a labeled dataset of noisy sinusoids, one frequency per class.

    Class ``k`` signals are ``sin(2*pi*class_freqs[k]*n/length)`` plus
    Gaussian noise of standard deviation ``noise_std``; deterministic for a
    given seed.
    """
    if num_per_class < 1:
        raise ConfigError("num_per_class must be positive")
    if length < 16:
        raise ConfigError(f"length must be at least 16, got {length}")
    if noise_std < 0:
        raise ConfigError("noise_std must be non-negative")
    if len(set(class_freqs)) != len(class_freqs):
        raise ConfigError(f"class frequencies must be distinct, got {list(class_freqs)}")

    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    n = np.arange(length, dtype=np.float64)
    signals = []
    for k, freq in enumerate(class_freqs):
        base = np.sin(2.0 * np.pi * freq * n / length)
        for i in range(num_per_class):
            noise = rng.normal(0.0, noise_std, size=length) if noise_std > 0 else 0.0
            signals.append(Signal(base + noise, label=k, source_id=f"class{k}-{i:04d}"))
    return Dataset(
        signals=signals,
        num_classes=len(class_freqs),
        class_names=[f"class{k}" for k in range(len(class_freqs))],
    )


def summary(dataset: Dataset) -> str:
    """Key-value text report: row count, length, class histogram, split sizes."""
    lines = [
        f"rows: {len(dataset)}",
        f"signal_length: {dataset.signal_length}",
        f"num_classes: {dataset.num_classes}",
    ]
    labeled = [s.label for s in dataset.signals if s.label is not None]
    for k in range(dataset.num_classes):
        count = sum(1 for lab in labeled if lab == k)
        lines.append(f"class_{k} ({dataset.class_names[k]}): {count}")
    if dataset.split:
        for split_name in SPLITS:
            lines.append(f"split_{split_name}: {dataset.split.count(split_name)}")
    return "\n".join(lines) + "\n"
