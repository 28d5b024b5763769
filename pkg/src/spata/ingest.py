"""CSV loading, one-hot encoding and stratified splitting."""

from __future__ import annotations

import csv
import enum
import logging
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "OTHER_CATEGORY",
    "ColumnKind",
    "DataError",
    "Dataset",
    "RawTable",
    "encode_categoricals",
    "encode_like",
    "load_csv",
    "stratified_indices",
    "stratified_split",
]

logger = logging.getLogger(__name__)

OTHER_CATEGORY = "__other__"


class DataError(ValueError):
    """Input data that cannot be turned into a dataset."""


class ColumnKind(enum.Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Dataset:
    """Column-major numeric table with optional class labels.

    ``NaN`` marks a missing cell; it only appears when missing values were
    explicitly allowed at load time and always projects to the out-of-domain
    code.
    """

    feature_names: tuple[str, ...]
    columns: tuple[np.ndarray, ...]
    labels: np.ndarray | None = None

    def __post_init__(self) -> None:
        names = tuple(self.feature_names)
        cols = tuple(np.asarray(c, dtype=np.float64) for c in self.columns)
        if len(names) != len(cols):
            raise ValueError("one feature name per column required")
        if len(set(names)) != len(names):
            raise ValueError("feature names must be distinct")
        n = cols[0].size if cols else (0 if self.labels is None else len(self.labels))
        if any(c.ndim != 1 or c.size != n for c in cols):
            raise ValueError("all columns must have the same length")
        labels = self.labels
        if labels is not None:
            labels = np.asarray([str(v) for v in labels], dtype=object)
            if labels.size != n:
                raise ValueError("labels length differs from row count")
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "labels", labels)

    @property
    def n_rows(self) -> int:
        if self.columns:
            return int(self.columns[0].size)
        return 0 if self.labels is None else int(self.labels.size)

    @property
    def n_features(self) -> int:
        return len(self.columns)

    def take(self, rows: np.ndarray) -> Dataset:
        rows = np.asarray(rows, dtype=np.int64)
        labels = None if self.labels is None else self.labels[rows]
        return Dataset(self.feature_names, tuple(c[rows] for c in self.columns), labels)


@dataclass
class RawTable:
    names: list[str]
    cells: list[list[str]]
    kinds: list[ColumnKind]
    labels: list[str] | None = None
    label_column: str | None = None
    numeric: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def n_rows(self) -> int:
        if self.cells:
            return len(self.cells[0])
        return 0 if self.labels is None else len(self.labels)


def _parse_numeric(cells: list[str]) -> np.ndarray | None:
    """Parse cells as finite reals; empty cells become NaN. None if any cell fails."""
    try:
        fast = np.array(cells, dtype=np.float64)
    except ValueError:
        fast = None
    if fast is not None and np.all(np.isfinite(fast)) and not any("_" in c for c in cells):
        return fast
    out = np.empty(len(cells), dtype=np.float64)
    for i, cell in enumerate(cells):
        text = cell.strip()
        if not text:
            out[i] = math.nan
            continue
        try:
            value = float(text)
        except ValueError:
            return None
        if not math.isfinite(value) or "_" in text:
            return None
        out[i] = value
    return out


def load_csv(
    path: str | os.PathLike,
    label_column: str | None = None,
    kind_overrides: dict[str, ColumnKind] | None = None,
    missing_as_out_of_domain: bool = False,
) -> RawTable:
    """Read a headed, comma-separated file and classify every feature column.

    A column is numeric when every non-empty cell parses as a finite real.
    Empty cells in a numeric column are an error unless
    ``missing_as_out_of_domain`` is set.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    kind_overrides = dict(kind_overrides or {})

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"empty file: {path}")
        rows = [r for r in reader if r]
    dupes = sorted(name for name, c in Counter(header).items() if c > 1)
    if dupes:
        raise DataError(f"duplicate column names: {', '.join(dupes)}")
    if label_column is not None and label_column not in header:
        raise DataError(f"label column {label_column!r} not in header")
    unknown = sorted(set(kind_overrides) - set(header))
    if unknown:
        raise DataError(f"kind override for unknown column(s): {', '.join(unknown)}")
    width = len(header)
    for lineno, row in enumerate(rows, start=2):
        if len(row) != width:
            raise DataError(f"line {lineno}: expected {width} fields, got {len(row)}")

    columns = [list(col) for col in zip(*rows)] if rows else [[] for _ in header]
    labels = None
    names, cells, kinds = [], [], []
    numeric: dict[str, np.ndarray] = {}
    for name, col in zip(header, columns):
        if name == label_column:
            labels = col
            continue
        parsed = _parse_numeric(col)
        kind = kind_overrides.get(name)
        if kind is None:
            non_empty = parsed is not None and not np.all(np.isnan(parsed))
            kind = ColumnKind.NUMERIC if non_empty else ColumnKind.CATEGORICAL
        if kind is ColumnKind.NUMERIC:
            if parsed is None:
                raise DataError(f"column {name!r} forced numeric but has non-numeric cells")
            n_missing = int(np.isnan(parsed).sum())
            if n_missing and not missing_as_out_of_domain:
                raise DataError(
                    f"column {name!r} has {n_missing} empty cell(s); "
                    "use --missing-as-out-of-domain to project them to 0"
                )
            numeric[name] = parsed
        names.append(name)
        cells.append(col)
        kinds.append(kind)
    return RawTable(names, cells, kinds, labels, label_column, numeric)


def _one_hot(name: str, cells: list[str], min_frequency: float):
    n = len(cells)
    counts = Counter(cells)
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [cat for cat, c in ordered if n == 0 or c / n >= min_frequency]
    pooled = {cat for cat, c in ordered if n and c / n < min_frequency}
    arr = np.asarray(cells, dtype=object)
    names, cols = [], []
    for cat in kept:
        names.append(f"{name}={cat}")
        cols.append((arr == cat).astype(np.float64))
    if pooled:
        names.append(f"{name}={OTHER_CATEGORY}")
        cols.append(np.fromiter((c in pooled for c in cells), dtype=np.float64, count=n))
    return names, cols


def encode_categoricals(table: RawTable, min_frequency: float = 0.01) -> Dataset:
    """One-hot encode categorical columns, pooling rare categories.

    Categories are ordered by descending frequency, ties broken
    lexicographically; those rarer than ``min_frequency`` share one
    ``<col>=__other__`` indicator.
    """
    if not 0 <= min_frequency < 1:
        raise ValueError("min_frequency must be in [0, 1)")
    names: list[str] = []
    cols: list[np.ndarray] = []
    for name, col, kind in zip(table.names, table.cells, table.kinds):
        if kind is ColumnKind.NUMERIC:
            values = table.numeric.get(name)
            if values is None:
                values = _parse_numeric(col)
                if values is None:
                    raise DataError(f"column {name!r} is not numeric")
            names.append(name)
            cols.append(values)
        else:
            enc_names, enc_cols = _one_hot(name, col, min_frequency)
            names.extend(enc_names)
            cols.extend(enc_cols)
    labels = None if table.labels is None else np.asarray(table.labels, dtype=object)
    if labels is not None and not cols:
        return Dataset((), (), labels)
    return Dataset(tuple(names), tuple(cols), labels)


def _sort_labels(labels) -> list[str]:
    return sorted({str(v) for v in labels})


def stratified_indices(labels, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Row indices ``(train, test)`` of a per-class split, each ascending.

    Each class sends ``round(test_fraction * count)`` rows to test, halves
    rounding toward test.  Classes are shuffled with their own generator
    seeded by ``(seed, class_index)``, classes ordered by label text.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    labels = np.asarray([str(v) for v in labels], dtype=object)
    test_rows = []
    for k, label in enumerate(_sort_labels(labels)):
        rows = np.flatnonzero(labels == label)
        if rows.size < 2:
            logger.warning("class %r has a single instance; it stays in the training set", label)
            continue
        n_test = math.floor(test_fraction * rows.size + 0.5)
        rng = np.random.default_rng([seed, k])
        test_rows.append(rng.permutation(rows)[:n_test])
    is_test = np.zeros(labels.size, dtype=bool)
    if test_rows:
        is_test[np.concatenate(test_rows)] = True
    return np.flatnonzero(~is_test), np.flatnonzero(is_test)


def stratified_split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified train/test split; both parts keep the original row order."""
    if dataset.labels is None:
        raise DataError("stratified split requires labels")
    train, test = stratified_indices(dataset.labels, test_fraction, seed)
    return dataset.take(train), dataset.take(test)


def encode_like(table: RawTable, feature_names) -> tuple[Dataset, list[str], list[str]]:
    """Encode ``table`` onto an existing feature layout.

    Categorical sources are recognised by ``<col>=`` prefixes among
    ``feature_names``; categories without their own indicator go to
    ``<col>=__other__`` when the layout has one.  Returns the dataset plus
    the missing and unexpected feature names; the dataset is only usable when
    both lists are empty.
    """
    feature_names = list(feature_names)
    wanted = set(feature_names)
    produced: dict[str, np.ndarray] = {}
    unexpected: list[str] = []
    for name, col, kind in zip(table.names, table.cells, table.kinds):
        if name in wanted:
            values = table.numeric.get(name)
            if values is None:
                values = _parse_numeric(col)
            if values is None:
                raise DataError(f"column {name!r} must be numeric")
            produced[name] = values
            continue
        prefix = f"{name}="
        onehot = [f for f in feature_names if f.startswith(prefix)]
        if not onehot:
            unexpected.append(name)
            continue
        arr = np.asarray(col, dtype=object)
        explicit = set()
        for f in onehot:
            cat = f[len(prefix):]
            if cat != OTHER_CATEGORY:
                explicit.add(cat)
                produced[f] = (arr == cat).astype(np.float64)
        other = f"{prefix}{OTHER_CATEGORY}"
        if other in wanted:
            produced[other] = np.fromiter((c not in explicit for c in col), dtype=np.float64, count=len(col))
    missing = [f for f in feature_names if f not in produced]
    if missing or unexpected:
        return Dataset((), (), None), missing, unexpected
    labels = None if table.labels is None else np.asarray(table.labels, dtype=object)
    cols = tuple(produced[f] for f in feature_names)
    return Dataset(tuple(feature_names), cols, labels), missing, unexpected
