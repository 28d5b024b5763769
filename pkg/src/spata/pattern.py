"""Per-class systematisation of a projected dataset.

For every class the card keeps its unique combinations with their number of
occurrences, and for every feature the number of occurrences of each code.
Both are paired with overlap counts: how many classes contain the same code
(per feature) or the same whole combination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .projection import Code, PatternModel, ProjectedDataset, pack_code, unpack_code

__all__ = [
    "CardError",
    "ClassPattern",
    "CodeStats",
    "PatternCard",
    "build_pattern_card",
    "class_partition",
    "code_overlaps",
    "combo_overlaps",
    "unique_combinations",
    "validate_card",
]


class CardError(ValueError):
    """A pattern card whose statistics are inconsistent."""


def _unique_rows(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lexicographically sorted unique rows, their counts and the inverse map."""
    n, m = a.shape
    if n == 0:
        return a.copy(), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    if m == 0:
        return a[:1].copy(), np.array([n], dtype=np.int64), np.zeros(n, dtype=np.int64)
    order = np.lexsort(a.T[::-1])
    s = a[order]
    new_group = np.empty(n, dtype=bool)
    new_group[0] = True
    new_group[1:] = np.any(s[1:] != s[:-1], axis=1)
    starts = np.flatnonzero(new_group)
    counts = np.diff(np.append(starts, n))
    inverse = np.empty(n, dtype=np.int64)
    inverse[order] = np.cumsum(new_group) - 1
    return s[starts], counts, inverse


def class_partition(projected: ProjectedDataset) -> dict[str, np.ndarray]:
    """Rows of each observed class, in label order; row order kept within a class."""
    if projected.labels is None:
        raise ValueError("class partition requires labels")
    labels = projected.labels
    out = {}
    for label in sorted({str(v) for v in labels}):
        out[label] = projected.codes[labels == label]
    return out


def unique_combinations(class_rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique combinations of one class with their counts, sorted lexicographically."""
    uniq, counts, _ = _unique_rows(np.asarray(class_rows, dtype=np.int64))
    return uniq, counts


def code_overlaps(
    class_codes: dict[str, list[np.ndarray]],
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per feature, every observed code and the number of classes that contain it.

    ``class_codes[label][j]`` holds the distinct codes of feature ``j`` in
    that class.
    """
    per_class = list(class_codes.values())
    if not per_class:
        return []
    out = []
    for j in range(len(per_class[0])):
        pooled = np.concatenate([np.unique(c[j]) for c in per_class])
        codes, overlaps = np.unique(pooled, return_counts=True)
        out.append((codes, overlaps.astype(np.int64)))
    return out


def combo_overlaps(class_combos: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """For each class's unique combinations, the number of classes sharing each one."""
    labels = list(class_combos)
    if not labels:
        return {}
    stacked = np.concatenate([class_combos[k] for k in labels], axis=0)
    _, counts, inverse = _unique_rows(stacked)
    overlaps = counts[inverse]
    out, offset = {}, 0
    for k in labels:
        size = class_combos[k].shape[0]
        out[k] = overlaps[offset : offset + size]
        offset += size
    return out


@dataclass(frozen=True, eq=False)
class CodeStats:
    """Occurrences of each code of one feature within one class."""

    codes: np.ndarray
    counts: np.ndarray
    overlaps: np.ndarray


@dataclass(frozen=True, eq=False)
class ClassPattern:
    label: str
    n_instances: int
    combinations: np.ndarray
    combo_counts: np.ndarray
    combo_overlaps: np.ndarray
    code_stats: tuple[CodeStats, ...]

    @property
    def n_unique(self) -> int:
        return int(self.combinations.shape[0])


@dataclass(frozen=True, eq=False)
class PatternCard:
    model: PatternModel
    classes: tuple[ClassPattern, ...]
    n_rows: int
    min_frequency: float | None = None

    @property
    def n_features(self) -> int:
        return len(self.model.feature_names)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def bins(self) -> int:
        return self.model.spec.b

    @property
    def levels(self) -> int:
        return self.model.depth_limit

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.classes]

    def class_pattern(self, label) -> ClassPattern:
        for c in self.classes:
            if c.label == str(label):
                return c
        raise KeyError(f"unknown class {label!r}")

    def feature_index(self, name: str) -> int:
        try:
            return self.model.feature_names.index(name)
        except ValueError:
            raise KeyError(f"unknown feature {name!r}") from None

    def pack(self, digits) -> int:
        return pack_code(digits, self.model.spec, self.model.depth_limit)

    def unpack(self, packed) -> Code:
        return unpack_code(packed, self.model.spec, self.model.depth_limit)

    def _lookup_code(self, label, feature: int, code) -> tuple[int, int]:
        stats = self.class_pattern(label).code_stats[feature]
        key = self.pack(code)
        pos = int(np.searchsorted(stats.codes, key))
        if pos < stats.codes.size and stats.codes[pos] == key:
            return int(stats.counts[pos]), int(stats.overlaps[pos])
        return 0, 0

    def n_code(self, label, feature: int, code) -> int:
        return self._lookup_code(label, feature, code)[0]

    def n_code_overlaps(self, feature: int, code) -> int:
        best = 0
        for c in self.classes:
            best = max(best, self._lookup_code(c.label, feature, code)[1])
        return best

    def _lookup_combo(self, label, combination) -> tuple[int, int]:
        cp = self.class_pattern(label)
        row = np.array([self.pack(c) for c in combination], dtype=np.int64)
        hits = np.flatnonzero(np.all(cp.combinations == row, axis=1))
        if hits.size == 0:
            return 0, 0
        return int(cp.combo_counts[hits[0]]), int(cp.combo_overlaps[hits[0]])

    def n_combo(self, label, combination) -> int:
        return self._lookup_combo(label, combination)[0]

    def n_combo_overlaps(self, combination) -> int:
        best = 0
        for c in self.classes:
            best = max(best, self._lookup_combo(c.label, combination)[1])
        return best


def build_pattern_card(
    projected: ProjectedDataset, model: PatternModel, min_frequency: float | None = None
) -> PatternCard:
    if projected.labels is None:
        raise ValueError("pattern cards require class labels")
    if projected.feature_names != model.feature_names:
        raise ValueError("projected dataset does not match the model's features")
    partition = class_partition(projected)
    m = len(model.feature_names)

    combos, counts = {}, {}
    for label, rows in partition.items():
        combos[label], counts[label] = unique_combinations(rows)
    shared = combo_overlaps(combos)

    per_class_codes = {}
    for label, rows in partition.items():
        per_class_codes[label] = [np.unique(rows[:, j], return_counts=True) for j in range(m)]
    overlaps = code_overlaps({k: [c for c, _ in v] for k, v in per_class_codes.items()})

    classes = []
    for label, rows in partition.items():
        stats = []
        for j, (codes, cnt) in enumerate(per_class_codes[label]):
            all_codes, all_overlaps = overlaps[j]
            ov = all_overlaps[np.searchsorted(all_codes, codes)]
            stats.append(CodeStats(codes, cnt.astype(np.int64), ov))
        classes.append(
            ClassPattern(
                label=label,
                n_instances=int(rows.shape[0]),
                combinations=combos[label],
                combo_counts=counts[label].astype(np.int64),
                combo_overlaps=shared[label],
                code_stats=tuple(stats),
            )
        )
    card = PatternCard(model, tuple(classes), projected.n_rows, min_frequency)
    validate_card(card)
    return card


def validate_card(card: PatternCard) -> None:
    """Raise ``CardError`` unless every count and overlap is self-consistent."""
    n_classes = card.n_classes
    m = card.n_features
    if sum(c.n_instances for c in card.classes) != card.n_rows:
        raise CardError("class sizes do not add up to the row count")
    labels = card.labels
    if labels != sorted(labels) or len(set(labels)) != len(labels):
        raise CardError("classes must be unique and sorted by label")
    for c in card.classes:
        if c.combinations.ndim != 2 or c.combinations.shape[1] != m:
            raise CardError(f"class {c.label!r}: combinations have the wrong width")
        if int(c.combo_counts.sum()) != c.n_instances:
            raise CardError(f"class {c.label!r}: combination counts do not sum to its size")
        if np.any(c.combo_counts < 1):
            raise CardError(f"class {c.label!r}: non-positive combination count")
        if np.any(c.combo_overlaps < 1) or np.any(c.combo_overlaps > n_classes):
            raise CardError(f"class {c.label!r}: combination overlap out of range")
        if len(c.code_stats) != m:
            raise CardError(f"class {c.label!r}: code statistics missing features")
        for j, st in enumerate(c.code_stats):
            if int(st.counts.sum()) != c.n_instances:
                raise CardError(f"class {c.label!r}, feature {j}: code counts do not sum to its size")
            if np.any(st.overlaps < 1) or np.any(st.overlaps > n_classes):
                raise CardError(f"class {c.label!r}, feature {j}: code overlap out of range")
    if not card.classes:
        return
    # Overlaps must agree with the sets they summarise.
    expected_combo = combo_overlaps({c.label: c.combinations for c in card.classes})
    for c in card.classes:
        uniq, _, _ = _unique_rows(c.combinations)
        if not np.array_equal(uniq, c.combinations):
            raise CardError(f"class {c.label!r}: combinations must be unique and sorted")
        for j, st in enumerate(c.code_stats):
            codes, inverse = np.unique(c.combinations[:, j], return_inverse=True)
            weights = np.bincount(inverse, weights=c.combo_counts, minlength=codes.size)
            if not (np.array_equal(codes, st.codes) and np.array_equal(weights, st.counts)):
                raise CardError(f"class {c.label!r}, feature {j}: code counts disagree with combinations")
        if not np.array_equal(expected_combo[c.label], c.combo_overlaps):
            raise CardError(f"class {c.label!r}: combination overlaps are inconsistent")
    expected_code = code_overlaps({c.label: [s.codes for s in c.code_stats] for c in card.classes})
    for c in card.classes:
        for j, st in enumerate(c.code_stats):
            codes, ov = expected_code[j]
            if not np.array_equal(ov[np.searchsorted(codes, st.codes)], st.overlaps):
                raise CardError(f"class {c.label!r}, feature {j}: code overlaps are inconsistent")
