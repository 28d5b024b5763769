"""Recursive bin trees and projection of values into hierarchical codes.

Each feature gets a tree of standard-deviation subdomains: the root bins the
whole column, and every non-empty bin that is strictly smaller than its
parent's domain is binned again using only the values that fell into it.
A value's code is the sequence of bin numbers along its path, at most
``depth_limit`` digits long.  Digit 0 marks a value outside the domain of the
node it reached and always ends the code.

Trees are stored as flat arrays in level order (children of a node are
contiguous and sorted by bin), which keeps building and projection
vectorised.  Codes are stored packed into int64: digit ``d`` at position
``i`` contributes ``(d + 1) * (b + 2) ** (L - i)``.  Integer order of packed
codes equals lexicographic order of their digit sequences.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .binning import BinSpec, FeatureStats, map_value, segment_stats, subdomain_bounds
from .ingest import Dataset

__all__ = [
    "DOMAIN_RTOL",
    "Code",
    "FeatureTree",
    "PatternModel",
    "ProjectedDataset",
    "TreeNode",
    "build_feature_tree",
    "code_length",
    "format_code",
    "pack_code",
    "parse_code",
    "project_dataset",
    "project_with_model",
    "rmap_value",
    "unpack_code",
]

DEFAULT_LEVELS = 8
DOMAIN_RTOL = 1e-12

Code = tuple[int, ...]


def _check_packing(spec: BinSpec, depth_limit: int) -> None:
    if depth_limit < 1:
        raise ValueError("levels must be ≥ 1")
    if (spec.b + 2) ** depth_limit >= 2**63:
        raise ValueError(f"bins={spec.b} with levels={depth_limit} exceeds the 64-bit code space")


def pack_code(digits, spec: BinSpec, depth_limit: int) -> int:
    digits = tuple(int(d) for d in digits)
    if not 1 <= len(digits) <= depth_limit:
        raise ValueError(f"code length must be in 1..{depth_limit}")
    if any(not 0 <= d <= spec.b for d in digits) or 0 in digits[:-1]:
        raise ValueError(f"invalid code digits {digits}")
    base = spec.b + 2
    return sum((d + 1) * base ** (depth_limit - 1 - i) for i, d in enumerate(digits))


def unpack_code(packed: int, spec: BinSpec, depth_limit: int) -> Code:
    base = spec.b + 2
    packed = int(packed)
    out = []
    for i in range(depth_limit):
        place = base ** (depth_limit - 1 - i)
        d = packed // place
        packed -= d * place
        if d == 0:
            break
        out.append(d - 1)
    return tuple(out)


def code_length(packed: np.ndarray, spec: BinSpec, depth_limit: int) -> np.ndarray:
    """Vectorised number of digits of packed codes."""
    base = spec.b + 2
    packed = np.asarray(packed, dtype=np.int64)
    length = np.zeros(packed.shape, dtype=np.int64)
    for i in range(depth_limit):
        place = base ** (depth_limit - 1 - i)
        length += (packed // place) % base != 0
    return length


def format_code(digits, b: int) -> str:
    """``"463"`` for ``b <= 9``; digits joined by ``"."`` otherwise."""
    if b <= 9:
        return "".join(str(d) for d in digits)
    return ".".join(str(d) for d in digits)


def parse_code(text: str, b: int) -> Code:
    if not text:
        raise ValueError("empty code")
    if b <= 9:
        return tuple(int(c) for c in text)
    return tuple(int(p) for p in text.split("."))


@dataclass(frozen=True, eq=False)
class FeatureTree:
    """Flat, immutable bin tree of one feature.

    Node 0 is the root.  ``parent[i]`` and ``bin[i]`` locate node ``i`` under
    its parent (``-1`` and ``0`` for the root).
    """

    spec: BinSpec
    depth_limit: int
    mean: np.ndarray
    std: np.ndarray
    min: np.ndarray
    max: np.ndarray
    count: np.ndarray
    parent: np.ndarray
    bin: np.ndarray

    def __post_init__(self) -> None:
        n = self.mean.size
        for arr in (self.std, self.min, self.max, self.count, self.parent, self.bin):
            if arr.size != n:
                raise ValueError("tree arrays differ in length")
        if n == 0 or self.parent[0] != -1:
            raise ValueError("tree needs a root node")
        keys = self.child_keys
        if keys.size > 1 and np.any(np.diff(keys) <= 0):
            raise ValueError("tree nodes are not in level order")
        for arr in (self.mean, self.std, self.min, self.max, self.count, self.parent, self.bin):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return int(self.mean.size)

    @cached_property
    def child_keys(self) -> np.ndarray:
        return self.parent[1:].astype(np.int64) * (self.spec.b + 1) + self.bin[1:]

    @cached_property
    def depth(self) -> np.ndarray:
        depth = np.ones(self.n_nodes, dtype=np.int64)
        for i in range(1, self.n_nodes):
            depth[i] = depth[self.parent[i]] + 1
        return depth

    def child(self, node: int, s: int) -> int:
        """Index of the child of ``node`` for bin ``s``, or -1."""
        key = node * (self.spec.b + 1) + s
        keys = self.child_keys
        pos = int(np.searchsorted(keys, key))
        if pos < keys.size and keys[pos] == key:
            return pos + 1
        return -1

    def node(self, index: int = 0) -> TreeNode:
        return TreeNode(self, index)

    @property
    def stats(self) -> FeatureStats:
        return self.node(0).stats

    @property
    def children(self) -> dict[int, TreeNode]:
        return self.node(0).children

    def equals(self, other: FeatureTree) -> bool:
        if self.spec != other.spec or self.depth_limit != other.depth_limit:
            return False
        fields = ("mean", "std", "min", "max", "count", "parent", "bin")
        return all(np.array_equal(getattr(self, f), getattr(other, f)) for f in fields)


@dataclass(frozen=True)
class TreeNode:
    tree: FeatureTree
    index: int

    @property
    def stats(self) -> FeatureStats:
        t, i = self.tree, self.index
        return FeatureStats(
            float(t.min[i]), float(t.max[i]), float(t.mean[i]), float(t.std[i]), int(t.count[i])
        )

    @property
    def bin(self) -> int:
        return int(self.tree.bin[self.index])

    @property
    def depth(self) -> int:
        return int(self.tree.depth[self.index])

    @property
    def children(self) -> dict[int, TreeNode]:
        t = self.tree
        keys = t.child_keys
        base = self.index * (t.spec.b + 1)
        lo, hi = np.searchsorted(keys, [base + 1, base + t.spec.b + 1])
        return {int(t.bin[j + 1]): TreeNode(t, int(j + 1)) for j in range(lo, hi)}

    def intervals(self):
        return subdomain_bounds(self.stats, self.tree.spec)


def build_feature_tree(values, spec: BinSpec, depth_limit: int = DEFAULT_LEVELS) -> FeatureTree:
    """Build the bin tree of one feature, level by level.

    Non-finite entries are ignored.  A bin gets a child node when it holds
    values and its subdomain is strictly smaller than the node's domain;
    constant children are kept as leaves so that their values still receive
    the centre digit.
    """
    _check_packing(spec, depth_limit)
    v = np.asarray(values, dtype=np.float64).ravel()
    v = np.sort(v[np.isfinite(v)])
    if v.size == 0:
        raise ValueError("cannot build a tree from an empty vector")

    b = spec.b
    offsets = spec.offsets()
    starts = np.array([0], dtype=np.int64)
    ends = np.array([v.size], dtype=np.int64)
    parents = np.array([-1], dtype=np.int64)
    bins = np.array([0], dtype=np.int64)
    out = {k: [] for k in ("mean", "std", "min", "max", "count", "parent", "bin")}
    next_id = 0

    for depth in range(1, depth_limit + 1):
        mean, std = segment_stats(v, starts, ends)
        lo, hi = v[starts], v[ends - 1]
        ids = np.arange(next_id, next_id + starts.size, dtype=np.int64)
        next_id += starts.size
        out["mean"].append(mean)
        out["std"].append(std)
        out["min"].append(lo)
        out["max"].append(hi)
        out["count"].append(ends - starts)
        out["parent"].append(parents)
        out["bin"].append(bins)
        if depth == depth_limit:
            break

        split = std > 0
        if not split.any():
            break
        s_starts, s_ends = starts[split], ends[split]
        s_lo, s_hi = lo[split], hi[split]
        edges = mean[split, None] + offsets[None, :] * std[split, None]
        cuts = np.searchsorted(v, edges.ravel(), side="right").reshape(edges.shape)
        cuts = np.clip(cuts, s_starts[:, None], s_ends[:, None])
        bounds = np.concatenate([s_starts[:, None], cuts, s_ends[:, None]], axis=1)
        c_start, c_end = bounds[:, :-1], bounds[:, 1:]

        # Subdomain of each bin after clipping to the node's domain.
        width = (s_hi - s_lo)[:, None]
        low_edge = np.concatenate([np.full((edges.shape[0], 1), -np.inf), edges], axis=1)
        high_edge = np.concatenate([edges, np.full((edges.shape[0], 1), np.inf)], axis=1)
        d_lo = np.maximum(low_edge, s_lo[:, None])
        d_hi = np.minimum(high_edge, s_hi[:, None])
        tol = DOMAIN_RTOL * width
        whole = (np.abs(d_lo - s_lo[:, None]) <= tol) & (np.abs(d_hi - s_hi[:, None]) <= tol)
        keep = (c_end > c_start) & ~whole

        rows, cols = np.nonzero(keep)
        starts = c_start[rows, cols]
        ends = c_end[rows, cols]
        parents = ids[split][rows]
        bins = cols.astype(np.int64) + 1
        if starts.size == 0:
            break

    def cat(key, dtype):
        return np.concatenate(out[key]).astype(dtype, copy=False)

    return FeatureTree(
        spec=spec,
        depth_limit=depth_limit,
        mean=cat("mean", np.float64),
        std=cat("std", np.float64),
        min=cat("min", np.float64),
        max=cat("max", np.float64),
        count=cat("count", np.int64),
        parent=cat("parent", np.int64),
        bin=cat("bin", np.int64),
    )


def rmap_value(x: float, tree: FeatureTree) -> Code:
    """Code of a single value, walking the tree one node at a time."""
    if not math.isfinite(x):
        return (0,)
    digits = []
    node = 0
    while True:
        s = map_value(x, tree.node(node).intervals())
        digits.append(s)
        if s == 0 or len(digits) == tree.depth_limit:
            break
        node = tree.child(node, s)
        if node < 0:
            break
    return tuple(digits)


def _project_column(tree: FeatureTree, x: np.ndarray) -> np.ndarray:
    """Packed codes of every entry of ``x``."""
    spec, levels = tree.spec, tree.depth_limit
    base = spec.b + 2
    offsets = spec.offsets()
    x = np.asarray(x, dtype=np.float64)
    packed = np.zeros(x.size, dtype=np.int64)
    packed[~np.isfinite(x)] = base ** (levels - 1)
    active = np.flatnonzero(np.isfinite(x))
    node = np.zeros(active.size, dtype=np.int64)
    keys = tree.child_keys

    for depth in range(1, levels + 1):
        if active.size == 0:
            break
        xa = x[active]
        std = tree.std[node]
        edges = tree.mean[node][:, None] + offsets[None, :] * std[:, None]
        s = 1 + np.count_nonzero(edges < xa[:, None], axis=1)
        s[std == 0] = spec.b_center
        s[(xa < tree.min[node]) | (xa > tree.max[node])] = 0
        packed[active] += (s + 1) * base ** (levels - depth)

        key = node * (spec.b + 1) + s
        pos = np.searchsorted(keys, key)
        found = pos < keys.size
        found[found] = keys[pos[found]] == key[found]
        found &= s != 0
        active = active[found]
        node = pos[found] + 1
    return packed


def _parallel_map(func, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


@dataclass(frozen=True, eq=False)
class PatternModel:
    spec: BinSpec
    depth_limit: int
    feature_names: tuple[str, ...]
    trees: tuple[FeatureTree, ...]

    def __post_init__(self) -> None:
        if len(self.trees) != len(self.feature_names):
            raise ValueError("one tree per feature required")
        for t in self.trees:
            if t.spec != self.spec or t.depth_limit != self.depth_limit:
                raise ValueError("all trees must share bins and levels")

    def equals(self, other: PatternModel) -> bool:
        return (
            self.spec == other.spec
            and self.depth_limit == other.depth_limit
            and self.feature_names == other.feature_names
            and all(a.equals(b) for a, b in zip(self.trees, other.trees))
        )


@dataclass(frozen=True, eq=False)
class ProjectedDataset:
    """Dataset rewritten as combinations of packed codes (``codes[i, j]``)."""

    feature_names: tuple[str, ...]
    codes: np.ndarray
    spec: BinSpec
    depth_limit: int
    labels: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.codes.ndim != 2 or self.codes.shape[1] != len(self.feature_names):
            raise ValueError("codes must be an (n_rows, n_features) array")
        if self.labels is not None and len(self.labels) != self.codes.shape[0]:
            raise ValueError("labels length differs from row count")
        self.codes.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return int(self.codes.shape[0])

    def code(self, row: int, feature: int) -> Code:
        return unpack_code(self.codes[row, feature], self.spec, self.depth_limit)

    def combination(self, row: int) -> tuple[Code, ...]:
        return tuple(self.code(row, j) for j in range(self.codes.shape[1]))

    @property
    def rows(self) -> list[tuple[Code, ...]]:
        return [self.combination(i) for i in range(self.n_rows)]

    def equals(self, other: ProjectedDataset) -> bool:
        same_labels = (self.labels is None and other.labels is None) or (
            self.labels is not None
            and other.labels is not None
            and np.array_equal(self.labels, other.labels)
        )
        return (
            self.feature_names == other.feature_names
            and self.spec == other.spec
            and self.depth_limit == other.depth_limit
            and np.array_equal(self.codes, other.codes)
            and same_labels
        )


def project_with_model(model: PatternModel, dataset: Dataset, threads: int = 1) -> ProjectedDataset:
    if tuple(dataset.feature_names) != model.feature_names:
        missing = [f for f in model.feature_names if f not in dataset.feature_names]
        extra = [f for f in dataset.feature_names if f not in model.feature_names]
        raise ValueError(
            "feature mismatch: missing " + (", ".join(missing) or "none")
            + "; unexpected " + (", ".join(extra) or "none")
            + ("" if missing or extra else "; order differs")
        )
    cols = _parallel_map(
        lambda j: _project_column(model.trees[j], dataset.columns[j]),
        range(len(model.trees)),
        threads,
    )
    codes = np.stack(cols, axis=1) if cols else np.zeros((dataset.n_rows, 0), dtype=np.int64)
    return ProjectedDataset(
        model.feature_names, codes, model.spec, model.depth_limit, dataset.labels
    )


def project_dataset(
    dataset: Dataset,
    spec: BinSpec | int = BinSpec(),
    depth_limit: int = DEFAULT_LEVELS,
    threads: int = 1,
) -> tuple[PatternModel, ProjectedDataset]:
    """Build one tree per feature from its full column and project every cell."""
    if isinstance(spec, int):
        spec = BinSpec(spec)
    _check_packing(spec, depth_limit)
    if dataset.n_rows == 0:
        raise ValueError("cannot project an empty dataset")
    trees = _parallel_map(
        lambda col: build_feature_tree(col, spec, depth_limit), dataset.columns, threads
    )
    model = PatternModel(spec, depth_limit, tuple(dataset.feature_names), tuple(trees))
    return model, project_with_model(model, dataset, threads)
