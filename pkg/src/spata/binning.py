"""Single-level feature statistics and standard-deviation subdomains.

A feature's domain ``[min, max]`` is cut into at most ``b`` bins of one
population standard deviation each, centred on the mean.  Bin ``(b+1)/2``
always holds the mean; the two edge bins are clipped to the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BinInterval",
    "BinSpec",
    "FeatureStats",
    "bin_edges",
    "feature_stats",
    "map_value",
    "segment_stats",
    "subdomain_bounds",
]


_TINY = math.ulp(0.0)


@dataclass(frozen=True)
class FeatureStats:
    min: float
    max: float
    mean: float
    std: float
    count: int

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not (self.min <= self.mean <= self.max):
            raise ValueError(f"mean {self.mean!r} outside [{self.min!r}, {self.max!r}]")
        if self.std < 0 or (self.std == 0) != (self.min == self.max):
            raise ValueError("std must be 0 exactly when min == max")


@dataclass(frozen=True)
class BinSpec:
    """Maximum number of bins ``b``; must be odd and at least 3."""

    b: int = 9

    def __post_init__(self) -> None:
        if isinstance(self.b, bool) or not isinstance(self.b, (int, np.integer)):
            raise TypeError("bins must be an integer")
        if self.b < 3 or self.b % 2 == 0:
            raise ValueError("bins must be odd and ≥ 3")

    @property
    def b_center(self) -> int:
        return (self.b + 1) // 2

    def offsets(self) -> np.ndarray:
        """Half-integer multipliers of std for the ``b - 1`` inner edges.

        Edge ``s`` (1-based) is the upper bound of bin ``s`` and the lower
        bound of bin ``s + 1``: ``mean + (s - b_center + 0.5) * std``.
        """
        s = np.arange(1, self.b, dtype=np.float64)
        return s - self.b_center + 0.5


@dataclass(frozen=True)
class BinInterval:
    bin: int
    lower: float
    upper: float
    lower_open: bool
    empty: bool

    def __contains__(self, x: float) -> bool:
        if self.empty:
            return False
        above = x > self.lower if self.lower_open else x >= self.lower
        return above and x <= self.upper


def segment_stats(
    sorted_values: np.ndarray, starts: np.ndarray, ends: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and population std of ``sorted_values[starts[i]:ends[i]]`` for every i.

    Every statistic in the package goes through this function, so a segment
    always yields the same bits whether it is summed alone or inside a larger
    array.  Segments must be non-empty and ascending-sorted; constant segments
    get their exact value as mean and std 0, and means are clamped into the
    segment's range.
    """
    starts = np.asarray(starts, dtype=np.int64)
    ends = np.asarray(ends, dtype=np.int64)
    if starts.size == 0:
        empty = np.empty(0, dtype=np.float64)
        return empty, empty.copy()
    counts = (ends - starts).astype(np.float64)
    padded = np.append(sorted_values, 0.0)
    bounds = np.empty(2 * starts.size, dtype=np.int64)
    bounds[0::2] = starts
    bounds[1::2] = ends

    lo = sorted_values[starts]
    hi = sorted_values[ends - 1]
    mean = np.add.reduceat(padded, bounds)[0::2] / counts
    mean = np.minimum(np.maximum(mean, lo), hi)

    lengths = ends - starts
    dev = np.zeros(padded.size, dtype=np.float64)
    idx = _segment_indices(starts, lengths)
    dev[idx] = sorted_values[idx] - np.repeat(mean, lengths)
    var = np.add.reduceat(dev * dev, bounds)[0::2] / counts
    std = np.sqrt(var)

    # Squares that under- or overflow: redo those segments scaled by their
    # largest deviation.
    bad = np.flatnonzero(((var == 0.0) & (lo != hi)) | ~np.isfinite(var))
    for i in bad.tolist():
        seg = dev[starts[i] : ends[i]]
        scale = float(np.max(np.abs(seg)))
        scaled = seg / scale
        std[i] = scale * math.sqrt(float(np.add.reduceat(scaled * scaled, [0])[0]) / counts[i])

    const = lo == hi
    mean[const] = lo[const]
    std[const] = 0.0
    # Spread below the resolution of the squared deviations: keep std > 0
    # whenever min < max.
    std[(std == 0.0) & ~const] = _TINY
    return mean, std


def _segment_indices(starts: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    total = int(lengths.sum())
    seg_offsets = np.repeat(np.cumsum(lengths) - lengths, lengths)
    return np.repeat(starts, lengths) + (np.arange(total) - seg_offsets)


def feature_stats(values) -> FeatureStats:
    """Statistics of one numeric vector.

    The values are summed in ascending order, so the result does not depend
    on row order.
    """
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("cannot compute statistics of an empty vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector contains non-finite values")
    arr = np.sort(arr)
    mean, std = segment_stats(arr, np.array([0]), np.array([arr.size]))
    return FeatureStats(float(arr[0]), float(arr[-1]), float(mean[0]), float(std[0]), int(arr.size))


def bin_edges(stats: FeatureStats, spec: BinSpec) -> np.ndarray:
    """The ``b - 1`` inner edges, nondecreasing."""
    return stats.mean + spec.offsets() * stats.std


def subdomain_bounds(stats: FeatureStats, spec: BinSpec) -> list[BinInterval]:
    b = spec.b
    if stats.std == 0:
        out = []
        for s in range(1, b + 1):
            if s == spec.b_center:
                out.append(BinInterval(s, stats.min, stats.max, False, False))
            else:
                out.append(BinInterval(s, stats.min, stats.min, True, True))
        return out

    edges = [float(e) for e in bin_edges(stats, spec)]
    lo, hi = stats.min, stats.max
    out = []
    for s in range(1, b + 1):
        raw_lower = None if s == 1 else edges[s - 2]
        raw_upper = None if s == b else edges[s - 1]
        if raw_lower is None or raw_lower < lo:
            lower, lower_open = lo, False
        else:
            lower, lower_open = raw_lower, True
        upper = hi if raw_upper is None else min(raw_upper, hi)
        empty = lower >= upper if lower_open else lower > upper
        out.append(BinInterval(s, lower, upper, lower_open, empty))
    return out


def map_value(x: float, intervals: list[BinInterval]) -> int:
    """Bin number of ``x``, or 0 when it falls outside every subdomain."""
    if not math.isfinite(x):
        return 0
    for interval in intervals:
        if x in interval:
            return interval.bin
    return 0
