import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import in_subdomain, naive_map
from spata.binning import (
    BinSpec,
    FeatureStats,
    feature_stats,
    map_value,
    segment_stats,
    subdomain_bounds,
)

ONE_TO_TEN = np.arange(1, 11, dtype=float)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
vectors = st.lists(finite, min_size=1, max_size=60)
odd_bins = st.sampled_from([3, 5, 7, 9, 11])


def resolvable(s: FeatureStats) -> bool:
    """Half a std is visible next to the mean in double precision."""
    return s.std == 0 or s.mean - 0.5 * s.std < s.mean


class TestBinSpec:
    @pytest.mark.parametrize("b", [3, 5, 9, 21])
    def test_center(self, b):
        assert BinSpec(b).b_center == (b + 1) // 2

    @pytest.mark.parametrize("b", [1, 2, 4, 8, 0, -3])
    def test_rejects_even_or_small(self, b):
        with pytest.raises(ValueError, match="odd"):
            BinSpec(b)


class TestFeatureStats:
    def test_one_to_ten(self):
        s = feature_stats(ONE_TO_TEN)
        assert s.mean == 5.5
        # population variance of 1..10 is 8.25
        assert s.std == pytest.approx(math.sqrt(8.25), rel=1e-15)
        assert (s.min, s.max, s.count) == (1.0, 10.0, 10)

    def test_constant(self):
        s = feature_stats([7.0, 7.0, 7.0])
        assert (s.mean, s.std) == (7.0, 0.0)

    def test_subnormal_spread_keeps_positive_std(self):
        s = feature_stats([0.0, 6.885521689990897e-283])
        assert s.std == pytest.approx(3.4427608449954487e-283, rel=1e-12)

    def test_constant_awkward_value(self):
        # 0.1 * 3 / 3 != 0.1 in floating point; constant vectors still get the exact value
        s = feature_stats([0.1, 0.1, 0.1])
        assert s.mean == 0.1 and s.std == 0.0

    def test_singleton(self):
        s = feature_stats([-2.5])
        assert (s.min, s.max, s.mean, s.std, s.count) == (-2.5, -2.5, -2.5, 0.0, 1)

    def test_errors(self):
        with pytest.raises(ValueError, match="empty"):
            feature_stats([])
        with pytest.raises(ValueError, match="non-finite"):
            feature_stats([1.0, math.inf])
        with pytest.raises(ValueError, match="non-finite"):
            feature_stats([math.nan])

    def test_order_independent(self):
        rng = np.random.default_rng(3)
        v = rng.normal(size=1000) * 1e3 + 17
        assert feature_stats(v) == feature_stats(rng.permutation(v))

    @given(vectors)
    def test_invariants(self, values):
        s = feature_stats(values)
        assert s.min <= s.mean <= s.max
        assert (s.std == 0) == (s.min == s.max)

    @given(st.lists(vectors, min_size=1, max_size=6))
    def test_segment_position_independent(self, groups):
        # the same segment sums to the same bits wherever it sits in the array
        flat = np.sort(np.concatenate([np.asarray(g, float) for g in groups]))
        rng = np.random.default_rng(len(flat))
        cuts = np.unique(np.concatenate([[0, flat.size], rng.integers(0, flat.size, size=3)]))
        starts, ends = cuts[:-1], cuts[1:]
        mean, std = segment_stats(flat, starts, ends)
        for i, (a, z) in enumerate(zip(starts, ends)):
            alone = feature_stats(flat[a:z])
            assert (alone.mean, alone.std) == (mean[i], std[i])


class TestSubdomainBounds:
    def test_one_to_ten_b9(self):
        iv = subdomain_bounds(feature_stats(ONE_TO_TEN), BinSpec(9))
        non_empty = [i.bin for i in iv if not i.empty]
        assert non_empty == [3, 4, 5, 6, 7]
        assert iv[4].lower == pytest.approx(4.0639, abs=1e-4)
        assert iv[4].upper == pytest.approx(6.9361, abs=1e-4)
        assert iv[4].lower_open
        assert iv[2].lower == 1.0 and not iv[2].lower_open
        assert iv[2].upper == pytest.approx(1.1916, abs=1e-4)
        # brute-force membership over the vector agrees with the bounds
        for x in ONE_TO_TEN:
            hits = [i.bin for i in iv if x in i]
            assert len(hits) == 1

    def test_constant(self):
        iv = subdomain_bounds(feature_stats([3.0, 3.0]), BinSpec(9))
        assert [i.bin for i in iv if not i.empty] == [5]
        assert (iv[4].lower, iv[4].upper) == (3.0, 3.0)

    @given(vectors, odd_bins)
    def test_center_bin_spans_half_sigma(self, values, b):
        s = feature_stats(values)
        spec = BinSpec(b)
        assume(resolvable(s))
        center = subdomain_bounds(s, spec)[spec.b_center - 1]
        if s.std > 0:
            assert center.lower == max(s.mean - 0.5 * s.std, s.min)
            assert center.upper == min(s.mean + 0.5 * s.std, s.max)
        assert not center.empty


class TestMapValue:
    def setup_method(self):
        self.iv = subdomain_bounds(feature_stats(ONE_TO_TEN), BinSpec(9))

    def test_examples(self):
        assert map_value(5.0, self.iv) == 5
        assert map_value(0.0, self.iv) == 0
        assert map_value(1.0, self.iv) == 3
        assert map_value(10.0, self.iv) == 7
        assert map_value(10.5, self.iv) == 0

    @pytest.mark.parametrize("x", [math.nan, math.inf, -math.inf])
    def test_non_finite(self, x):
        assert map_value(x, self.iv) == 0

    @given(vectors, odd_bins, st.data())
    @settings(max_examples=300)
    def test_matches_clause_oracle(self, values, b, data):
        spec = BinSpec(b)
        s = feature_stats(values)
        x = data.draw(st.one_of(st.sampled_from(values), finite))
        assert map_value(x, subdomain_bounds(s, spec)) == naive_map(x, values, b)

    @given(vectors, odd_bins)
    def test_mean_maps_to_center(self, values, b):
        s = feature_stats(values)
        assume(resolvable(s))
        assert map_value(s.mean, subdomain_bounds(s, BinSpec(b))) == BinSpec(b).b_center

    def test_partition_dense_grid(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            v = rng.standard_t(3, size=int(rng.integers(2, 200))) * rng.uniform(0.1, 100)
            s = feature_stats(v)
            if s.std == 0:
                continue
            for b in (3, 9):
                iv = subdomain_bounds(s, BinSpec(b))
                for x in np.linspace(s.min, s.max, 500):
                    hits = [i.bin for i in iv if x in i]
                    assert len(hits) == 1
                    assert in_subdomain(x, s, hits[0], b)


def test_feature_stats_rejects_bad_invariants():
    with pytest.raises(ValueError):
        FeatureStats(min=1.0, max=2.0, mean=3.0, std=0.1, count=2)
    with pytest.raises(ValueError):
        FeatureStats(min=1.0, max=2.0, mean=1.5, std=0.0, count=2)
