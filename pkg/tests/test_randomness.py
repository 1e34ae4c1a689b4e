"""Tests for random streams, Gaussian sampling and shuffling."""

import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from src.core.errors import ParameterError
from src.core.randomness import (
    RngStream,
    box_muller,
    derive_stream,
    gaussian_vector,
    permutation,
    sample_gaussian,
    shuffle,
)

U64 = st.integers(min_value=0, max_value=2**64 - 1)


class TestRngStream:
    """Tests for the counter-based generator."""

    def test_matches_splitmix64_reference(self):
        """Key 0 reproduces the published SplitMix64 sequence seeded with 0."""
        out = RngStream(0, 0).next_uint64(3)
        assert [int(v) for v in out] == [
            0xE220A8397B1DCDAF,
            0x6E789E6AA1B965F4,
            0x06C45D188009454F,
        ]

    def test_chunking_does_not_change_output(self):
        a = derive_stream(5, 9)
        b = derive_stream(5, 9)
        chunked = np.concatenate([a.next_uint64(2), a.next_uint64(5)])
        assert np.array_equal(chunked, b.next_uint64(7))
        assert a.counter == 7

    def test_same_inputs_same_stream(self):
        assert np.array_equal(derive_stream(42, 3).uniform(10), derive_stream(42, 3).uniform(10))

    def test_streams_are_distinct(self):
        first = {tuple(derive_stream(42, i).next_uint64(2).tolist()) for i in range(200)}
        assert len(first) == 200
        assert not np.array_equal(derive_stream(1, 0).uniform(4), derive_stream(2, 0).uniform(4))

    @given(seed=U64, stream_id=U64)
    def test_uniform_range(self, seed, stream_id):
        u = derive_stream(seed, stream_id).uniform(64)
        assert np.all(u >= 0.0) and np.all(u < 1.0)


class TestGaussian:
    """Tests for Box-Muller sampling."""

    def test_box_muller_known_points(self):
        z0, z1 = box_muller(1.0, 0.0)
        assert (float(z0), float(z1)) == (0.0, 0.0)
        z0, z1 = box_muller(math.exp(-0.5), 0.25)
        assert float(z0) == pytest.approx(0.0, abs=1e-12)
        assert float(z1) == pytest.approx(1.0)

    def test_moments(self):
        values = sample_gaussian(derive_stream(42, 0), 20000, 0.0, 1024.0)
        assert abs(values.mean()) < 5 * 32 / math.sqrt(20000)
        assert values.var() == pytest.approx(1024.0, rel=0.05)

    def test_mean_shift(self):
        values = sample_gaussian(derive_stream(1, 1), 4000, 10.0, 4.0)
        assert values.mean() == pytest.approx(10.0, abs=0.2)

    def test_odd_count_consumes_whole_pair(self):
        stream = derive_stream(0, 0)
        assert sample_gaussian(stream, 3, 0.0, 1.0).shape == (3,)
        assert stream.counter == 4

    def test_prefix_property(self):
        """The first n draws do not depend on how many are requested."""
        short = sample_gaussian(derive_stream(7, 7), 10, 0.0, 1.0)
        long = sample_gaussian(derive_stream(7, 7), 11, 0.0, 1.0)
        assert np.array_equal(short, long[:10])

    @pytest.mark.parametrize("variance,n", [(0.0, 4), (-1.0, 4), (1.0, 0)])
    def test_invalid_parameters(self, variance, n):
        with pytest.raises(ParameterError):
            sample_gaussian(derive_stream(0, 0), n, 0.0, variance)

    def test_gaussian_vector_is_float32_image(self):
        gv = gaussian_vector(derive_stream(42, 0))
        assert len(gv) == 1024
        assert gv.raw.dtype == np.float32
        assert np.all(np.diff(gv.sorted_desc) <= 0)


class TestPermutation:
    """Tests for Fisher-Yates shuffling."""

    @pytest.mark.parametrize("n", [0, 1])
    def test_trivial_sizes_consume_nothing(self, n):
        stream = derive_stream(0, 0)
        assert permutation(stream, n).tolist() == list(range(n))
        assert stream.counter == 0

    def test_consumes_n_minus_one_uniforms(self):
        stream = derive_stream(0, 0)
        permutation(stream, 10)
        assert stream.counter == 9

    @given(seed=U64, n=st.integers(min_value=0, max_value=300))
    @settings(max_examples=50)
    def test_is_a_permutation(self, seed, n):
        perm = permutation(derive_stream(seed, 1), n)
        assert sorted(perm.tolist()) == list(range(n))

    def test_all_orders_equally_likely(self):
        stream = derive_stream(2024, 0)
        counts = Counter(tuple(permutation(stream, 3).tolist()) for _ in range(6000))
        assert len(counts) == 6
        # 1000 expected per order, sd about 29
        assert all(850 < c < 1150 for c in counts.values())

    def test_four_item_shuffle_is_uniform(self):
        stream = derive_stream(31, 7)
        shuffles = 100_000
        counts = Counter(tuple(shuffle(stream, ["a", "b", "c", "d"])) for _ in range(shuffles))
        assert len(counts) == 24
        statistic, _ = stats.chisquare(list(counts.values()))
        # 23 degrees of freedom
        assert statistic < stats.chi2.ppf(0.999, 23)

    def test_shuffle_keeps_container_kind(self):
        items = ["a", "b", "c", "d"]
        shuffled = shuffle(derive_stream(3, 3), items)
        assert isinstance(shuffled, list) and sorted(shuffled) == items
        array = np.arange(5)
        out = shuffle(derive_stream(3, 3), array)
        assert isinstance(out, np.ndarray) and sorted(out.tolist()) == list(range(5))
