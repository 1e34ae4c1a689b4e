"""Tests for the statistical checks and the permutation audit.

Statistical tests run on seeded data with small alpha (0.001) so a correct
implementation fails them with negligible probability.
"""

import math

import numpy as np
import pytest
from scipy import stats

from src.core.builder import ImageStore, build, prepare_mask
from src.core.config import BuildConfig, PreprocessConfig, VerifyConfig
from src.core.errors import AuditError, ParameterError, SampleSizeError
from src.core.model import GrayImage, RegionPartition
from src.core.randomness import derive_stream, sample_gaussian
from src.core.synthesis import synthesize_image
from src.core.verification import (
    audit_permutation,
    chi_square_gof,
    equiprobable_edges,
    histogram_export,
    ks_coefficient,
    ks_one_sample,
    ks_statistic,
    ks_two_sample,
    normal_cdf,
    partition_violations,
    per_image_ks,
    random_position_pairs,
    region_checks,
    region_order_holds,
    run_verification,
    stationarity_test,
)

ALPHA = 0.001
SMALL = BuildConfig(global_seed=42, train_per_class=2, test_per_class=1, classes=[0, 1, 2])
LENIENT = VerifyConfig(alpha=ALPHA, min_image_pass_fraction=0.75)


def _iid_store(n: int, seed: int = 0) -> ImageStore:
    images = np.random.default_rng(seed).normal(0.0, 32.0, (n, 32, 32)).astype(np.float32)
    return ImageStore(images, np.zeros(n, dtype=np.uint8), n)


def _with_pixel(store: ImageStore, index: int, delta: float) -> ImageStore:
    images = np.array(store.images)
    images[index, 0, 0] += delta
    return ImageStore(images, store.labels, store.n_train)


@pytest.fixture
def small_build(make_memory_source):
    source = make_memory_source(per_class=3, classes=[0, 1, 2])
    return build(SMALL, source), source


class TestKolmogorovSmirnov:
    """Tests for one- and two-sample KS."""

    @pytest.mark.parametrize(
        "alpha,expected", [(0.01, 1.63), (0.05, 1.36), (0.1, math.sqrt(-0.5 * math.log(0.05)))]
    )
    def test_coefficients(self, alpha, expected):
        assert ks_coefficient(alpha) == pytest.approx(expected)

    def test_statistic_by_hand(self):
        def uniform(x):
            return np.clip(x, 0.0, 1.0)

        assert ks_statistic(np.array([0.5]), uniform) == pytest.approx(0.5)
        assert ks_statistic(np.array([0.25, 0.75]), uniform) == pytest.approx(0.25)

    def test_matches_scipy(self):
        samples = sample_gaussian(derive_stream(9, 9), 500, 0.0, 1024.0)
        expected = stats.kstest(samples, "norm", args=(0.0, 32.0)).statistic
        assert ks_statistic(samples, normal_cdf(1024.0)) == pytest.approx(expected)

    def test_gaussian_sample_passes(self):
        samples = sample_gaussian(derive_stream(42, 0), 20000, 0.0, 1024.0)
        report = ks_one_sample(samples, normal_cdf(1024.0), ALPHA)
        assert report.passed
        assert report.statistic < report.critical_value
        assert report.sample_size == 20000

    def test_shifted_sample_fails(self):
        samples = sample_gaussian(derive_stream(42, 0), 20000, 8.0, 1024.0)
        assert not ks_one_sample(samples, normal_cdf(1024.0), ALPHA).passed

    def test_empty_sample(self):
        with pytest.raises(SampleSizeError):
            ks_one_sample([], normal_cdf())

    def test_two_sample_extremes(self):
        a = np.arange(10.0)
        assert ks_two_sample(a, a).statistic == 0.0
        report = ks_two_sample(a, a + 100.0)
        assert report.statistic == 1.0
        assert not report.passed
        assert report.critical_value == pytest.approx(1.63 * math.sqrt(2 / 10))

    def test_two_sample_unequal_sizes(self):
        report = ks_two_sample([1.0, 2.0, 3.0], [2.5, 4.0, 5.0, 6.0])
        assert report.statistic == pytest.approx(0.75)
        assert report.sample_size == 3
        assert report.critical_value == pytest.approx(1.63 * math.sqrt(7 / 12))


class TestCalibration:
    """Under the null, each check rejects at close to its nominal rate."""

    TRIALS = 1000
    LEVEL = 0.05

    def _band(self) -> tuple[float, float]:
        mean = self.TRIALS * self.LEVEL
        sd = math.sqrt(self.TRIALS * self.LEVEL * (1 - self.LEVEL))
        return mean - 3 * sd, mean + 3 * sd

    def test_per_image_ks_rejection_rate(self):
        images = np.stack([
            sample_gaussian(derive_stream(77, i), 1024, 0.0, 1024.0).reshape(32, 32)
            for i in range(self.TRIALS)
        ]).astype(np.float32)
        store = ImageStore(images, np.zeros(self.TRIALS, dtype=np.uint8), self.TRIALS)
        d, _ = per_image_ks(store, 1024.0, self.LEVEL, 0.0)
        rejections = int(np.sum(d >= ks_coefficient(self.LEVEL) / 32.0))
        low, high = self._band()
        assert low <= rejections <= high

    def test_chi_square_rejection_rate(self):
        edges = equiprobable_edges(50)
        cdf = normal_cdf(1024.0)
        rejections = sum(
            not chi_square_gof(
                sample_gaussian(derive_stream(78, i), 1024, 0.0, 1024.0), edges, cdf, self.LEVEL
            ).passed
            for i in range(self.TRIALS)
        )
        low, high = self._band()
        assert low <= rejections <= high


class TestChiSquare:
    """Tests for the chi-square goodness-of-fit test."""

    def test_gaussian_sample_passes(self):
        samples = sample_gaussian(derive_stream(5, 0), 50000, 0.0, 1024.0)
        report = chi_square_gof(samples, equiprobable_edges(50), normal_cdf(1024.0), ALPHA)
        assert report.passed
        assert report.details["degrees_of_freedom"] == 49
        assert report.critical_value == pytest.approx(stats.chi2.ppf(1 - ALPHA, 49))

    def test_uniform_sample_fails(self):
        samples = np.random.default_rng(1).uniform(-64, 64, 50000)
        assert not chi_square_gof(samples, equiprobable_edges(50), normal_cdf(1024.0), ALPHA).passed

    def test_finite_edges_normalize_expected_counts(self):
        samples = sample_gaussian(derive_stream(6, 0), 20000, 0.0, 1024.0)
        edges = np.linspace(-64.0, 64.0, 17)
        report = chi_square_gof(samples, edges, normal_cdf(1024.0), ALPHA)
        assert report.passed
        assert report.sample_size == int(np.sum(np.abs(samples) <= 64.0))

    def test_sparse_bins_rejected(self):
        samples = sample_gaussian(derive_stream(5, 0), 20, 0.0, 1024.0)
        with pytest.raises(ParameterError):
            chi_square_gof(samples, equiprobable_edges(50), normal_cdf(1024.0))


class TestStationarity:
    """Tests for the two-sample KS between positions."""

    def test_iid_store_passes(self):
        store = _iid_store(1000)
        reports = stationarity_test(store, random_position_pairs(20, seed=1), ALPHA)
        assert len(reports) == 20
        assert sum(r.passed for r in reports) >= 18

    def test_position_bias_detected(self):
        images = np.array(_iid_store(1000).images)
        images[:, 0, 0] += 64.0
        store = ImageStore(images, np.zeros(1000), 1000)
        (report,) = stationarity_test(store, [((0, 0), (5, 5))], ALPHA)
        assert not report.passed
        assert report.details["positions"] == [[0, 0], [5, 5]]

    def test_needs_enough_images(self):
        with pytest.raises(SampleSizeError):
            stationarity_test(_iid_store(50), random_position_pairs(3))

    def test_random_pairs(self):
        pairs = random_position_pairs(500, seed=3)
        assert pairs == random_position_pairs(500, seed=3)
        assert all(a != b for a, b in pairs)
        assert all(0 <= v < 32 for a, b in pairs for v in (*a, *b))


class TestAudit:
    """Tests for the permutation audit."""

    def test_built_dataset_has_no_mismatches(self, small_build):
        result, _ = small_build
        report = audit_permutation(result.store, result.manifest)
        assert report.passed
        assert report.statistic == 0.0
        assert report.sample_size == 9

    def test_changed_value_is_reported(self, small_build):
        result, _ = small_build
        report = audit_permutation(_with_pixel(result.store, 4, 0.5), result.manifest)
        assert not report.passed
        assert report.details["mismatched_indices"] == [4]

    def test_swapped_pixels_keep_multiset(self, small_build):
        result, _ = small_build
        images = np.array(result.store.images)
        images[2, 0, 0], images[2, 31, 31] = images[2, 31, 31], images[2, 0, 0]
        store = ImageStore(images, result.store.labels, result.store.n_train)
        assert audit_permutation(store, result.manifest).passed

    def test_length_mismatch(self, small_build):
        result, _ = small_build
        with pytest.raises(AuditError):
            audit_permutation(_iid_store(3), result.manifest)


class TestPerImageAndHistogram:
    """Tests for per-image KS and histogram exports."""

    def test_per_image_pass_fraction(self):
        d, summary = per_image_ks(_iid_store(200, seed=5), 1024.0, 0.01, 0.9)
        assert d.shape == (200,)
        assert summary.passed
        assert summary.statistic >= 0.9

    def test_per_image_matches_one_sample(self):
        store = _iid_store(3, seed=8)
        d, _ = per_image_ks(store, 1024.0, 0.01, 0.5)
        single = ks_one_sample(store.images[1], normal_cdf(1024.0)).statistic
        assert d[1] == pytest.approx(single)

    def test_zero_image_histogram(self):
        hist = histogram_export(GrayImage(np.zeros((32, 32))), 8.0, 1024.0)
        assert hist.counts.sum() == 1024
        zero = int(np.flatnonzero(hist.centers == 0.0)[0])
        assert hist.counts[zero] == 1024
        assert hist.centers[0] <= -128.0 and hist.centers[-1] >= 128.0
        assert np.allclose(hist.centers % 8.0, 0.0)
        assert hist.curve[zero] == pytest.approx(1024 * 8 / (32 * math.sqrt(2 * math.pi)))

    def test_synthetic_histogram_sums_to_pixel_count(self, small_build):
        result, _ = small_build
        hist = histogram_export(result.store.image(0), 4.0, 1024.0)
        assert hist.counts.sum() == 1024
        assert len(hist.rows()) == hist.centers.size

    def test_bin_width_must_be_positive(self):
        with pytest.raises(ParameterError):
            histogram_export(GrayImage(np.zeros((2, 2))), 0.0)


class TestRegionChecks:
    """Tests for partition and ordering checks."""

    def test_synthetic_image_satisfies_both(self, make_digit):
        stages = prepare_mask(make_digit(6), PreprocessConfig())
        image, _ = synthesize_image(stages.partition, derive_stream(1, 0))
        assert partition_violations(stages.partition, stages.reduced) == 0
        assert region_order_holds(image, stages.partition)

    def test_ordering_violation_detected(self, make_digit):
        stages = prepare_mask(make_digit(6), PreprocessConfig())
        image, _ = synthesize_image(stages.partition, derive_stream(1, 0))
        assert not region_order_holds(GrayImage(-image.values), stages.partition)

    def test_partition_violation_counted(self, make_digit):
        stages = prepare_mask(make_digit(6), PreprocessConfig())
        labels = np.zeros((32, 32), dtype=np.uint8)
        assert partition_violations(RegionPartition(labels), stages.reduced) == stages.reduced.foreground_count

    def test_region_checks_on_build(self, small_build):
        result, source = small_build
        reports = region_checks(result.manifest, result.store, source)
        assert [r.test_name for r in reports] == ["partition_property", "region_ordering"]
        assert all(r.passed for r in reports)


class TestRunVerification:
    """Tests for the full suite."""

    def test_fresh_dataset_passes(self, small_build):
        result, source = small_build
        outcome = run_verification(result.manifest, result.store, LENIENT, source)
        names = [r.test_name for r in outcome.reports]
        assert names[:5] == ["store_hash", "audit_permutation", "pooled_ks", "per_image_ks", "pooled_chi_square"]
        assert outcome.passed, outcome.failing
        stationarity = next(r for r in outcome.reports if r.test_name == "stationarity")
        assert stationarity.skipped

    def test_tampered_dataset_fails(self, small_build):
        result, _ = small_build
        outcome = run_verification(result.manifest, _with_pixel(result.store, 7, 1.0), LENIENT)
        assert not outcome.passed
        assert {"store_hash", "audit_permutation"} <= set(outcome.failing)

    def test_stationarity_runs_on_large_stores(self):
        from src.core.model import DatasetManifest, RecordMeta, Split

        store = _iid_store(1000, seed=2)
        manifest = DatasetManifest(
            generator="test",
            created_at="now",
            global_seed=0,
            parameters=BuildConfig(train_per_class=100, test_per_class=0),
            counts={},
            records=[
                RecordMeta(index=i, source_id=str(i), label=0, split=Split.TRAIN, rng_stream_id=i)
                for i in range(1000)
            ],
        )
        outcome = run_verification(
            manifest, store, VerifyConfig(alpha=ALPHA, stationarity_pairs=20, min_pair_pass_fraction=0.9)
        )
        by_name = {r.test_name: r for r in outcome.reports}
        assert by_name["stationarity"].passed and not by_name["stationarity"].skipped
        assert len(outcome.pair_reports) == 20
        # iid draws are not permutations of the recorded streams
        assert not by_name["audit_permutation"].passed
