"""Distribution checks for generated datasets.

Covers one-sample KS and chi-square goodness of fit against N(0, variance),
two-sample KS between pixel positions (spatial stationarity), the
permutation audit that replays every image's draws from the manifest, and
histogram exports. All checks take float data; quantized exports never
reach this module.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from pydantic import BaseModel, Field
from scipy import stats

from .builder import ImageStore, prepare_mask
from .config import VerifyConfig
from .errors import (
    AuditError,
    DegenerateMaskError,
    DimensionError,
    IngestionError,
    ParameterError,
    SampleSizeError,
)
from .io_formats import SourceProvider
from .model import (
    IMAGE_PIXELS,
    IMAGE_SIDE,
    PIXEL_DTYPE,
    PLACEMENT_ORDER,
    BinaryImage,
    DatasetManifest,
    GrayImage,
    Region,
    RegionPartition,
)
from .randomness import derive_stream, gaussian_vector

logger = logging.getLogger(__name__)

CDF = Callable[[np.ndarray], np.ndarray]
Position = tuple[int, int]

# Asymptotic Kolmogorov critical coefficients c(alpha).
KS_COEFFICIENTS = {0.01: 1.63, 0.05: 1.36}
MIN_EXPECTED_PER_BIN = 5.0
MIN_STATIONARITY_IMAGES = 1000
# Stream id reserved for choosing position pairs; image streams count up from 0.
PAIR_STREAM_ID = 2**64 - 1


class TestReport(BaseModel):
    """Outcome of one statistical check; for KS / chi-square, pass iff statistic < critical."""

    __test__ = False

    test_name: str
    statistic: float
    critical_value: float
    alpha: float
    passed: bool
    sample_size: int
    details: dict[str, Any] = Field(default_factory=dict)

    @property
    def skipped(self) -> bool:
        return "skipped" in self.details


def ks_coefficient(alpha: float) -> float:
    """c(alpha) such that the KS critical value is c / sqrt(n)."""
    if alpha in KS_COEFFICIENTS:
        return KS_COEFFICIENTS[alpha]
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return math.sqrt(-0.5 * math.log(alpha / 2))


def normal_cdf(variance: float = 1024.0, mean: float = 0.0) -> CDF:
    dist = stats.norm(loc=mean, scale=math.sqrt(variance))
    return dist.cdf


def ks_statistic(samples: np.ndarray, cdf: CDF) -> float:
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.size
    f = cdf(x)
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def ks_one_sample(
    samples: Sequence[float] | np.ndarray,
    cdf: CDF,
    alpha: float = 0.01,
    test_name: str = "ks_one_sample",
) -> TestReport:
    """One-sample KS: D = sup |F_n - F| against c(alpha) / sqrt(n)."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise SampleSizeError("KS test needs at least one sample")
    statistic = ks_statistic(x, cdf)
    critical = ks_coefficient(alpha) / math.sqrt(x.size)
    return TestReport(
        test_name=test_name,
        statistic=statistic,
        critical_value=critical,
        alpha=alpha,
        passed=statistic < critical,
        sample_size=int(x.size),
    )


def ks_two_sample(
    a: np.ndarray, b: np.ndarray, alpha: float = 0.01, test_name: str = "ks_two_sample"
) -> TestReport:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    n, m = a.size, b.size
    if n == 0 or m == 0:
        raise SampleSizeError("two-sample KS needs non-empty samples")
    statistic = float(stats.ks_2samp(a, b, method="asymp").statistic)
    critical = ks_coefficient(alpha) * math.sqrt((n + m) / (n * m))
    return TestReport(
        test_name=test_name,
        statistic=statistic,
        critical_value=critical,
        alpha=alpha,
        passed=statistic < critical,
        sample_size=min(n, m),
    )


def equiprobable_edges(bins: int, variance: float = 1024.0) -> np.ndarray:
    """Bin edges with equal N(0, variance) mass per bin, open-ended."""
    probs = np.linspace(0.0, 1.0, bins + 1)
    return stats.norm.ppf(probs, loc=0.0, scale=math.sqrt(variance))


def chi_square_gof(
    samples: Sequence[float] | np.ndarray,
    bins: Sequence[float] | np.ndarray,
    cdf: CDF,
    alpha: float = 0.01,
    test_name: str = "chi_square_gof",
) -> TestReport:
    """Pearson chi-square over the given bin edges, (bins - 1) degrees of freedom.

    Samples outside the outer edges are ignored and the expected counts are
    normalized to the mass the edges cover.

    Raises:
        ParameterError: if any bin expects fewer than 5 samples.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    edges = np.asarray(bins, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 3 or np.any(np.diff(edges) <= 0):
        raise ParameterError("need at least two bins with increasing edges")
    inside = (x >= edges[0]) & (x <= edges[-1])
    idx = np.clip(np.searchsorted(edges, x[inside], side="right") - 1, 0, edges.size - 2)
    observed = np.bincount(idx, minlength=edges.size - 1).astype(np.float64)
    mass = np.diff(cdf(edges))
    expected = observed.sum() * mass / mass.sum()
    if np.any(expected < MIN_EXPECTED_PER_BIN):
        raise ParameterError(
            f"expected count {expected.min():.2f} < {MIN_EXPECTED_PER_BIN} in some bin; "
            "use fewer or wider bins"
        )
    statistic = float(np.sum((observed - expected) ** 2 / expected))
    dof = edges.size - 2
    critical = float(stats.chi2.ppf(1 - alpha, dof))
    return TestReport(
        test_name=test_name,
        statistic=statistic,
        critical_value=critical,
        alpha=alpha,
        passed=statistic < critical,
        sample_size=int(observed.sum()),
        details={"degrees_of_freedom": dof},
    )


def random_position_pairs(count: int, seed: int = 0) -> list[tuple[Position, Position]]:
    """``count`` pairs of distinct grid positions drawn from a reserved stream."""
    stream = derive_stream(seed, PAIR_STREAM_ID)
    u = stream.uniform(2 * count)
    first = (u[0::2] * IMAGE_PIXELS).astype(np.int64)
    second = (first + 1 + (u[1::2] * (IMAGE_PIXELS - 1)).astype(np.int64)) % IMAGE_PIXELS
    return [
        (divmod(int(a), IMAGE_SIDE), divmod(int(b), IMAGE_SIDE))
        for a, b in zip(first, second)
    ]


def all_position_pairs() -> Iterable[tuple[Position, Position]]:
    for a, b in itertools.combinations(range(IMAGE_PIXELS), 2):
        yield divmod(a, IMAGE_SIDE), divmod(b, IMAGE_SIDE)


def stationarity_test(
    store: ImageStore | np.ndarray,
    positions: Iterable[tuple[Position, Position]],
    alpha: float = 0.01,
    min_images: int = MIN_STATIONARITY_IMAGES,
) -> list[TestReport]:
    """Two-sample KS between the values two positions take across all images.

    Raises:
        SampleSizeError: with fewer than ``min_images`` images.
    """
    images = store.images if isinstance(store, ImageStore) else np.asarray(store)
    if images.shape[0] < min_images:
        raise SampleSizeError(
            f"stationarity needs at least {min_images} images, got {images.shape[0]}"
        )
    reports = []
    for (r1, c1), (r2, c2) in positions:
        report = ks_two_sample(
            images[:, r1, c1],
            images[:, r2, c2],
            alpha,
            test_name=f"stationarity({r1},{c1})-({r2},{c2})",
        )
        report.details["positions"] = [[r1, c1], [r2, c2]]
        reports.append(report)
    return reports


def audit_permutation(store: ImageStore, manifest: DatasetManifest) -> TestReport:
    """Replay every image's draws and compare value multisets.

    Raises:
        AuditError: if the manifest and the store do not describe the same images.
    """
    records = sorted(manifest.records, key=lambda r: r.index)
    if len(records) != len(store):
        raise AuditError(
            f"manifest lists {len(records)} records, store holds {len(store)} images"
        )
    out_of_range = [r.index for r in records if r.index >= len(store)]
    if out_of_range:
        raise AuditError("manifest indices outside the store", out_of_range)

    variance = manifest.parameters.variance
    mismatched: list[int] = []
    for record in records:
        gv = gaussian_vector(
            derive_stream(manifest.global_seed, record.rng_stream_id), variance
        )
        values = np.sort(store.images[record.index].ravel().astype(PIXEL_DTYPE))[::-1]
        if not np.array_equal(values, gv.sorted_desc):
            mismatched.append(record.index)
    if mismatched:
        logger.warning(f"Permutation audit: {len(mismatched)} mismatching image(s)")
    return TestReport(
        test_name="audit_permutation",
        statistic=float(len(mismatched)),
        critical_value=1.0,
        alpha=0.0,
        passed=not mismatched,
        sample_size=len(records),
        details={"mismatched_indices": mismatched[:100], "mismatch_count": len(mismatched)},
    )


def per_image_ks(
    store: ImageStore, variance: float, alpha: float, min_pass_fraction: float
) -> tuple[np.ndarray, TestReport]:
    """KS of each image against N(0, variance); returns D per image and a summary."""
    if len(store) == 0:
        raise SampleSizeError("no images to test")
    cdf = normal_cdf(variance)
    x = np.sort(store.images.reshape(len(store), -1).astype(np.float64), axis=1)
    n = x.shape[1]
    f = cdf(x)
    upper = (np.arange(1, n + 1) / n - f).max(axis=1)
    lower = (f - np.arange(0, n) / n).max(axis=1)
    d = np.maximum(upper, lower)
    critical = ks_coefficient(alpha) / math.sqrt(n)
    pass_fraction = float(np.mean(d < critical))
    summary = TestReport(
        test_name="per_image_ks",
        statistic=pass_fraction,
        critical_value=min_pass_fraction,
        alpha=alpha,
        passed=pass_fraction >= min_pass_fraction,
        sample_size=len(store),
        details={"per_image_critical_value": critical, "failing_images": int(np.sum(d >= critical))},
    )
    return d, summary


def partition_violations(partition: RegionPartition, binary: BinaryImage) -> int:
    """Count pixels where the partition disagrees with the binary image."""
    if sum(partition.region_sizes) != binary.bits.size:
        return binary.bits.size
    inner = partition.mask(Region.INSIDE) | partition.mask(Region.INSIDE_BOUNDARY)
    return int(np.count_nonzero(inner != binary.bits))


def region_order_holds(image: GrayImage, partition: RegionPartition) -> bool:
    """Check min(previous region) >= max(next region) along PLACEMENT_ORDER."""
    values = image.values
    previous_min: float | None = None
    for region in PLACEMENT_ORDER:
        members = values[partition.mask(region)]
        if members.size == 0:
            continue
        if previous_min is not None and previous_min < members.max():
            return False
        previous_min = float(members.min())
    return True


def region_checks(
    manifest: DatasetManifest, store: ImageStore, source: SourceProvider
) -> list[TestReport]:
    """Recompute each record's mask and check partition and value ordering."""
    preprocess = manifest.parameters.preprocess
    partition_bad: list[int] = []
    order_bad: list[int] = []
    for index, record in store.records(manifest):
        try:
            src, _ = source.load(record.source_id)
            stages = prepare_mask(src, preprocess)
        except (IngestionError, DegenerateMaskError, DimensionError) as e:
            raise AuditError(f"record {index}: {e}", [index]) from e
        if partition_violations(stages.partition, stages.reduced):
            partition_bad.append(index)
        if not region_order_holds(record.image, stages.partition):
            order_bad.append(index)
    return [
        TestReport(
            test_name=name,
            statistic=float(len(bad)),
            critical_value=1.0,
            alpha=0.0,
            passed=not bad,
            sample_size=len(store),
            details={"violating_indices": bad[:100]},
        )
        for name, bad in (("partition_property", partition_bad), ("region_ordering", order_bad))
    ]


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    centers: np.ndarray
    curve: np.ndarray

    def rows(self) -> list[tuple[float, int, float]]:
        return [
            (float(c), int(k), float(g))
            for c, k, g in zip(self.centers, self.counts, self.curve)
        ]


def histogram_export(image: GrayImage, bin_width: float, variance: float = 1024.0) -> Histogram:
    """Histogram with bins centred on multiples of ``bin_width``, spanning at least +-4 sigma.

    ``curve`` is the N(0, variance) density at each centre scaled by n * bin_width.
    """
    if bin_width <= 0:
        raise ParameterError(f"bin_width must be positive, got {bin_width}")
    values = np.asarray(image.values, dtype=np.float64).ravel()
    sigma = math.sqrt(variance)
    lo = min(float(values.min()), -4 * sigma)
    hi = max(float(values.max()), 4 * sigma)
    k = np.arange(math.floor(lo / bin_width + 0.5), math.floor(hi / bin_width + 0.5) + 1)
    centers = k * bin_width
    edges = np.append(centers - bin_width / 2, centers[-1] + bin_width / 2)
    idx = np.clip(np.floor(values / bin_width + 0.5).astype(np.int64) - k[0], 0, k.size - 1)
    counts = np.bincount(idx, minlength=k.size)
    curve = values.size * bin_width * stats.norm.pdf(centers, loc=0.0, scale=sigma)
    return Histogram(edges=edges, counts=counts, centers=centers, curve=curve)


# ============================================================================
# Full suite
# ============================================================================


@dataclass(frozen=True)
class VerificationResult:
    reports: list[TestReport]
    pair_reports: list[TestReport]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    @property
    def failing(self) -> list[str]:
        return [r.test_name for r in self.reports if not r.passed]


def _skipped(name: str, reason: str, alpha: float, n: int) -> TestReport:
    logger.warning(f"Skipping {name}: {reason}")
    return TestReport(
        test_name=name,
        statistic=0.0,
        critical_value=0.0,
        alpha=alpha,
        passed=True,
        sample_size=n,
        details={"skipped": reason},
    )


def run_verification(
    manifest: DatasetManifest,
    store: ImageStore,
    cfg: VerifyConfig = VerifyConfig(),
    source: SourceProvider | None = None,
) -> VerificationResult:
    """Run every check; a failing check never stops the others."""
    variance = cfg.variance or manifest.parameters.variance
    cdf = normal_cdf(variance)
    reports: list[TestReport] = []

    if manifest.store_sha256 is not None:
        actual = store.sha256()
        reports.append(TestReport(
            test_name="store_hash",
            statistic=0.0 if actual == manifest.store_sha256 else 1.0,
            critical_value=1.0,
            alpha=0.0,
            passed=actual == manifest.store_sha256,
            sample_size=len(store),
            details={"expected": manifest.store_sha256, "actual": actual},
        ))

    reports.append(audit_permutation(store, manifest))
    pooled = store.images.ravel()
    reports.append(ks_one_sample(pooled, cdf, cfg.alpha, test_name="pooled_ks"))
    reports.append(per_image_ks(store, variance, cfg.alpha, cfg.min_image_pass_fraction)[1])
    try:
        reports.append(chi_square_gof(
            pooled, equiprobable_edges(cfg.chi_square_bins, variance), cdf, cfg.alpha,
            test_name="pooled_chi_square",
        ))
    except ParameterError as e:
        reports.append(_skipped("pooled_chi_square", str(e), cfg.alpha, pooled.size))

    pair_reports: list[TestReport] = []
    pairs = all_position_pairs() if cfg.all_pairs else random_position_pairs(
        cfg.stationarity_pairs, cfg.pair_seed
    )
    try:
        pair_reports = stationarity_test(store, pairs, cfg.alpha)
        pass_fraction = float(np.mean([r.passed for r in pair_reports]))
        reports.append(TestReport(
            test_name="stationarity",
            statistic=pass_fraction,
            critical_value=cfg.min_pair_pass_fraction,
            alpha=cfg.alpha,
            passed=pass_fraction >= cfg.min_pair_pass_fraction,
            sample_size=len(store),
            details={"pairs": len(pair_reports), "passing_pairs": sum(r.passed for r in pair_reports)},
        ))
    except SampleSizeError as e:
        reports.append(_skipped("stationarity", str(e), cfg.alpha, len(store)))

    if source is not None:
        reports.extend(region_checks(manifest, store, source))

    for report in reports:
        status = "skipped" if report.skipped else ("pass" if report.passed else "FAIL")
        logger.info(
            f"{report.test_name}: {status} "
            f"(statistic {report.statistic:.6g}, critical {report.critical_value:.6g})"
        )
    return VerificationResult(reports, pair_reports)
