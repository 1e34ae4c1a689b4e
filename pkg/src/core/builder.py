"""Dataset assembly: source selection, per-image synthesis, manifests.

Sources are scanned per class in lexicographic id order; the first
``train_per_class`` usable ones go to train and the next ``test_per_class``
to test. Records are numbered train-first (classes ascending) and record
``i`` draws from stream ``i``, so the output does not depend on how many
workers produced it.
"""

import logging
from concurrent.futures import Executor, ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterator, Sequence, TypeVar

import numpy as np

from .boundary import EdgeMap, canny, decompose_regions
from .config import BuildConfig, PreprocessConfig
from .errors import (
    AuditError,
    BuildError,
    DegenerateMaskError,
    DimensionError,
    IngestionError,
    RegenerationError,
    SerializationError,
)
from .io_formats import (
    MANIFEST_FILE,
    TEST_IMAGES_FLOAT,
    TEST_IMAGES_UBYTE,
    TEST_LABELS,
    TRAIN_IMAGES_FLOAT,
    TRAIN_IMAGES_UBYTE,
    TRAIN_LABELS,
    SourceProvider,
    read_idx,
    write_idx_float,
    write_idx_labels,
    write_idx_u8,
)
from .model import (
    IMAGE_SIDE,
    PIXEL_DTYPE,
    BinaryImage,
    DatasetManifest,
    DatasetRecord,
    GrayImage,
    RecordMeta,
    Rejection,
    RegionPartition,
    Split,
)
from .preprocessing import Binarization, binarize, central_crop, downsample_2x, require_ink
from .randomness import ALGORITHM_TAG, derive_stream
from .synthesis import synthesize_image
from .utils import get_timestamp, read_yaml_document, sha256_bytes, write_yaml_document

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


# ============================================================================
# Mask preparation
# ============================================================================


@dataclass(frozen=True)
class MaskStages:
    """Every intermediate of turning one source digit into a region mask."""

    binarization: Binarization
    crop: BinaryImage
    reduced: BinaryImage
    edges: EdgeMap
    partition: RegionPartition


def prepare_mask(src: GrayImage, cfg: PreprocessConfig) -> MaskStages:
    """Binarize, crop, downsample, detect edges and decompose one source.

    Raises:
        DegenerateMaskError: the crop or the reduced image has no usable mask.
        DimensionError: the source is smaller than the crop window.
    """
    binar = binarize(src, cfg.binarize, cfg.polarity)
    crop = central_crop(binar.image, cfg.crop)
    require_ink(crop)
    reduced = downsample_2x(crop)
    edges = canny(reduced, cfg.canny)
    partition = decompose_regions(reduced, edges, cfg.edge_mode)
    return MaskStages(binar, crop, reduced, edges, partition)


@dataclass(frozen=True)
class MaskOutcome:
    source_id: str
    label: int
    labels: np.ndarray | None
    reason: str = ""


# Per-process state installed by the pool initializer.
_worker_source: SourceProvider | None = None
_worker_preprocess: PreprocessConfig | None = None


def _init_worker(source: SourceProvider, preprocess: PreprocessConfig) -> None:
    global _worker_source, _worker_preprocess
    _worker_source = source
    _worker_preprocess = preprocess


def _mask_job(source_id: str) -> MaskOutcome:
    assert _worker_source is not None and _worker_preprocess is not None
    try:
        image, label = _worker_source.load(source_id)
    except IngestionError as e:
        return MaskOutcome(source_id, -1, None, str(e))
    try:
        stages = prepare_mask(image, _worker_preprocess)
    except (DegenerateMaskError, DimensionError) as e:
        return MaskOutcome(source_id, label, None, str(e))
    return MaskOutcome(source_id, label, np.array(stages.partition.labels))


def _synthesize_job(job: tuple[int, np.ndarray, int, float]) -> np.ndarray:
    index, labels, seed, variance = job
    image, _ = synthesize_image(RegionPartition(labels), derive_stream(seed, index), variance)
    return np.array(image.values, dtype=PIXEL_DTYPE)


@contextmanager
def _worker_pool(
    jobs: int, source: SourceProvider, preprocess: PreprocessConfig
) -> Iterator[Executor | None]:
    _init_worker(source, preprocess)
    if jobs <= 1:
        yield None
        return
    with ProcessPoolExecutor(
        max_workers=jobs, initializer=_init_worker, initargs=(source, preprocess)
    ) as pool:
        yield pool


def _map(pool: Executor | None, fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Ordered map, in-process when there is no pool."""
    if pool is None:
        return [fn(item) for item in items]
    chunk = max(1, len(items) // 64)
    return list(pool.map(fn, items, chunksize=chunk))


# ============================================================================
# Image store
# ============================================================================


@dataclass(frozen=True)
class ImageStore:
    """Float pixels of a dataset, indexed by record index (train first)."""

    images: np.ndarray
    labels: np.ndarray
    n_train: int

    def __post_init__(self) -> None:
        images = np.array(self.images, dtype=PIXEL_DTYPE)
        if images.ndim != 3 or images.shape[1:] != (IMAGE_SIDE, IMAGE_SIDE):
            raise SerializationError(f"image store needs (n, 32, 32), got {images.shape}")
        labels = np.array(self.labels, dtype=np.uint8).reshape(-1)
        if labels.size != images.shape[0]:
            raise SerializationError(
                f"{labels.size} labels for {images.shape[0]} images"
            )
        images.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.images.shape[0])

    def image(self, index: int) -> GrayImage:
        return GrayImage(self.images[index])

    def split_of(self, index: int) -> Split:
        return Split.TRAIN if index < self.n_train else Split.TEST

    @property
    def train_images(self) -> np.ndarray:
        return self.images[: self.n_train]

    @property
    def test_images(self) -> np.ndarray:
        return self.images[self.n_train :]

    def records(self, manifest: DatasetManifest) -> Iterator[tuple[int, DatasetRecord]]:
        """Join the manifest with the stored pixels, in index order."""
        for meta in sorted(manifest.records, key=lambda r: r.index):
            yield meta.index, DatasetRecord(
                image=self.image(meta.index),
                label=meta.label,
                split=meta.split,
                source_id=meta.source_id,
                rng_stream_id=meta.rng_stream_id,
            )

    def sha256(self) -> str:
        return sha256_bytes(
            str(self.n_train).encode(),
            self.images.astype(">f4").tobytes(),
            self.labels.tobytes(),
        )


@dataclass(frozen=True)
class BuildResult:
    manifest: DatasetManifest
    store: ImageStore


# ============================================================================
# Build and regenerate
# ============================================================================


def _select_sources(
    config: BuildConfig, source: SourceProvider, pool: Executor | None
) -> tuple[dict[int, list[MaskOutcome]], list[Rejection]]:
    """Scan each class in id order until enough usable masks are found."""
    selected: dict[int, list[MaskOutcome]] = {}
    rejected: list[Rejection] = []
    needed = config.per_class

    for label in config.classes:
        ids = source.ids_for_class(label)
        usable: list[MaskOutcome] = []
        cursor = 0
        while len(usable) < needed and cursor < len(ids):
            batch = ids[cursor : cursor + needed - len(usable)]
            cursor += len(batch)
            for outcome in _map(pool, _mask_job, batch):
                if outcome.labels is None:
                    logger.warning(f"Rejected source {outcome.source_id}: {outcome.reason}")
                    rejected.append(Rejection(
                        source_id=outcome.source_id, label=label, reason=outcome.reason
                    ))
                else:
                    usable.append(outcome)
        if len(usable) < needed:
            raise BuildError(
                f"class {label}: only {len(usable)} usable sources of {needed} needed "
                f"({len(ids)} listed, {len(ids) - len(usable)} rejected or unavailable)"
            )
        selected[label] = usable
        logger.info(f"Class {label}: selected {needed} sources after scanning {cursor}")
    return selected, rejected


def _plan_records(
    config: BuildConfig, selected: dict[int, list[MaskOutcome]]
) -> list[tuple[RecordMeta, np.ndarray]]:
    plan: list[tuple[RecordMeta, np.ndarray]] = []
    for split, start, count in (
        (Split.TRAIN, 0, config.train_per_class),
        (Split.TEST, config.train_per_class, config.test_per_class),
    ):
        for label in config.classes:
            for outcome in selected[label][start : start + count]:
                index = len(plan)
                meta = RecordMeta(
                    index=index,
                    source_id=outcome.source_id,
                    label=label,
                    split=split,
                    rng_stream_id=index,
                )
                plan.append((meta, outcome.labels))  # type: ignore[arg-type]
    return plan


def _synthesize_all(
    plan: Sequence[tuple[RecordMeta, np.ndarray]],
    seed: int,
    variance: float,
    pool: Executor | None,
) -> np.ndarray:
    jobs = [(meta.rng_stream_id, labels, seed, variance) for meta, labels in plan]
    images = _map(pool, _synthesize_job, jobs)
    if not images:
        return np.zeros((0, IMAGE_SIDE, IMAGE_SIDE), dtype=PIXEL_DTYPE)
    return np.stack(images)


def build(config: BuildConfig, source: SourceProvider, jobs: int = 1) -> BuildResult:
    """Run the whole pipeline for every requested class.

    Raises:
        BuildError: if a class runs out of usable sources.
    """
    logger.info(
        f"Building {config.train_per_class}+{config.test_per_class} images per class "
        f"for classes {config.classes} (seed {config.global_seed}, {jobs} worker(s))"
    )
    with _worker_pool(jobs, source, config.preprocess) as pool:
        selected, rejected = _select_sources(config, source, pool)
        plan = _plan_records(config, selected)
        images = _synthesize_all(plan, config.global_seed, config.variance, pool)

    records = [meta for meta, _ in plan]
    store = ImageStore(
        images=images,
        labels=[meta.label for meta in records],
        n_train=config.train_per_class * len(config.classes),
    )
    counts = {
        label: {"train": config.train_per_class, "test": config.test_per_class}
        for label in config.classes
    }
    manifest = DatasetManifest(
        generator=ALGORITHM_TAG,
        created_at=get_timestamp(),
        global_seed=config.global_seed,
        parameters=config,
        counts=counts,
        records=records,
        rejected=rejected,
        store_sha256=store.sha256(),
    )
    logger.info(f"Built {len(store)} images; {len(rejected)} sources rejected")
    return BuildResult(manifest, store)


def regenerate(manifest: DatasetManifest, source: SourceProvider, jobs: int = 1) -> ImageStore:
    """Rebuild the image store recorded by ``manifest``.

    Raises:
        RegenerationError: if a recorded source is missing or no longer usable.
    """
    config = manifest.parameters
    records = sorted(manifest.records, key=lambda r: r.index)
    with _worker_pool(jobs, source, config.preprocess) as pool:
        outcomes = _map(pool, _mask_job, [r.source_id for r in records])
        plan: list[tuple[RecordMeta, np.ndarray]] = []
        for meta, outcome in zip(records, outcomes):
            if outcome.labels is None:
                raise RegenerationError(
                    f"record {meta.index}: source {meta.source_id} unavailable ({outcome.reason})"
                )
            plan.append((meta, outcome.labels))
        images = _synthesize_all(plan, manifest.global_seed, config.variance, pool)
    n_train = sum(1 for r in records if r.split is Split.TRAIN)
    return ImageStore(images=images, labels=[r.label for r in records], n_train=n_train)


# ============================================================================
# Dataset directories
# ============================================================================


def write_dataset(out_dir: Path, result: BuildResult) -> dict[str, Path]:
    """Write float IDX (canonical), u8 IDX (lossy), labels and the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    store, manifest = result.store, result.manifest
    sigma = float(np.sqrt(manifest.parameters.variance))
    train_labels = store.labels[: store.n_train]
    test_labels = store.labels[store.n_train :]

    paths = {
        "train_float": out_dir / TRAIN_IMAGES_FLOAT,
        "train_ubyte": out_dir / TRAIN_IMAGES_UBYTE,
        "train_labels": out_dir / TRAIN_LABELS,
        "test_float": out_dir / TEST_IMAGES_FLOAT,
        "test_ubyte": out_dir / TEST_IMAGES_UBYTE,
        "test_labels": out_dir / TEST_LABELS,
        "manifest": out_dir / MANIFEST_FILE,
    }
    write_idx_float(store.train_images, paths["train_float"])
    write_idx_float(store.test_images, paths["test_float"])
    clipped = write_idx_u8(store.train_images, paths["train_ubyte"], sigma)
    clipped += write_idx_u8(store.test_images, paths["test_ubyte"], sigma)
    write_idx_labels(train_labels, paths["train_labels"])
    write_idx_labels(test_labels, paths["test_labels"])
    write_yaml_document(paths["manifest"], manifest.to_document())
    logger.info(f"Wrote dataset to {out_dir} ({clipped} values clipped in u8 exports)")
    return paths


def load_manifest(dataset_dir: Path) -> DatasetManifest:
    return DatasetManifest.from_document(read_yaml_document(Path(dataset_dir) / MANIFEST_FILE))


def load_dataset(dataset_dir: Path) -> tuple[DatasetManifest, ImageStore]:
    """Read a generated dataset directory back into memory.

    Raises:
        AuditError: if the files disagree with the manifest's record table.
    """
    dataset_dir = Path(dataset_dir)
    manifest = load_manifest(dataset_dir)
    train = read_idx(dataset_dir / TRAIN_IMAGES_FLOAT)
    test = read_idx(dataset_dir / TEST_IMAGES_FLOAT)
    train_labels = read_idx(dataset_dir / TRAIN_LABELS)
    test_labels = read_idx(dataset_dir / TEST_LABELS)
    if train.ndim != 3 or test.ndim != 3:
        raise AuditError("image files must be rank-3 IDX")

    records = sorted(manifest.records, key=lambda r: r.index)
    n_train = sum(1 for r in records if r.split is Split.TRAIN)
    if train.shape[0] != n_train or test.shape[0] != len(records) - n_train:
        raise AuditError(
            f"manifest lists {n_train} train / {len(records) - n_train} test records, "
            f"files hold {train.shape[0]} / {test.shape[0]}"
        )
    labels = np.concatenate([train_labels, test_labels])
    bad = [r.index for r in records if int(labels[r.index]) != r.label]
    if bad:
        raise AuditError(f"{len(bad)} label(s) disagree with the manifest", bad)
    store = ImageStore(np.concatenate([train, test]), labels, n_train)
    return manifest, store


def dataset_summary(result: BuildResult) -> dict[str, Any]:
    train = sum(1 for r in result.manifest.records if r.split is Split.TRAIN)
    return {
        "images": len(result.store),
        "train": train,
        "test": len(result.store) - train,
        "rejected": len(result.manifest.rejected),
        "store_sha256": result.manifest.store_sha256,
    }
