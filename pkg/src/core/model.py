"""Domain types shared by every stage of the synthesis pipeline.

All types are frozen and hold read-only numpy arrays, so they can be handed
to worker processes and shared between threads without copying discipline.
Arrays are addressed (row, col) with the origin top-left, row-major.
"""

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Any, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .config import BuildConfig
from .errors import StructuralError

IMAGE_SIDE = 32
IMAGE_PIXELS = IMAGE_SIDE * IMAGE_SIDE
CROP_SIDE = 64

# float32 is the IDX carrier; draws are cast once, right after sampling.
PIXEL_DTYPE = np.float32


class Region(IntEnum):
    """Labels of the four-region mask, in partition order."""

    OUTSIDE = 0
    OUTSIDE_BOUNDARY = 1
    INSIDE_BOUNDARY = 2
    INSIDE = 3


# Order in which the descending-sorted draws are handed out, brightest first.
PLACEMENT_ORDER: tuple[Region, ...] = (
    Region.OUTSIDE,
    Region.INSIDE_BOUNDARY,
    Region.OUTSIDE_BOUNDARY,
    Region.INSIDE,
)


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class GrayImage:
    """Real-valued intensity grid."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        values = np.array(values, dtype=values.dtype if values.dtype.kind == "f" else np.float64)
        if values.ndim != 2 or values.size == 0:
            raise StructuralError(
                f"GrayImage needs a non-empty 2-D grid, got shape {values.shape}"
            )
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def from_sequence(cls, values: Sequence[float], width: int, height: int) -> "GrayImage":
        flat = np.asarray(values, dtype=np.float64)
        if width <= 0 or height <= 0 or flat.size != width * height:
            raise StructuralError(
                f"{flat.size} values cannot fill a {width}x{height} image"
            )
        return cls(flat.reshape(height, width))

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def height(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class BinaryImage:
    """Foreground (True) / background (False) grid."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.array(self.bits, dtype=bool)
        if bits.ndim != 2 or bits.size == 0:
            raise StructuralError(
                f"BinaryImage needs a non-empty 2-D grid, got shape {bits.shape}"
            )
        object.__setattr__(self, "bits", _frozen(bits))

    @classmethod
    def from_sequence(cls, bits: Sequence[int], width: int, height: int) -> "BinaryImage":
        flat = np.asarray(bits)
        if flat.size != width * height:
            raise StructuralError(f"{flat.size} bits cannot fill a {width}x{height} image")
        return cls(flat.reshape(height, width) != 0)

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def foreground_count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class RegionPartition:
    """Single-label map of the four regions; disjointness holds by construction."""

    labels: np.ndarray
    region_sizes: tuple[int, int, int, int] = field(init=False)

    def __post_init__(self) -> None:
        labels = np.array(self.labels, dtype=np.uint8)
        if labels.ndim != 2 or labels.size == 0:
            raise StructuralError(f"partition labels must be a 2-D grid, got {labels.shape}")
        if labels.max() > Region.INSIDE:
            raise StructuralError(f"unknown region label {int(labels.max())}")
        counts = np.bincount(labels.ravel(), minlength=len(Region))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "region_sizes", tuple(int(c) for c in counts))

    @property
    def width(self) -> int:
        return int(self.labels.shape[1])

    @property
    def height(self) -> int:
        return int(self.labels.shape[0])

    @property
    def size(self) -> int:
        return int(self.labels.size)

    def size_of(self, region: Region) -> int:
        return self.region_sizes[region]

    def mask(self, region: Region) -> np.ndarray:
        return self.labels == region

    def positions(self, region: Region) -> np.ndarray:
        """Flat row-major indices of a region's pixels, ascending."""
        return np.flatnonzero(self.labels.ravel() == region)


def partition_from_labels(
    labels: Sequence[int] | np.ndarray, width: int, height: int
) -> RegionPartition:
    """Build a partition from a row-major label sequence.

    Raises:
        StructuralError: if the sequence does not fill width x height exactly.
    """
    flat = np.asarray(labels).ravel()
    if width <= 0 or height <= 0 or flat.size != width * height:
        raise StructuralError(
            f"label sequence of length {flat.size} does not match {width}x{height}"
        )
    return RegionPartition(flat.reshape(height, width))


@dataclass(frozen=True)
class GaussianVector:
    """One image's worth of draws, raw and sorted descending."""

    raw: np.ndarray
    sorted_desc: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        raw = np.array(self.raw, dtype=PIXEL_DTYPE).ravel()
        if raw.size == 0:
            raise StructuralError("GaussianVector cannot be empty")
        object.__setattr__(self, "raw", _frozen(raw))
        object.__setattr__(self, "sorted_desc", _frozen(np.sort(raw)[::-1].copy()))

    def __len__(self) -> int:
        return int(self.raw.size)


@dataclass(frozen=True)
class DatasetRecord:
    image: GrayImage
    label: int
    split: Split
    source_id: str
    rng_stream_id: int

    def __post_init__(self) -> None:
        if not 0 <= self.label <= 9:
            raise StructuralError(f"label {self.label} outside 0..9")
        if (self.image.height, self.image.width) != (IMAGE_SIDE, IMAGE_SIDE):
            raise StructuralError(
                f"dataset images must be {IMAGE_SIDE}x{IMAGE_SIDE}, "
                f"got {self.image.height}x{self.image.width}"
            )


# ============================================================================
# Manifest documents
# ============================================================================

MANIFEST_FORMAT_VERSION = 1
RECORD_COLUMNS = ("index", "source_id", "label", "split", "rng_stream_id")


class RecordMeta(BaseModel):
    """One dataset record without its pixels."""

    model_config = ConfigDict(frozen=True)

    index: int = Field(ge=0)
    source_id: str
    label: int = Field(ge=0, le=9)
    split: Split
    rng_stream_id: int = Field(ge=0)


class Rejection(BaseModel):
    model_config = ConfigDict(frozen=True)

    source_id: str
    label: int
    reason: str


class DatasetManifest(BaseModel):
    """Seed, parameters and provenance; enough to regenerate every image."""

    format_version: int = MANIFEST_FORMAT_VERSION
    generator: str
    created_at: str
    global_seed: int
    parameters: BuildConfig
    counts: dict[int, dict[str, int]]
    records: list[RecordMeta]
    rejected: list[Rejection] = Field(default_factory=list)
    store_sha256: str | None = None

    def to_document(self) -> dict[str, Any]:
        """Key-value header plus a compact record table."""
        return {
            "format_version": self.format_version,
            "generator": self.generator,
            "created_at": self.created_at,
            "global_seed": self.global_seed,
            "store_sha256": self.store_sha256,
            "parameters": self.parameters.model_dump(mode="json"),
            "counts": {int(k): dict(v) for k, v in self.counts.items()},
            "record_columns": list(RECORD_COLUMNS),
            "records": [
                [r.index, r.source_id, r.label, r.split.value, r.rng_stream_id]
                for r in self.records
            ],
            "rejected": [r.model_dump() for r in self.rejected],
        }

    @classmethod
    def from_document(cls, doc: dict[str, Any]) -> "DatasetManifest":
        """Parse a document written by ``to_document``.

        Raises:
            StructuralError: on unknown versions or malformed records.
        """
        if not isinstance(doc, dict):
            raise StructuralError("manifest document must be a mapping")
        version = doc.get("format_version")
        if version != MANIFEST_FORMAT_VERSION:
            raise StructuralError(f"unsupported manifest format_version {version}")
        columns = tuple(doc.get("record_columns", ()))
        if columns != RECORD_COLUMNS:
            raise StructuralError(f"unexpected record columns {columns}")
        try:
            records = [RecordMeta(**dict(zip(columns, row))) for row in doc.get("records", [])]
            return cls(
                format_version=version,
                generator=doc["generator"],
                created_at=doc["created_at"],
                global_seed=doc["global_seed"],
                parameters=BuildConfig.model_validate(doc["parameters"]),
                counts=doc.get("counts", {}),
                records=records,
                rejected=[Rejection(**r) for r in doc.get("rejected", [])],
                store_sha256=doc.get("store_sha256"),
            )
        except (KeyError, TypeError, ValidationError) as e:
            raise StructuralError(f"malformed manifest: {e}") from e
