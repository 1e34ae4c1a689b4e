"""Source ingestion (NIST by-class layout) and IDX / PNG writers.

IDX layout: two zero bytes, a type code, the rank, one big-endian uint32 per
dimension, then the row-major payload (big-endian for multi-byte types).
"""

import csv
import logging
import re
import struct
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import IngestionError, SerializationError
from .model import IMAGE_SIDE, GrayImage

logger = logging.getLogger(__name__)

IDX_UBYTE = 0x08
IDX_FLOAT = 0x0D

_IDX_DTYPES = {
    0x08: np.dtype("u1"),
    0x09: np.dtype("i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}

QUANTIZER_SIGMAS = 4.0
IMAGE_SUFFIXES = {".png", ".bmp", ".pgm", ".jpg", ".jpeg", ".tif", ".tiff"}
_HEX_CLASS = re.compile(r"^[0-9a-fA-F]{2}$")

TRAIN_IMAGES_FLOAT = "train-images-idx3-float"
TRAIN_IMAGES_UBYTE = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
TEST_IMAGES_FLOAT = "t10k-images-idx3-float"
TEST_IMAGES_UBYTE = "t10k-images-idx3-ubyte"
TEST_LABELS = "t10k-labels-idx1-ubyte"
MANIFEST_FILE = "manifest.yaml"


# ============================================================================
# Source images
# ============================================================================


def class_from_folder(name: str) -> int | None:
    """Digit label of a NIST by-class folder ('30'..'39'), else None."""
    if not _HEX_CLASS.match(name):
        return None
    char = chr(int(name, 16))
    return int(char) if char.isdigit() else None


def read_image(path: Path) -> GrayImage:
    """Read any Pillow-supported file as 8-bit grayscale."""
    try:
        with Image.open(path) as img:
            img.load()
            gray = np.asarray(img.convert("L"), dtype=np.float64)
    except FileNotFoundError as e:
        raise IngestionError(f"{path}: file not found") from e
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as e:
        raise IngestionError(f"{path}: unreadable image ({e})") from e
    return GrayImage(gray)


def read_source(path: Path, root: Path | None = None) -> tuple[GrayImage, int]:
    """Read a source digit and infer its label from its class folder.

    With ``root`` the first folder below it is the class folder; otherwise
    the nearest ancestor named like a NIST class code is used.

    Raises:
        IngestionError: unreadable file or no digit class folder.
    """
    path = Path(path)
    if root is not None:
        parts = path.relative_to(root).parts[:-1]
        candidates = parts[:1]
    else:
        candidates = tuple(reversed(path.parts[:-1]))
    for name in candidates:
        if _HEX_CLASS.match(name):
            label = class_from_folder(name)
            if label is None:
                raise IngestionError(f"{path}: class folder '{name}' is not a digit")
            return read_image(path), label
    raise IngestionError(f"{path}: no class folder found")


class SourceProvider(Protocol):
    """Anything that can list and load labelled source digits."""

    def ids_for_class(self, label: int) -> list[str]: ...

    def load(self, source_id: str) -> tuple[GrayImage, int]: ...


class DirectorySource:
    """Source digits from a NIST SD-19 by_class tree or a sidecar listing.

    Args:
        root: Extracted archive root containing hex-named class folders
        listing: Optional CSV of ``path,label`` rows, paths relative to root
    """

    def __init__(self, root: Path, listing: Path | None = None):
        self.root = Path(root)
        if not self.root.is_dir():
            raise IngestionError(f"source directory {self.root} does not exist")
        self._ids: dict[int, list[str]] = {label: [] for label in range(10)}
        self._labels: dict[str, int] = {}
        if listing is not None:
            self._scan_listing(Path(listing))
        else:
            self._scan_tree()
        for ids in self._ids.values():
            ids.sort()
        logger.info(
            f"Indexed {len(self._labels)} source images under {self.root}"
        )

    def _add(self, source_id: str, label: int) -> None:
        self._ids[label].append(source_id)
        self._labels[source_id] = label

    def _scan_tree(self) -> None:
        for folder in sorted(p for p in self.root.iterdir() if p.is_dir()):
            label = class_from_folder(folder.name)
            if label is None:
                logger.warning(f"Skipping non-digit class folder {folder}")
                continue
            for path in folder.rglob("*"):
                if path.is_file() and path.suffix.lower() in IMAGE_SUFFIXES:
                    self._add(path.relative_to(self.root).as_posix(), label)

    def _scan_listing(self, listing: Path) -> None:
        try:
            with open(listing, newline="") as f:
                for row in csv.reader(f):
                    if not row or row[0].startswith("#") or row[0] == "path":
                        continue
                    label = int(row[1])
                    if not 0 <= label <= 9:
                        logger.warning(f"Skipping {row[0]}: label {label} is not a digit")
                        continue
                    self._add(Path(row[0]).as_posix(), label)
        except (OSError, IndexError, ValueError) as e:
            raise IngestionError(f"{listing}: invalid source listing ({e})") from e

    def ids_for_class(self, label: int) -> list[str]:
        return list(self._ids.get(label, []))

    def load(self, source_id: str) -> tuple[GrayImage, int]:
        label = self._labels.get(source_id)
        if label is None:
            raise IngestionError(f"unknown source id '{source_id}'")
        return read_image(self.root / source_id), label


class MemorySource:
    """In-memory provider, mainly for tests and notebooks."""

    def __init__(self, images: dict[str, tuple[GrayImage, int]]):
        self._images = dict(images)

    def ids_for_class(self, label: int) -> list[str]:
        return sorted(k for k, (_, lab) in self._images.items() if lab == label)

    def load(self, source_id: str) -> tuple[GrayImage, int]:
        try:
            return self._images[source_id]
        except KeyError as e:
            raise IngestionError(f"unknown source id '{source_id}'") from e


# ============================================================================
# IDX files
# ============================================================================


def _stack(images: Sequence[GrayImage] | np.ndarray) -> np.ndarray:
    if isinstance(images, np.ndarray):
        stack = images
    elif len(images) == 0:
        stack = np.zeros((0, IMAGE_SIDE, IMAGE_SIDE))
    else:
        stack = np.stack([img.values for img in images])
    if stack.ndim != 3 or stack.shape[1:] != (IMAGE_SIDE, IMAGE_SIDE):
        raise SerializationError(
            f"IDX image files hold {IMAGE_SIDE}x{IMAGE_SIDE} images, got shape {stack.shape}"
        )
    return stack


def write_idx(path: Path, data: np.ndarray, type_code: int) -> None:
    dtype = _IDX_DTYPES[type_code]
    header = struct.pack(">BBBB", 0, 0, type_code, data.ndim)
    header += struct.pack(">" + "I" * data.ndim, *data.shape)
    try:
        Path(path).write_bytes(header + data.astype(dtype).tobytes())
    except OSError as e:
        raise SerializationError(f"Error saving {path}: {e}") from e


def read_idx(path: Path) -> np.ndarray:
    """Read any IDX file into a native-endian array."""
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise SerializationError(f"Error loading {path}: {e}") from e
    if len(raw) < 4 or raw[0] != 0 or raw[1] != 0 or raw[2] not in _IDX_DTYPES:
        raise SerializationError(f"{path}: not an IDX file")
    ndim = raw[3]
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise SerializationError(f"{path}: truncated IDX header")
    shape = struct.unpack(">" + "I" * ndim, raw[4:header_len])
    dtype = _IDX_DTYPES[raw[2]]
    expected = int(np.prod(shape)) * dtype.itemsize
    if len(raw) - header_len != expected:
        raise SerializationError(
            f"{path}: payload has {len(raw) - header_len} bytes, header implies {expected}"
        )
    data = np.frombuffer(raw, dtype=dtype, offset=header_len).reshape(shape)
    return data.astype(dtype.newbyteorder("="))


def write_idx_float(images: Sequence[GrayImage] | np.ndarray, path: Path) -> None:
    """Canonical lossless export: big-endian float32, magic 00 00 0D 03."""
    write_idx(path, _stack(images).astype(np.float32), IDX_FLOAT)


def quantize(values: np.ndarray, sigma: float = 32.0) -> tuple[np.ndarray, int]:
    """Map v to round(128 + 127 v / (4 sigma)) clamped to [0, 255].

    Returns the bytes and how many values were clipped.
    """
    scaled = np.floor(128.0 + 127.0 * np.asarray(values, dtype=np.float64) / (QUANTIZER_SIGMAS * sigma) + 0.5)
    clipped = int(np.count_nonzero((scaled < 0) | (scaled > 255)))
    return np.clip(scaled, 0, 255).astype(np.uint8), clipped


def write_idx_u8(
    images: Sequence[GrayImage] | np.ndarray, path: Path, sigma: float = 32.0
) -> int:
    """Lossy MNIST-style export (magic 00 00 08 03); returns the clip count."""
    data, clipped = quantize(_stack(images), sigma)
    if clipped:
        logger.info(f"Quantizer clipped {clipped} values writing {path}")
    write_idx(path, data, IDX_UBYTE)
    return clipped


def write_idx_labels(labels: Iterable[int], path: Path) -> None:
    """Label companion file, magic 00 00 08 01."""
    write_idx(path, np.asarray(list(labels), dtype=np.uint8).reshape(-1), IDX_UBYTE)


# ============================================================================
# PNG previews
# ============================================================================


def _save_png(data: np.ndarray, path: Path) -> None:
    try:
        Image.fromarray(np.ascontiguousarray(data, dtype=np.uint8)).save(path, format="PNG")
    except OSError as e:
        raise SerializationError(f"Error saving {path}: {e}") from e


def write_png_preview(image: GrayImage, path: Path, sigma: float = 32.0) -> None:
    """8-bit grayscale PNG with the same quantizer as the u8 IDX export."""
    data, clipped = quantize(image.values, sigma)
    if clipped:
        logger.debug(f"Quantizer clipped {clipped} values writing {path}")
    _save_png(data, path)


def write_png_mask(bits: np.ndarray, path: Path) -> None:
    """Binary panel: white marks members."""
    _save_png(np.where(np.asarray(bits, dtype=bool), 255, 0), path)


def write_png_masked_preview(
    image: GrayImage, member: np.ndarray, path: Path, sigma: float = 32.0
) -> None:
    """Preview of ``image`` restricted to ``member``; other pixels are black."""
    data, _ = quantize(image.values, sigma)
    _save_png(np.where(member, data, 0), path)


def write_png_gray(image: GrayImage, path: Path) -> None:
    """Source-range image (0..255) written as-is, rounded and clamped."""
    _save_png(np.clip(np.floor(image.values + 0.5), 0, 255), path)
