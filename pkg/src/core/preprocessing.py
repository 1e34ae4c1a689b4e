"""Binarize a source digit, take its central 64x64 window, reduce to 32x32."""

import logging
from dataclasses import dataclass

import numpy as np

from .config import BinarizeRule, CropMode, Polarity
from .errors import DegenerateMaskError, DimensionError, StructuralError
from .model import CROP_SIDE, IMAGE_SIDE, BinaryImage, GrayImage

logger = logging.getLogger(__name__)

OTSU_FALLBACK_THRESHOLD = 128


@dataclass(frozen=True)
class Binarization:
    """A binarized image plus how its threshold was chosen."""

    image: BinaryImage
    threshold: int
    otsu_fallback: bool = False


def otsu_threshold(hist: np.ndarray) -> int | None:
    """Threshold t maximizing between-class variance of {<= t} vs {> t}.

    Returns None when the histogram has a single populated level. When a
    range of thresholds ties for the maximum, the middle of that range wins.
    """
    hist = hist.astype(np.float64)
    total = hist.sum()
    levels = np.arange(hist.size, dtype=np.float64)
    w0 = np.cumsum(hist)
    w1 = total - w0
    s0 = np.cumsum(hist * levels)
    s1 = s0[-1] - s0
    valid = (w0 > 0) & (w1 > 0)
    if not valid.any():
        return None
    between = np.zeros_like(hist)
    m0 = s0[valid] / w0[valid]
    m1 = s1[valid] / w1[valid]
    between[valid] = w0[valid] * w1[valid] * (m0 - m1) ** 2
    best = np.flatnonzero(valid & (between == between[valid].max()))
    return int((best[0] + best[-1]) // 2)


def binarize(src: GrayImage, rule: BinarizeRule, polarity: Polarity) -> Binarization:
    """Mark ink pixels as foreground.

    Bright ink is ``v > t``; dark ink is ``v <= t``. Under Otsu a constant
    image has no threshold, so the fixed fallback is used and flagged.
    """
    values = np.clip(np.rint(src.values), 0, 255).astype(np.uint8)
    fallback = False
    if rule.mode == "fixed":
        threshold = int(rule.threshold)  # type: ignore[arg-type]
    else:
        found = otsu_threshold(np.bincount(values.ravel(), minlength=256))
        if found is None:
            logger.warning(
                f"Otsu undefined on a constant image; using threshold {OTSU_FALLBACK_THRESHOLD}"
            )
            threshold, fallback = OTSU_FALLBACK_THRESHOLD, True
        else:
            threshold = found
    if polarity is Polarity.INK_IS_BRIGHT:
        bits = values > threshold
    else:
        bits = values <= threshold
    return Binarization(BinaryImage(bits), threshold, fallback)


def crop_origin(src: BinaryImage, mode: CropMode, side: int = CROP_SIDE) -> tuple[int, int]:
    """Top-left corner of the crop window in source coordinates."""
    max_row, max_col = src.height - side, src.width - side
    if mode is CropMode.FOREGROUND_CENTROID and src.foreground_count > 0:
        rows, cols = np.nonzero(src.bits)
        row = int(np.floor(rows.mean() + 0.5)) - side // 2
        col = int(np.floor(cols.mean() + 0.5)) - side // 2
        return min(max(row, 0), max_row), min(max(col, 0), max_col)
    return max_row // 2, max_col // 2


def central_crop(
    src: BinaryImage,
    mode: CropMode = CropMode.GEOMETRIC_CENTER,
    out_w: int = CROP_SIDE,
    out_h: int = CROP_SIDE,
) -> BinaryImage:
    """Extract the central ``out_h`` x ``out_w`` window.

    Raises:
        DimensionError: if the source is smaller than the window.
    """
    if out_w != out_h:
        raise StructuralError("only square crop windows are supported")
    if src.width < out_w or src.height < out_h:
        raise DimensionError(
            f"source {src.width}x{src.height} is smaller than the {out_w}x{out_h} crop"
        )
    row, col = crop_origin(src, mode, out_w)
    return BinaryImage(src.bits[row : row + out_h, col : col + out_w])


def downsample_2x(src: BinaryImage) -> BinaryImage:
    """Majority-of-four reduction; two of four foreground pixels is enough."""
    if (src.height, src.width) != (CROP_SIDE, CROP_SIDE):
        raise DimensionError(
            f"downsampling expects {CROP_SIDE}x{CROP_SIDE}, got {src.width}x{src.height}"
        )
    blocks = src.bits.reshape(IMAGE_SIDE, 2, IMAGE_SIDE, 2).sum(axis=(1, 3))
    return BinaryImage(blocks >= 2)


def require_ink(image: BinaryImage, what: str = "cropped image") -> None:
    """Reject images whose digit has vanished."""
    if image.foreground_count == 0:
        raise DegenerateMaskError(f"{what} has no foreground pixels")
