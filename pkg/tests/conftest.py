"""Shared fixtures: synthetic handwritten-like source digits.

Sources are 128x128 gray images, ink 220 on paper 20, with the stroke
inside the central 64x64 window. Shapes vary per class and per variant so
that every source id yields a different mask.
"""

import sys
from pathlib import Path
from typing import Callable

import numpy as np
import pytest
from PIL import Image

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.core.io_formats import DirectorySource, MemorySource  # noqa: E402
from src.core.model import GrayImage  # noqa: E402

SOURCE_SIDE = 128
INK = 220.0
PAPER = 20.0


def digit_pixels(label: int, variant: int = 0, side: int = SOURCE_SIDE) -> np.ndarray:
    """Ring, bar or cross stroke, shifted and thickened by ``variant``."""
    rr, cc = np.mgrid[0:side, 0:side].astype(np.float64)
    cy = side / 2 + (variant % 3) - 1
    cx = side / 2 + (variant % 5) - 2
    half = 3.0 + (variant % 3) * 0.5
    if label % 3 == 0:
        radius = 16.0 + label % 4
        mask = np.abs(np.hypot(rr - cy, cc - cx) - radius) < half
    elif label % 3 == 1:
        mask = (np.abs(cc - cx - (label - 5)) < half) & (np.abs(rr - cy) < 22)
    else:
        arm = 14.0 + label % 5
        mask = ((np.abs(rr - cy) < half) & (np.abs(cc - cx) < arm)) | (
            (np.abs(cc - cx) < half) & (np.abs(rr - cy) < arm)
        )
    return np.where(mask, INK, PAPER)


@pytest.fixture
def make_digit() -> Callable[..., GrayImage]:
    def factory(label: int, variant: int = 0) -> GrayImage:
        return GrayImage(digit_pixels(label, variant))

    return factory


@pytest.fixture
def make_memory_source() -> Callable[..., MemorySource]:
    def factory(per_class: int, classes: range | list[int] = range(10)) -> MemorySource:
        return MemorySource({
            f"{label}/{variant:04d}": (GrayImage(digit_pixels(label, variant)), label)
            for label in classes
            for variant in range(per_class)
        })

    return factory


def write_source_tree(root: Path, per_class: int, classes: range | list[int] = range(10)) -> Path:
    """Write PNG sources in the NIST by_class layout (hex folder per class)."""
    for label in classes:
        folder = root / f"{ord(str(label)):02x}" / "hsf_0"
        folder.mkdir(parents=True, exist_ok=True)
        for variant in range(per_class):
            pixels = digit_pixels(label, variant).astype(np.uint8)
            Image.fromarray(pixels).save(folder / f"hsf_0_{variant:05d}.png")
    return root


@pytest.fixture
def source_tree(tmp_path: Path) -> Path:
    """Two sources per digit class on disk."""
    return write_source_tree(tmp_path / "by_class", per_class=2)


@pytest.fixture
def directory_source(source_tree: Path) -> DirectorySource:
    return DirectorySource(source_tree)


@pytest.fixture
def blank_source() -> GrayImage:
    return GrayImage(np.full((SOURCE_SIDE, SOURCE_SIDE), PAPER))


@pytest.fixture(autouse=True)
def isolate_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    for key in ("GAUSSDIGITS_SOURCE_DIR", "GAUSSDIGITS_JOBS", "GAUSSDIGITS_LOG_LEVEL"):
        monkeypatch.delenv(key, raising=False)
