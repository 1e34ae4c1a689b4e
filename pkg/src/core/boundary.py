"""Canny edge detection and the four-region mask decomposition.

The Canny pipeline is written out stage by stage (blur, Sobel, direction
bins, non-maximum suppression, hysteresis); scipy.ndimage only supplies the
convolution, labelling and dilation primitives.
"""

import math
from dataclasses import dataclass

import numpy as np
from pydantic import ValidationError
from scipy import ndimage

from .config import CannyParams, EdgeMode
from .errors import DegenerateMaskError, ParameterError, StructuralError
from .model import BinaryImage, Region, RegionPartition

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)
EIGHT_CONNECTED = ndimage.generate_binary_structure(2, 2)

# (row, col) step towards the neighbour along the gradient, per direction bin
_BIN_STEPS = ((0, 1), (1, 1), (1, 0), (1, -1))

# Relative magnitude difference treated as a tie during suppression.
_TIE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class EdgeMap:
    edge: np.ndarray

    def __post_init__(self) -> None:
        edge = np.array(self.edge, dtype=bool)
        if edge.ndim != 2:
            raise StructuralError(f"edge map must be 2-D, got {edge.shape}")
        edge.setflags(write=False)
        object.__setattr__(self, "edge", edge)

    @property
    def width(self) -> int:
        return int(self.edge.shape[1])

    @property
    def height(self) -> int:
        return int(self.edge.shape[0])

    @property
    def count(self) -> int:
        return int(self.edge.sum())


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian with radius ceil(3 sigma)."""
    radius = max(1, math.ceil(3 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x**2) / (2 * sigma**2))
    return kernel / kernel.sum()


def gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    kernel = gaussian_kernel(sigma)
    blurred = ndimage.convolve1d(image, kernel, axis=0, mode="reflect")
    return ndimage.convolve1d(blurred, kernel, axis=1, mode="reflect")


def sobel_gradients(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # correlate keeps the kernels' sign convention: gx > 0 where intensity rises to the right
    gx = ndimage.correlate(image, SOBEL_X, mode="reflect")
    gy = ndimage.correlate(image, SOBEL_Y, mode="reflect")
    return gx, gy


def direction_bins(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Quantize gradient direction to 0, 45, 90 or 135 degrees (bins 0..3)."""
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    return (np.floor((angle + 22.5) / 45.0).astype(np.int64)) % 4


def _shifted(array: np.ndarray, dr: int, dc: int, fill: float) -> np.ndarray:
    """``out[r, c] = array[r + dr, c + dc]``, ``fill`` outside the grid."""
    padded = np.pad(array, 1, mode="constant", constant_values=fill)
    h, w = array.shape
    return padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]


def non_maximum_suppression(
    magnitude: np.ndarray, bins: np.ndarray, intensity: np.ndarray
) -> np.ndarray:
    """Keep pixels that are maximal across the edge.

    Equal magnitudes on either side of a step resolve towards the brighter
    pixel, so a symmetric ridge keeps exactly one pixel.
    """
    tol = _TIE_TOLERANCE * float(magnitude.max())
    keep = magnitude > tol
    for b, (dr, dc) in enumerate(_BIN_STEPS):
        sel = bins == b
        for sign in (1, -1):
            other_mag = _shifted(magnitude, sign * dr, sign * dc, 0.0)
            other_val = _shifted(intensity, sign * dr, sign * dc, -np.inf)
            higher = magnitude > other_mag + tol
            tie = np.abs(magnitude - other_mag) <= tol
            wins_tie = intensity > other_val
            keep &= ~sel | higher | (tie & wins_tie)
    return np.where(keep, magnitude, 0.0)


def hysteresis(suppressed: np.ndarray, low: float, high: float) -> np.ndarray:
    """Keep weak pixels 8-connected to at least one strong pixel."""
    weak = suppressed >= low
    strong = suppressed >= high
    components, count = ndimage.label(weak, structure=EIGHT_CONNECTED)
    if count == 0:
        return np.zeros_like(weak)
    anchored = np.zeros(count + 1, dtype=bool)
    anchored[np.unique(components[strong])] = True
    anchored[0] = False
    return anchored[components]


def canny(src: BinaryImage, params: CannyParams = CannyParams()) -> EdgeMap:
    """Classical Canny on a binary image read as 0/255 grayscale.

    Raises:
        ParameterError: if ``params`` violate 0 < low <= high <= 1 or sigma <= 0.
    """
    try:
        params = CannyParams.model_validate(params.model_dump())
    except ValidationError as e:
        raise ParameterError(f"invalid Canny parameters: {e}") from e

    image = src.bits.astype(np.float64) * 255.0
    blurred = gaussian_blur(image, params.blur_sigma)
    gx, gy = sobel_gradients(blurred)
    magnitude = np.hypot(gx, gy)
    peak = float(magnitude.max())
    if peak == 0.0:
        return EdgeMap(np.zeros(image.shape, dtype=bool))

    suppressed = non_maximum_suppression(magnitude, direction_bins(gx, gy), blurred)
    edges = hysteresis(
        suppressed, params.low_threshold * peak, params.high_threshold * peak
    )
    return EdgeMap(edges)


def _check_decomposable(binary: BinaryImage) -> None:
    count = binary.foreground_count
    if count == 0:
        raise DegenerateMaskError("binary image is all background")
    if count == binary.bits.size:
        raise DegenerateMaskError("binary image is all foreground")


def decompose_regions(
    binary: BinaryImage,
    edges: EdgeMap | None = None,
    mode: EdgeMode = EdgeMode.CANNY_GUIDED,
) -> RegionPartition:
    """Split the grid into outside / outside-boundary / inside-boundary / inside.

    Canny-guided: inside-boundary is edge-and-foreground, outside-boundary is
    background 4-adjacent to it. Morphological: the rims are the foreground
    and background pixels 8-adjacent to the other class.

    Raises:
        DegenerateMaskError: if the image is all foreground or all background.
    """
    _check_decomposable(binary)
    fg = binary.bits
    bg = ~fg

    if mode is EdgeMode.CANNY_GUIDED:
        if edges is None:
            raise StructuralError("canny-guided decomposition needs an edge map")
        if edges.edge.shape != fg.shape:
            raise StructuralError(
                f"edge map {edges.edge.shape} does not match binary image {fg.shape}"
            )
        inside_boundary = edges.edge & fg
        outside_boundary = bg & ndimage.binary_dilation(
            inside_boundary, structure=FOUR_CONNECTED
        )
    else:
        inside_boundary = fg & ndimage.binary_dilation(bg, structure=EIGHT_CONNECTED)
        outside_boundary = bg & ndimage.binary_dilation(fg, structure=EIGHT_CONNECTED)

    labels = np.full(fg.shape, Region.OUTSIDE, dtype=np.uint8)
    labels[outside_boundary] = Region.OUTSIDE_BOUNDARY
    labels[fg] = Region.INSIDE
    labels[inside_boundary] = Region.INSIDE_BOUNDARY
    return RegionPartition(labels)
