"""Sort the draws, split them by region size and scatter them into the mask."""

from dataclasses import dataclass

import numpy as np

from .errors import StructuralError
from .model import PIXEL_DTYPE, PLACEMENT_ORDER, GaussianVector, GrayImage, Region, RegionPartition
from .randomness import RngStream, gaussian_vector, permutation


@dataclass(frozen=True)
class SortedSplit:
    """Contiguous slices of the descending draws, one per region.

    ``parts`` follows PLACEMENT_ORDER: outside, inside boundary, outside
    boundary, inside.
    """

    parts: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]

    def part(self, region: Region) -> np.ndarray:
        return self.parts[PLACEMENT_ORDER.index(region)]

    @property
    def sizes(self) -> tuple[int, ...]:
        """Sizes in Region order (outside, outside boundary, inside boundary, inside)."""
        return tuple(self.part(region).size for region in Region)


def split_sorted(gv: GaussianVector, partition: RegionPartition) -> SortedSplit:
    """Cut ``gv.sorted_desc`` into the four region slices.

    Raises:
        StructuralError: if the vector and the partition differ in size.
    """
    if len(gv) != partition.size:
        raise StructuralError(
            f"{len(gv)} draws cannot fill a partition of {partition.size} pixels"
        )
    bounds = np.cumsum([0] + [partition.size_of(r) for r in PLACEMENT_ORDER])
    parts = tuple(
        gv.sorted_desc[bounds[k] : bounds[k + 1]] for k in range(len(PLACEMENT_ORDER))
    )
    return SortedSplit(parts)  # type: ignore[arg-type]


def place(split: SortedSplit, partition: RegionPartition, stream: RngStream) -> GrayImage:
    """Write each region's values, in descending order, to shuffled positions.

    Positions are enumerated row-major and shuffled once per region, in
    PLACEMENT_ORDER, so the stream is consumed identically on every run.
    """
    if split.sizes != partition.region_sizes:
        raise StructuralError(
            f"split sizes {split.sizes} do not match partition {partition.region_sizes}"
        )
    flat = np.empty(partition.size, dtype=PIXEL_DTYPE)
    for region in PLACEMENT_ORDER:
        positions = partition.positions(region)
        shuffled = positions[permutation(stream, positions.size)]
        flat[shuffled] = split.part(region)
    return GrayImage(flat.reshape(partition.height, partition.width))


def synthesize_image(
    partition: RegionPartition, stream: RngStream, variance: float = 1024.0
) -> tuple[GrayImage, GaussianVector]:
    """Draw, split and place one synthetic image; the draws are returned for audit."""
    gv = gaussian_vector(stream, variance, size=partition.size)
    image = place(split_sorted(gv, partition), partition, stream)
    return image, gv
