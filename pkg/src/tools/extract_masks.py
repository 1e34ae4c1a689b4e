"""Extract Masks Tool - Show every stage of turning a digit into a region mask.

Writes the source, the binary image, the 64x64 crop, the 32x32 reduction,
the edge map, one white-on-black panel per region and the synthetic image
built on the mask, whole and restricted to each region.
"""

import sys
from pathlib import Path

# Handle imports for both server runtime and test contexts
_src_dir = Path(__file__).parent.parent
if str(_src_dir) not in sys.path:
    sys.path.insert(0, str(_src_dir))

try:
    from core.builder import load_manifest, prepare_mask
    from core.config import resolve_build_config
    from core.errors import GaussDigitsError, IngestionError, ParameterError
    from core.io_formats import (
        DirectorySource,
        read_image,
        write_png_gray,
        write_png_mask,
        write_png_masked_preview,
        write_png_preview,
    )
    from core.model import Region
    from core.randomness import derive_stream
    from core.server import mcp
    from core.synthesis import synthesize_image
    from core.utils import load_config, resolve_setting, tool_failure, tool_success
except ImportError:
    from src.core.builder import load_manifest, prepare_mask
    from src.core.config import resolve_build_config
    from src.core.errors import GaussDigitsError, IngestionError, ParameterError
    from src.core.io_formats import (
        DirectorySource,
        read_image,
        write_png_gray,
        write_png_mask,
        write_png_masked_preview,
        write_png_preview,
    )
    from src.core.model import Region
    from src.core.randomness import derive_stream
    from src.core.server import mcp
    from src.core.synthesis import synthesize_image
    from src.core.utils import load_config, resolve_setting, tool_failure, tool_success


def _region_slug(region: Region) -> str:
    return region.name.lower().replace("_", "-")


@mcp.tool()
def extract_masks(
    out_dir: str,
    source_path: str = "",
    dataset_dir: str = "",
    index: int | None = None,
    source_dir: str = "",
    source_listing: str = "",
    seed: int = 0,
    binarize: str | None = None,
    polarity: str | None = None,
    crop: str | None = None,
    edge_mode: str | None = None,
    canny_sigma: float | None = None,
    canny_low: float | None = None,
    canny_high: float | None = None,
    config_path: str = "",
) -> str:
    """Write the mask-decomposition panels for one source digit.

    Give either ``source_path`` (with optional preprocessing overrides and
    ``seed``), or ``dataset_dir`` plus ``index``, in which case the record's
    source is loaded from ``source_dir`` and the dataset's own parameters,
    seed and stream reproduce the stored image.

    Args:
        out_dir: Output directory for the PNG panels
        source_path: A single source image file
        dataset_dir: Directory written by generate_dataset
        index: Record index within dataset_dir
        source_dir: Source tree the dataset was built from
        source_listing: CSV of path,label rows under source_dir
        seed: Seed of the synthetic panel when using source_path
        binarize: "otsu" or "fixed:<t>"
        polarity: "bright" or "dark" ink
        crop: "center" or "centroid"
        edge_mode: "canny" or "morphology"
        canny_sigma: Gaussian blur sigma before gradients
        canny_low: Low hysteresis threshold, fraction of max gradient
        canny_high: High hysteresis threshold, fraction of max gradient
        config_path: Optional YAML config file

    Returns:
        JSON string with success, exit_code, message, region sizes and files.
    """
    try:
        file_config = load_config(config_path or None)
        if dataset_dir:
            if index is None:
                raise ParameterError("index is required with dataset_dir")
            manifest = load_manifest(Path(dataset_dir))
            records = sorted(manifest.records, key=lambda r: r.index)
            if not 0 <= index < len(records):
                raise ParameterError(f"index {index} out of range 0..{len(records) - 1}")
            record = records[index]
            root = resolve_setting(source_dir, file_config, "source_dir", "GAUSSDIGITS_SOURCE_DIR", "")
            if not root:
                raise IngestionError("no source directory given to reload the record's source")
            listing = Path(source_listing) if source_listing else None
            src, _ = DirectorySource(Path(root), listing).load(record.source_id)
            preprocess = manifest.parameters.preprocess
            variance = manifest.parameters.variance
            stream = derive_stream(manifest.global_seed, record.rng_stream_id)
        elif source_path:
            src = read_image(Path(source_path))
            config = resolve_build_config(
                file_config,
                global_seed=seed,
                binarize=binarize,
                polarity=polarity,
                crop=crop,
                edge_mode=edge_mode,
                canny_sigma=canny_sigma,
                canny_low=canny_low,
                canny_high=canny_high,
            )
            preprocess = config.preprocess
            variance = config.variance
            stream = derive_stream(config.global_seed, 0)
        else:
            raise ParameterError("either source_path or dataset_dir is required")

        stages = prepare_mask(src, preprocess)
        image, _ = synthesize_image(stages.partition, stream, variance)

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        sigma = variance**0.5
        files = {
            "source": out / "source.png",
            "binary": out / "binary.png",
            "crop": out / "crop.png",
            "reduced": out / "reduced.png",
            "edges": out / "edges.png",
            "synthetic": out / "synthetic.png",
        }
        write_png_gray(src, files["source"])
        write_png_mask(stages.binarization.image.bits, files["binary"])
        write_png_mask(stages.crop.bits, files["crop"])
        write_png_mask(stages.reduced.bits, files["reduced"])
        write_png_mask(stages.edges.edge, files["edges"])
        write_png_preview(image, files["synthetic"], sigma)
        for region in Region:
            slug = _region_slug(region)
            files[f"region-{slug}"] = out / f"region-{slug}.png"
            files[f"synthetic-{slug}"] = out / f"synthetic-{slug}.png"
            member = stages.partition.mask(region)
            write_png_mask(member, files[f"region-{slug}"])
            write_png_masked_preview(image, member, files[f"synthetic-{slug}"], sigma)
    except GaussDigitsError as e:
        return tool_failure(e)

    sizes = {_region_slug(r): stages.partition.size_of(r) for r in Region}
    return tool_success(
        f"Wrote mask panels to {out}",
        threshold=stages.binarization.threshold,
        otsu_fallback=stages.binarization.otsu_fallback,
        region_sizes=sizes,
        files={name: str(path) for name, path in files.items()},
    )
