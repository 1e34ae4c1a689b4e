"""Generate Dataset Tool - Build a synthetic Gaussian digit dataset.

Reads NIST-style class folders, turns every selected digit into a four-region
mask and fills it with rearranged N(0, variance) draws. Writes float and u8
IDX files plus a manifest that regenerates every image.
"""

import sys
from pathlib import Path

# Handle imports for both server runtime and test contexts
_src_dir = Path(__file__).parent.parent
if str(_src_dir) not in sys.path:
    sys.path.insert(0, str(_src_dir))

try:
    from core.builder import build, dataset_summary, write_dataset
    from core.config import resolve_build_config
    from core.errors import GaussDigitsError, IngestionError, ParameterError
    from core.io_formats import DirectorySource
    from core.server import mcp
    from core.utils import load_config, resolve_setting, tool_failure, tool_success
except ImportError:
    from src.core.builder import build, dataset_summary, write_dataset
    from src.core.config import resolve_build_config
    from src.core.errors import GaussDigitsError, IngestionError, ParameterError
    from src.core.io_formats import DirectorySource
    from src.core.server import mcp
    from src.core.utils import load_config, resolve_setting, tool_failure, tool_success


@mcp.tool()
def generate_dataset(
    out_dir: str,
    source_dir: str = "",
    source_listing: str = "",
    seed: int | None = None,
    train_per_class: int | None = None,
    test_per_class: int | None = None,
    classes: str | None = None,
    variance: float | None = None,
    binarize: str | None = None,
    polarity: str | None = None,
    crop: str | None = None,
    edge_mode: str | None = None,
    canny_sigma: float | None = None,
    canny_low: float | None = None,
    canny_high: float | None = None,
    jobs: int | None = None,
    config_path: str = "",
) -> str:
    """Build a synthetic dataset and write it to ``out_dir``.

    Unset arguments fall back to the config file's ``build`` section, then to
    the environment (GAUSSDIGITS_SOURCE_DIR, GAUSSDIGITS_JOBS), then to the
    defaults (6000 train + 1000 test per class, variance 1024, Otsu,
    ink-is-bright, geometric-centre crop, Canny-guided regions).

    Args:
        out_dir: Directory receiving the IDX files and manifest.yaml
        source_dir: Root of the by-class source tree
        source_listing: Optional CSV of ``path,label`` rows relative to source_dir
        seed: Global seed (0..2^64-1)
        train_per_class: Training images per class
        test_per_class: Test images per class
        classes: Classes to build, e.g. "0-9" or "1,3,7"
        variance: Variance of the pixel distribution
        binarize: "otsu" or "fixed:<t>"
        polarity: "bright" or "dark" ink
        crop: "center" or "centroid"
        edge_mode: "canny" or "morphology"
        canny_sigma: Gaussian blur sigma before gradients
        canny_low: Low hysteresis threshold, fraction of max gradient
        canny_high: High hysteresis threshold, fraction of max gradient
        jobs: Worker processes; output does not depend on it
        config_path: Optional YAML config file

    Returns:
        JSON string with:
        - success, exit_code, message
        - summary: image counts, rejections and the image store hash
        - files: paths written
    """
    try:
        file_config = load_config(config_path or None)
        root = resolve_setting(source_dir, file_config, "source_dir", "GAUSSDIGITS_SOURCE_DIR", "")
        if not root:
            raise IngestionError("no source directory given (--source-dir or GAUSSDIGITS_SOURCE_DIR)")
        raw_jobs = resolve_setting(jobs, file_config, "jobs", "GAUSSDIGITS_JOBS", 1)
        try:
            workers = int(raw_jobs)
        except (TypeError, ValueError) as e:
            raise ParameterError(f"jobs must be an integer, got {raw_jobs!r}") from e
        config = resolve_build_config(
            file_config,
            global_seed=seed,
            train_per_class=train_per_class,
            test_per_class=test_per_class,
            classes=classes,
            variance=variance,
            binarize=binarize,
            polarity=polarity,
            crop=crop,
            edge_mode=edge_mode,
            canny_sigma=canny_sigma,
            canny_low=canny_low,
            canny_high=canny_high,
        )
        source = DirectorySource(Path(root), Path(source_listing) if source_listing else None)
        result = build(config, source, jobs=max(1, workers))
        paths = write_dataset(Path(out_dir), result)
    except GaussDigitsError as e:
        return tool_failure(e)

    summary = dataset_summary(result)
    return tool_success(
        f"Wrote {summary['images']} images ({summary['train']} train, "
        f"{summary['test']} test) to {out_dir}",
        summary=summary,
        files={name: str(path) for name, path in paths.items()},
    )
