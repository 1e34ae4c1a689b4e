"""Preview Images Tool - PNG previews and histograms of dataset images."""

import sys
from pathlib import Path

# Handle imports for both server runtime and test contexts
_src_dir = Path(__file__).parent.parent
if str(_src_dir) not in sys.path:
    sys.path.insert(0, str(_src_dir))

try:
    from core.builder import load_dataset
    from core.errors import GaussDigitsError, ParameterError
    from core.io_formats import write_png_preview
    from core.server import mcp
    from core.utils import tool_failure, tool_success, write_csv_rows
    from core.verification import histogram_export, ks_one_sample, normal_cdf
except ImportError:
    from src.core.builder import load_dataset
    from src.core.errors import GaussDigitsError, ParameterError
    from src.core.io_formats import write_png_preview
    from src.core.server import mcp
    from src.core.utils import tool_failure, tool_success, write_csv_rows
    from src.core.verification import histogram_export, ks_one_sample, normal_cdf

KS_SUMMARY_FILE = "ks-summary.csv"


@mcp.tool()
def preview_images(
    dataset_dir: str,
    indices: list[int],
    out_dir: str = "",
    bin_width: float = 8.0,
    alpha: float = 0.01,
) -> str:
    """Write a PNG and a histogram CSV for each chosen image.

    Histogram bins are centred on multiples of ``bin_width`` and each row
    carries the N(0, variance) expectation for comparison. A KS summary of
    the chosen images is written alongside.

    Args:
        dataset_dir: Directory written by generate_dataset
        indices: Record indices (train first, then test)
        out_dir: Output directory (default: <dataset_dir>/preview)
        bin_width: Histogram bin width
        alpha: Significance level of the per-image KS column

    Returns:
        JSON string with success, exit_code, message and the files written.
    """
    try:
        if not indices:
            raise ParameterError("at least one index is required")
        manifest, store = load_dataset(Path(dataset_dir))
        bad = [i for i in indices if not 0 <= i < len(store)]
        if bad:
            raise ParameterError(f"indices {bad} out of range 0..{len(store) - 1}")
        variance = manifest.parameters.variance
        sigma = variance**0.5
        cdf = normal_cdf(variance)
        out = Path(out_dir) if out_dir else Path(dataset_dir) / "preview"
        out.mkdir(parents=True, exist_ok=True)

        files: list[str] = []
        summary_rows = []
        for index in indices:
            image = store.image(index)
            png = out / f"image-{index:06d}.png"
            csv_path = out / f"histogram-{index:06d}.csv"
            write_png_preview(image, png, sigma)
            hist = histogram_export(image, bin_width, variance)
            write_csv_rows(csv_path, ("bin_center", "count", "gaussian"), hist.rows())
            files += [str(png), str(csv_path)]
            ks = ks_one_sample(image.values, cdf, alpha)
            summary_rows.append((
                index, int(store.labels[index]), store.split_of(index).value,
                ks.statistic, ks.critical_value, ks.passed,
            ))
        summary = out / KS_SUMMARY_FILE
        write_csv_rows(
            summary,
            ("index", "label", "split", "ks_statistic", "critical_value", "passed"),
            summary_rows,
        )
    except GaussDigitsError as e:
        return tool_failure(e)

    return tool_success(
        f"Wrote previews of {len(indices)} image(s) to {out}",
        files=files,
        ks_summary=str(summary),
    )
