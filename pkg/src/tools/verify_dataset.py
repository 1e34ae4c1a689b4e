"""Verify Dataset Tool - Statistical checks on a generated dataset.

Replays each image's draws from the manifest (permutation audit) and tests
the pixels against N(0, variance): pooled and per-image KS, chi-square and
two-sample KS between pixel positions.
"""

import sys
from pathlib import Path

# Handle imports for both server runtime and test contexts
_src_dir = Path(__file__).parent.parent
if str(_src_dir) not in sys.path:
    sys.path.insert(0, str(_src_dir))

try:
    from core.builder import load_dataset
    from core.config import resolve_verify_config
    from core.errors import EXIT_OK, EXIT_VERIFY, GaussDigitsError
    from core.io_formats import DirectorySource
    from core.server import mcp
    from core.utils import (
        load_config,
        resolve_setting,
        tool_failure,
        tool_result,
        write_csv_rows,
        write_yaml_document,
    )
    from core.verification import run_verification
except ImportError:
    from src.core.builder import load_dataset
    from src.core.config import resolve_verify_config
    from src.core.errors import EXIT_OK, EXIT_VERIFY, GaussDigitsError
    from src.core.io_formats import DirectorySource
    from src.core.server import mcp
    from src.core.utils import (
        load_config,
        resolve_setting,
        tool_failure,
        tool_result,
        write_csv_rows,
        write_yaml_document,
    )
    from src.core.verification import run_verification

REPORT_FILE = "verification.yaml"
PAIRS_FILE = "verification-pairs.csv"


@mcp.tool()
def verify_dataset(
    dataset_dir: str,
    alpha: float | None = None,
    variance: float | None = None,
    chi_square_bins: int | None = None,
    stationarity_pairs: int | None = None,
    all_pairs: bool | None = None,
    pair_seed: int | None = None,
    min_image_pass_fraction: float | None = None,
    min_pair_pass_fraction: float | None = None,
    source_dir: str = "",
    source_listing: str = "",
    report_dir: str = "",
    config_path: str = "",
) -> str:
    """Run every check on a dataset directory and write a report.

    Args:
        dataset_dir: Directory written by generate_dataset
        alpha: Significance level (default 0.01)
        variance: Reference variance (default: the manifest's)
        chi_square_bins: Equiprobable bins for the pooled chi-square test
        stationarity_pairs: Random position pairs for the stationarity test
        all_pairs: Test all 523,776 position pairs instead
        pair_seed: Seed choosing the random pairs
        min_image_pass_fraction: Share of images whose own KS must pass
        min_pair_pass_fraction: Share of position pairs that must pass
        source_dir: Source tree; when set, masks are recomputed and the
            partition and region-ordering properties are checked too
        source_listing: CSV of path,label rows the dataset was built from
            (default: scan source_dir folders)
        report_dir: Where to write the report (default: dataset_dir)
        config_path: Optional YAML config file

    Returns:
        JSON string with success, exit_code (3 when a check fails), failing
        test names and one entry per report.
    """
    try:
        file_config = load_config(config_path or None)
        cfg = resolve_verify_config(
            file_config,
            alpha=alpha,
            variance=variance,
            chi_square_bins=chi_square_bins,
            stationarity_pairs=stationarity_pairs,
            all_pairs=all_pairs,
            pair_seed=pair_seed,
            min_image_pass_fraction=min_image_pass_fraction,
            min_pair_pass_fraction=min_pair_pass_fraction,
        )
        manifest, store = load_dataset(Path(dataset_dir))
        root = resolve_setting(source_dir, file_config, "source_dir", "GAUSSDIGITS_SOURCE_DIR", "")
        source = (
            DirectorySource(Path(root), Path(source_listing) if source_listing else None)
            if root
            else None
        )
        result = run_verification(manifest, store, cfg, source)

        out = Path(report_dir or dataset_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_yaml_document(out / REPORT_FILE, {
            "dataset": str(dataset_dir),
            "passed": result.passed,
            "failing": result.failing,
            "config": cfg.model_dump(mode="json"),
            "reports": [r.model_dump(mode="json") for r in result.reports],
        })
        if result.pair_reports:
            write_csv_rows(
                out / PAIRS_FILE,
                ("row1", "col1", "row2", "col2", "statistic", "critical_value", "passed"),
                (
                    (*r.details["positions"][0], *r.details["positions"][1],
                     r.statistic, r.critical_value, r.passed)
                    for r in result.pair_reports
                ),
            )
    except GaussDigitsError as e:
        return tool_failure(e)

    reports = [
        {
            "test_name": r.test_name,
            "passed": r.passed,
            "statistic": r.statistic,
            "critical_value": r.critical_value,
            "skipped": r.skipped,
        }
        for r in result.reports
    ]
    if result.passed:
        message = f"All {len(reports)} checks passed"
    else:
        message = f"Failing checks: {', '.join(result.failing)}"
    return tool_result(
        result.passed,
        EXIT_OK if result.passed else EXIT_VERIFY,
        message,
        failing=result.failing,
        reports=reports,
        report_file=str(out / REPORT_FILE),
    )
