#!/usr/bin/env python3
"""GaussDigits - synthetic Gaussian digit datasets in MNIST layout.

Every image is a rearrangement of 1024 i.i.d. N(0, 1024) draws, placed so
that the brightest values fall outside a handwritten digit and the darkest
inside it.

Usage Examples:
  # Build 60,000 train + 10,000 test images from NIST SD-19 by_class
  python src/main.py generate --source-dir by_class --out-dir out --seed 42

  # Statistical checks, permutation audit included
  python src/main.py verify --dataset out

  # PNG + histogram of a few images
  python src/main.py preview --dataset out --indices 0 1 2

  # Mask decomposition panels of a single digit
  python src/main.py masks --source by_class/33/hsf_0/hsf_0_00000.png --out-dir panels

  # Serve the same commands as MCP tools
  python src/main.py serve --transport http --port 8000
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Sequence

# Add src to Python path
sys.path.insert(0, str(Path(__file__).parent))

from core.errors import EXIT_USAGE  # noqa: E402
from core.server import DatasetMCPServer, load_local_env  # noqa: E402
from tools.extract_masks import extract_masks  # noqa: E402
from tools.generate_dataset import generate_dataset  # noqa: E402
from tools.preview_images import preview_images  # noqa: E402
from tools.verify_dataset import verify_dataset  # noqa: E402

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


class CLIParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with code 1."""

    def error(self, message: str) -> Any:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_preprocess_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("preprocessing")
    group.add_argument(
        "--binarize",
        help="Binarization rule: 'otsu' or 'fixed:<t>' (default: otsu)",
    )
    group.add_argument(
        "--polarity",
        choices=["bright", "dark"],
        help="Whether ink is brighter or darker than paper (default: bright)",
    )
    group.add_argument(
        "--crop",
        choices=["center", "centroid"],
        help="64x64 crop centred on the image or on the ink (default: center)",
    )
    group.add_argument(
        "--edge-mode",
        choices=["canny", "morphology"],
        help="Boundary regions from Canny edges or from adjacency (default: canny)",
    )
    group.add_argument("--canny-sigma", type=float, help="Canny blur sigma (default: 1.0)")
    group.add_argument(
        "--canny-low", type=float, help="Canny low threshold, fraction of max gradient (default: 0.1)"
    )
    group.add_argument(
        "--canny-high", type=float, help="Canny high threshold, fraction of max gradient (default: 0.3)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = CLIParser(
        prog="gaussdigits",
        description="GaussDigits - synthetic Gaussian digit datasets in MNIST layout",
    )
    parser.add_argument(
        "--log-level",
        default=os.getenv("GAUSSDIGITS_LOG_LEVEL", "INFO"),
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level (default: $GAUSSDIGITS_LOG_LEVEL or INFO)",
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")

    gen = commands.add_parser("generate", help="Build a dataset from source digits")
    gen.add_argument("--out-dir", required=True, help="Output directory")
    gen.add_argument(
        "--source-dir", default="", help="By-class source tree (default: $GAUSSDIGITS_SOURCE_DIR)"
    )
    gen.add_argument("--source-listing", default="", help="CSV of path,label rows (default: scan folders)")
    gen.add_argument("--seed", type=int, help="Global seed (default: 0)")
    gen.add_argument("--train-per-class", type=int, help="Training images per class (default: 6000)")
    gen.add_argument("--test-per-class", type=int, help="Test images per class (default: 1000)")
    gen.add_argument("--classes", help="Classes, e.g. '0-9' or '1,3,7' (default: 0-9)")
    gen.add_argument("--variance", type=float, help="Pixel variance (default: 1024)")
    _add_preprocess_flags(gen)
    gen.add_argument("--jobs", type=int, help="Worker processes (default: $GAUSSDIGITS_JOBS or 1)")
    gen.add_argument("--config", default="", help="YAML config file (default: none)")

    ver = commands.add_parser("verify", help="Run the statistical checks on a dataset")
    ver.add_argument("--dataset", required=True, help="Dataset directory")
    ver.add_argument("--alpha", type=float, help="Significance level (default: 0.01)")
    ver.add_argument("--variance", type=float, help="Reference variance (default: from manifest)")
    ver.add_argument("--chi-square-bins", type=int, help="Chi-square bins (default: 50)")
    ver.add_argument("--stationarity-pairs", type=int, help="Random position pairs (default: 100)")
    ver.add_argument(
        "--all-pairs", action="store_true", default=None, help="Test every position pair (default: off)"
    )
    ver.add_argument("--pair-seed", type=int, help="Seed choosing position pairs (default: 0)")
    ver.add_argument(
        "--min-image-pass", type=float, help="Required share of passing images (default: 0.98)"
    )
    ver.add_argument(
        "--min-pair-pass", type=float, help="Required share of passing pairs (default: 0.95)"
    )
    ver.add_argument(
        "--source-dir", default="", help="Source tree; enables mask property checks (default: off)"
    )
    ver.add_argument(
        "--source-listing",
        default="",
        help="CSV of path,label rows under --source-dir (default: scan folders)",
    )
    ver.add_argument("--report-dir", default="", help="Report directory (default: the dataset)")
    ver.add_argument("--config", default="", help="YAML config file (default: none)")

    pre = commands.add_parser("preview", help="Write PNG previews and histograms")
    pre.add_argument("--dataset", required=True, help="Dataset directory")
    pre.add_argument("--indices", type=int, nargs="+", required=True, help="Record indices")
    pre.add_argument("--out-dir", default="", help="Output directory (default: <dataset>/preview)")
    pre.add_argument("--bin-width", type=float, default=8.0, help="Histogram bin width (default: 8)")
    pre.add_argument("--alpha", type=float, default=0.01, help="KS significance level (default: 0.01)")

    masks = commands.add_parser("masks", help="Write the mask decomposition panels of one digit")
    where = masks.add_mutually_exclusive_group(required=True)
    where.add_argument("--source", default="", help="A source image file")
    where.add_argument("--dataset", default="", help="Dataset directory (with --index)")
    masks.add_argument("--index", type=int, help="Record index within --dataset")
    masks.add_argument(
        "--source-dir", default="", help="Source tree of --dataset (default: $GAUSSDIGITS_SOURCE_DIR)"
    )
    masks.add_argument(
        "--source-listing",
        default="",
        help="CSV of path,label rows under --source-dir (default: scan folders)",
    )
    masks.add_argument("--out-dir", required=True, help="Output directory")
    masks.add_argument("--seed", type=int, default=0, help="Seed of the synthetic panel (default: 0)")
    _add_preprocess_flags(masks)
    masks.add_argument("--config", default="", help="YAML config file (default: none)")

    serve = commands.add_parser("serve", help="Serve the commands as MCP tools")
    serve.add_argument(
        "--transport",
        choices=["stdio", "http"],
        default=os.getenv("MCP_TRANSPORT_MODE", "stdio"),
        help="Transport mode (default: stdio)",
    )
    serve.add_argument("--host", default=os.getenv("HOST", "0.0.0.0"), help="HTTP host (default: 0.0.0.0)")
    serve.add_argument(
        "--port", type=int, default=int(os.getenv("PORT", "8000")), help="HTTP port (default: 8000)"
    )
    return parser


def _preprocess_kwargs(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "binarize": args.binarize,
        "polarity": args.polarity,
        "crop": args.crop,
        "edge_mode": args.edge_mode,
        "canny_sigma": args.canny_sigma,
        "canny_low": args.canny_low,
        "canny_high": args.canny_high,
    }


def _run_tool(args: argparse.Namespace) -> str:
    if args.command == "generate":
        return generate_dataset.fn(
            out_dir=args.out_dir,
            source_dir=args.source_dir,
            source_listing=args.source_listing,
            seed=args.seed,
            train_per_class=args.train_per_class,
            test_per_class=args.test_per_class,
            classes=args.classes,
            variance=args.variance,
            jobs=args.jobs,
            config_path=args.config,
            **_preprocess_kwargs(args),
        )
    if args.command == "verify":
        return verify_dataset.fn(
            dataset_dir=args.dataset,
            alpha=args.alpha,
            variance=args.variance,
            chi_square_bins=args.chi_square_bins,
            stationarity_pairs=args.stationarity_pairs,
            all_pairs=args.all_pairs,
            pair_seed=args.pair_seed,
            min_image_pass_fraction=args.min_image_pass,
            min_pair_pass_fraction=args.min_pair_pass,
            source_dir=args.source_dir,
            source_listing=args.source_listing,
            report_dir=args.report_dir,
            config_path=args.config,
        )
    if args.command == "preview":
        return preview_images.fn(
            dataset_dir=args.dataset,
            indices=args.indices,
            out_dir=args.out_dir,
            bin_width=args.bin_width,
            alpha=args.alpha,
        )
    return extract_masks.fn(
        out_dir=args.out_dir,
        source_path=args.source,
        dataset_dir=args.dataset,
        index=args.index,
        source_dir=args.source_dir,
        source_listing=args.source_listing,
        seed=args.seed,
        config_path=args.config,
        **_preprocess_kwargs(args),
    )


def _serve(args: argparse.Namespace) -> int:
    try:
        server = DatasetMCPServer(name="gaussdigits")
        server.load_tools()
        server.run(transport_mode=args.transport, host=args.host, port=args.port)
    except KeyboardInterrupt:
        logging.info("GaussDigits server shutting down...")
    except Exception as e:
        logging.error(f"Server error: {e}", exc_info=True)
        return 1
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    """Main entry point; returns the process exit code."""
    load_local_env()
    args = build_parser().parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler(sys.stderr)],
    )

    logging.info("=" * 60)
    logging.info(f"GAUSSDIGITS - {args.command}")
    logging.info("=" * 60)

    if args.command == "serve":
        return _serve(args)

    output = _run_tool(args)
    print(output)
    return int(json.loads(output)["exit_code"])


if __name__ == "__main__":
    sys.exit(main())
