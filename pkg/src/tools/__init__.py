"""Dataset tools for the gaussdigits MCP server.

Tools are auto-discovered from .py files in this directory.
"""

from .extract_masks import extract_masks
from .generate_dataset import generate_dataset
from .preview_images import preview_images
from .verify_dataset import verify_dataset

__all__ = [
    "extract_masks",
    "generate_dataset",
    "preview_images",
    "verify_dataset",
]
