"""Core pipeline for the gaussdigits dataset generator."""

from .server import mcp, DatasetMCPServer
from . import utils

__all__ = ["mcp", "DatasetMCPServer", "utils"]
