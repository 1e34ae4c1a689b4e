"""GaussDigits - synthetic Gaussian digit datasets in MNIST layout."""

from . import core
from . import tools

__all__ = ["core", "tools"]
