"""Exception hierarchy for the GaussDigits pipeline.

Every error carries the process exit code the CLI reports for it:
1 usage error, 2 data/build error, 3 verification failure.
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFY = 3


class GaussDigitsError(Exception):
    """Base class for all pipeline errors."""

    exit_code: int = EXIT_DATA


class StructuralError(GaussDigitsError):
    """A domain type was built from inconsistent parts (lengths, sizes)."""


class ParameterError(GaussDigitsError):
    """A parameter is outside its documented range."""

    exit_code = EXIT_USAGE


class DimensionError(GaussDigitsError):
    """An image has the wrong dimensions for the requested step."""


class DegenerateMaskError(GaussDigitsError):
    """A binary digit image is all foreground or all background."""


class IngestionError(GaussDigitsError):
    """A source image could not be read or labelled."""


class SerializationError(GaussDigitsError):
    """An IDX / PNG / manifest document could not be written or parsed."""


class BuildError(GaussDigitsError):
    """The dataset could not be assembled (e.g. a class ran out of sources)."""


class RegenerationError(GaussDigitsError):
    """A manifest references sources that are no longer available."""


class SampleSizeError(GaussDigitsError):
    """A statistical test was asked to run on too few samples."""


class AuditError(GaussDigitsError):
    """A dataset and its manifest disagree."""

    exit_code = EXIT_VERIFY

    def __init__(self, message: str, indices: list[int] | None = None):
        super().__init__(message)
        self.indices = indices or []
