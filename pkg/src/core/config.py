"""Validated configuration models for building and verifying datasets.

Values come from (highest first) CLI flags, the optional YAML config file,
environment variables and finally the defaults declared here.
"""

from enum import Enum
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ParameterError
from .utils import get_section

U64_MAX = 2**64 - 1


class Polarity(str, Enum):
    INK_IS_BRIGHT = "bright"
    INK_IS_DARK = "dark"


class CropMode(str, Enum):
    GEOMETRIC_CENTER = "center"
    FOREGROUND_CENTROID = "centroid"


class EdgeMode(str, Enum):
    CANNY_GUIDED = "canny"
    MORPHOLOGICAL = "morphology"


class BinarizeRule(BaseModel):
    """Either a fixed threshold or Otsu's histogram method."""

    model_config = ConfigDict(frozen=True)

    mode: Literal["otsu", "fixed"] = "otsu"
    threshold: int | None = Field(default=None, ge=0, le=255)

    @model_validator(mode="after")
    def _threshold_matches_mode(self) -> "BinarizeRule":
        if self.mode == "fixed" and self.threshold is None:
            raise ValueError("fixed binarization needs a threshold")
        return self

    @classmethod
    def parse(cls, text: str) -> "BinarizeRule":
        """Parse the CLI form ``otsu`` or ``fixed:<t>``."""
        text = text.strip().lower()
        if text == "otsu":
            return cls(mode="otsu")
        if text.startswith("fixed:"):
            try:
                return cls(mode="fixed", threshold=int(text.split(":", 1)[1]))
            except (ValueError, ValidationError) as e:
                raise ParameterError(f"invalid fixed threshold in '{text}': {e}") from e
        raise ParameterError(f"binarize rule must be 'otsu' or 'fixed:<t>', got '{text}'")

    def __str__(self) -> str:
        return "otsu" if self.mode == "otsu" else f"fixed:{self.threshold}"


class CannyParams(BaseModel):
    """Canny parameters; thresholds are fractions of the maximum gradient."""

    model_config = ConfigDict(frozen=True)

    blur_sigma: float = Field(default=1.0, gt=0)
    low_threshold: float = Field(default=0.1, gt=0, le=1)
    high_threshold: float = Field(default=0.3, gt=0, le=1)

    @model_validator(mode="after")
    def _ordered(self) -> "CannyParams":
        if self.low_threshold > self.high_threshold:
            raise ValueError("low_threshold must not exceed high_threshold")
        return self


class PreprocessConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    binarize: BinarizeRule = BinarizeRule()
    polarity: Polarity = Polarity.INK_IS_BRIGHT
    crop: CropMode = CropMode.GEOMETRIC_CENTER
    edge_mode: EdgeMode = EdgeMode.CANNY_GUIDED
    canny: CannyParams = CannyParams()

    @field_validator("binarize", mode="before")
    @classmethod
    def _parse_rule(cls, value: Any) -> Any:
        return BinarizeRule.parse(value) if isinstance(value, str) else value


class BuildConfig(BaseModel):
    """Everything that determines a dataset, given the source images."""

    model_config = ConfigDict(frozen=True)

    global_seed: int = Field(default=0, ge=0, le=U64_MAX)
    train_per_class: int = Field(default=6000, ge=0)
    test_per_class: int = Field(default=1000, ge=0)
    classes: list[int] = Field(default_factory=lambda: list(range(10)))
    variance: float = Field(default=1024.0, gt=0)
    preprocess: PreprocessConfig = PreprocessConfig()

    @field_validator("classes", mode="before")
    @classmethod
    def _parse_classes(cls, value: Any) -> Any:
        return parse_classes(value) if isinstance(value, str) else value

    @field_validator("classes")
    @classmethod
    def _valid_classes(cls, value: list[int]) -> list[int]:
        if not value:
            raise ValueError("at least one class is required")
        if any(not 0 <= c <= 9 for c in value):
            raise ValueError(f"classes must lie in 0..9, got {value}")
        return sorted(set(value))

    @property
    def per_class(self) -> int:
        return self.train_per_class + self.test_per_class


class VerifyConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(default=0.01, gt=0, lt=1)
    variance: float | None = Field(default=None, gt=0)
    chi_square_bins: int = Field(default=50, ge=2)
    stationarity_pairs: int = Field(default=100, ge=1)
    all_pairs: bool = False
    pair_seed: int = Field(default=0, ge=0, le=U64_MAX)
    min_image_pass_fraction: float = Field(default=0.98, ge=0, le=1)
    min_pair_pass_fraction: float = Field(default=0.95, ge=0, le=1)


def parse_classes(text: str) -> list[int]:
    """Parse ``0,1,2`` or ranges like ``0-4,7``."""
    classes: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = (int(p) for p in part.split("-", 1))
                classes.extend(range(lo, hi + 1))
            else:
                classes.append(int(part))
        except ValueError as e:
            raise ParameterError(f"invalid class list '{text}'") from e
    return classes


def build_model(model_cls: type[BaseModel], base: dict[str, Any], overrides: dict[str, Any]) -> Any:
    """Validate ``base`` updated with the non-None ``overrides``.

    Raises:
        ParameterError: with pydantic's message when validation fails.
    """
    merged = dict(base)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return model_cls.model_validate(merged)
    except ValidationError as e:
        raise ParameterError(f"invalid {model_cls.__name__}: {e}") from e


def _present(values: dict[str, Any]) -> dict[str, Any]:
    return {k: v for k, v in values.items() if v is not None}


def resolve_build_config(
    file_config: dict[str, Any],
    *,
    global_seed: int | None = None,
    train_per_class: int | None = None,
    test_per_class: int | None = None,
    classes: str | list[int] | None = None,
    variance: float | None = None,
    binarize: str | None = None,
    polarity: str | None = None,
    crop: str | None = None,
    edge_mode: str | None = None,
    canny_sigma: float | None = None,
    canny_low: float | None = None,
    canny_high: float | None = None,
) -> BuildConfig:
    """Merge flag values over the config file's ``build`` section.

    Raises:
        ParameterError: if the merged values do not validate.
    """
    base = dict(get_section(file_config, "build"))
    preprocess = dict(base.pop("preprocess", None) or {})
    canny = dict(preprocess.pop("canny", None) or {})
    canny.update(_present({
        "blur_sigma": canny_sigma,
        "low_threshold": canny_low,
        "high_threshold": canny_high,
    }))
    preprocess.update(_present({
        "binarize": binarize,
        "polarity": polarity,
        "crop": crop,
        "edge_mode": edge_mode,
    }))
    preprocess["canny"] = canny
    base["preprocess"] = preprocess
    return build_model(BuildConfig, base, {
        "global_seed": global_seed,
        "train_per_class": train_per_class,
        "test_per_class": test_per_class,
        "classes": classes,
        "variance": variance,
    })


def resolve_verify_config(file_config: dict[str, Any], **overrides: Any) -> VerifyConfig:
    """Merge flag values over the config file's ``verify`` section."""
    return build_model(VerifyConfig, dict(get_section(file_config, "verify")), overrides)
