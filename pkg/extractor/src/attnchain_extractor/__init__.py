from .errors import (
    ExtractorError,
    ImageDecodeError,
    ModelLoadError,
    ShapeMismatch,
)
from .extract import ExtractionSpec, extract

__version__ = "0.1.0"

__all__ = [
    "ExtractionSpec",
    "ExtractorError",
    "ImageDecodeError",
    "ModelLoadError",
    "ShapeMismatch",
    "extract",
]
