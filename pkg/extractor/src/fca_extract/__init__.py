"""Batch image-embedding extractor producing FCAE embedding stores."""

__version__ = "0.1.0"

from .encoders import SUPPORTED, load_encoder
from .extract import ExtractorJob, ExtractSummary, run_extract

__all__ = [
    "__version__",
    "SUPPORTED",
    "ExtractorJob",
    "ExtractSummary",
    "load_encoder",
    "run_extract",
]
