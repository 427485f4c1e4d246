"""B-spline smoothed CUSUM tests for a mean break in functional time series."""

from .dataset import FunctionalDataset
from .errors import (
    DegenerateVarianceError,
    DomainError,
    FdbreakError,
    IngestionError,
    NumericalError,
    SingularDesignError,
    ValidationError,
)
from .inference import Analysis, DetectionReport, JumpBand, PipelineConfig, analyze, estimate_jump, run_detection
from .splinecore import SplineBasis, eval_basis

__all__ = [
    "Analysis",
    "DegenerateVarianceError",
    "DetectionReport",
    "DomainError",
    "FdbreakError",
    "FunctionalDataset",
    "IngestionError",
    "JumpBand",
    "NumericalError",
    "PipelineConfig",
    "SingularDesignError",
    "SplineBasis",
    "ValidationError",
    "analyze",
    "estimate_jump",
    "eval_basis",
    "run_detection",
]
