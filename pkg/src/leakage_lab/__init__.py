"""Privacy/utility trade-offs measured by maximal leakage and Sibson mutual information."""

from .errors import (
    CheckpointError,
    ConfigError,
    ConstraintViolation,
    DegenerateThresholdError,
    DomainError,
    RegimeError,
    TrainingDiverged,
)
from .gauss_core import BinaryGaussianMixture, TransformedModel, apply_affine, q_function

__version__ = "0.1.0"

__all__ = [
    "BinaryGaussianMixture",
    "CheckpointError",
    "ConfigError",
    "ConstraintViolation",
    "DegenerateThresholdError",
    "DomainError",
    "RegimeError",
    "TrainingDiverged",
    "TransformedModel",
    "apply_affine",
    "q_function",
]
