"""Exploratory control with Tsallis entropy under a partially observed latent drift."""

from .errors import (ConfigError, ConvexityViolation, DegenerateParameters, InvalidDistribution,
                     InvalidGrid, NonConvergence, NumericalError, QExploreError)
from .params import DEFAULT_PARAMS, ModelParams
from .qgaussian import QGaussian

__all__ = [
    "ConfigError", "ConvexityViolation", "DegenerateParameters", "InvalidDistribution", "InvalidGrid",
    "NonConvergence", "NumericalError", "QExploreError", "DEFAULT_PARAMS", "ModelParams", "QGaussian",
]
