"""Numerical laboratory for the f-biased dollar exchange with a collective debt limit."""

__version__ = "0.1.0"

from .model import (ModelParams, RateFunction, WealthDistribution, class_g_probe, debt_level,
                    distance, mean_rate, moments)

__all__ = [
    "ModelParams",
    "RateFunction",
    "WealthDistribution",
    "class_g_probe",
    "debt_level",
    "distance",
    "mean_rate",
    "moments",
]
