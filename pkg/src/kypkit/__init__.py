"""Numerical toolkit for KYP-lemma certificates, LQ values and frequency conditions."""

from .core import (
    KypError,
    KypProblem,
    TimeKind,
    Trajectory,
    validate_problem,
)

__all__ = ["KypError", "KypProblem", "TimeKind", "Trajectory", "validate_problem"]
__version__ = "0.1.0"
