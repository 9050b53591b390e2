"""Exact rational computation of Kohn multiplier ideals on special domains, with replayable certificates."""

from .poly import Polynomial, parse, to_string
from .groebner import Budget, Ideal, ResourceLimitExceeded
from .certificate import Certificate, SpecialDomain, verify_certificate
from .engine import EngineConfig, run
from .invariants import invariant_report

__version__ = "0.1.0"

__all__ = [
    "Polynomial",
    "parse",
    "to_string",
    "Budget",
    "Ideal",
    "ResourceLimitExceeded",
    "Certificate",
    "SpecialDomain",
    "verify_certificate",
    "EngineConfig",
    "run",
    "invariant_report",
]
