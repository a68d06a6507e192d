"""Key bits from channel observations and their randomness assessment."""

from .nist import RandomnessReport, TestResult, evaluate_keys, nist_suite
from .quantize import KeyMaterial, bdr, cqa_quantize, informative_entries

__all__ = [
    "KeyMaterial", "RandomnessReport", "TestResult", "bdr", "cqa_quantize",
    "evaluate_keys", "informative_entries", "nist_suite",
]
