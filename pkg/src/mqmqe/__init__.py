"""Pseudo-MQM data synthesis, a desk-scale QE model, and error-span conversion."""

from .corpus import (
    BAD,
    MASK,
    OK,
    ErrorSpan,
    QESample,
    Severity,
    TokenizedText,
    ValidationError,
    mqm_score,
    read_qe_jsonl,
    tags_from_spans,
    tokenize,
    write_qe_jsonl,
)
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = [
    "BAD",
    "MASK",
    "OK",
    "ErrorSpan",
    "KERNEL_BACKEND",
    "QESample",
    "Severity",
    "TokenizedText",
    "ValidationError",
    "mqm_score",
    "read_qe_jsonl",
    "tags_from_spans",
    "tokenize",
    "write_qe_jsonl",
]
