"""Minimal reverse-mode automatic differentiation over numpy arrays."""

from ghostkit.tensor.optim import AdamState, adam_step
from ghostkit.tensor.tape import (
    DiffTensor,
    Precision,
    Tape,
    default_dtype,
    get_precision,
    precision,
    set_precision,
)

__all__ = [
    "AdamState",
    "DiffTensor",
    "Precision",
    "Tape",
    "adam_step",
    "default_dtype",
    "get_precision",
    "precision",
    "set_precision",
]
