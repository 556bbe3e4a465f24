"""Zero-shot species clustering benchmark: Python bindings."""

from . import zseb
from ._core import (
    DegenerateInputError,
    FormatError,
    NumericError,
    ParameterError,
    ScenarioError,
    ValidationError,
    ZeroclustError,
    auto_epsilon,
    cluster,
    default_grid_size,
    evaluate,
    fit_ab,
    make_blobs,
    read_bank,
    reduce,
    standardize,
    v_measure_from,
    validate_bank,
    write_bank,
)
from .zseb import verify_format

__all__ = [
    "DegenerateInputError",
    "FormatError",
    "NumericError",
    "ParameterError",
    "ScenarioError",
    "ValidationError",
    "ZeroclustError",
    "auto_epsilon",
    "cluster",
    "default_grid_size",
    "evaluate",
    "fit_ab",
    "make_blobs",
    "read_bank",
    "reduce",
    "standardize",
    "v_measure_from",
    "validate_bank",
    "verify_format",
    "write_bank",
    "zseb",
]
