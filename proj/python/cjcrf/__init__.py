"""Cascaded joint facial landmark detection and AU recognition."""

from ._core import (
    DimensionMismatch,
    FormatError,
    Model,
    auc_scores,
    evaluate_model,
    evaluate_predictions,
    f1_scores,
    generate,
    normalized_error,
    run_cli,
    synth,
    train,
)

__all__ = [
    "DimensionMismatch",
    "FormatError",
    "Model",
    "auc_scores",
    "evaluate_model",
    "evaluate_predictions",
    "f1_scores",
    "generate",
    "normalized_error",
    "run_cli",
    "synth",
    "train",
]
