"""Learned reconstruction engines, their training loop and cross-validation."""

from ghostkit.algorithms.crossval import CrossValidationResult, LambdaScore, cross_validate_lambda, solve_tv_for_cv
from ghostkit.algorithms.engines import (
    CvHoldout,
    Method,
    Normalization,
    ReconReport,
    cross_split_weights,
    gidc_reconstruct,
    holdout_realizations,
    inr_reconstruct,
    n2g_reconstruct,
    n2i_reconstruct,
    reconstruct,
)
from ghostkit.algorithms.probes import (
    LossDecomposition,
    OverfittingContrast,
    estimate_noise_floor,
    loss_decomposition_probe,
    overfitting_contrast,
)
from ghostkit.algorithms.training import StepOutput, Trainer, TrainConfig, TrainResult, TrainTrace

__all__ = [
    "CrossValidationResult",
    "CvHoldout",
    "LambdaScore",
    "LossDecomposition",
    "Method",
    "Normalization",
    "OverfittingContrast",
    "ReconReport",
    "StepOutput",
    "TrainConfig",
    "TrainResult",
    "TrainTrace",
    "Trainer",
    "cross_split_weights",
    "cross_validate_lambda",
    "estimate_noise_floor",
    "gidc_reconstruct",
    "holdout_realizations",
    "inr_reconstruct",
    "loss_decomposition_probe",
    "n2g_reconstruct",
    "n2i_reconstruct",
    "overfitting_contrast",
    "reconstruct",
    "solve_tv_for_cv",
]
