"""Quality metrics: MSE, PSNR, SSIM and Fourier ring correlation."""

from ghostkit.scoring.frc import FrcCurve, ResolutionConvention, frc, half_bit_threshold, resolution_from_frc
from ghostkit.scoring.metrics import (
    ImageScorer,
    MetricBundle,
    QualityScorer,
    SsimComponents,
    mse,
    psnr,
    ssim,
    ssim_components,
)

__all__ = [
    "FrcCurve",
    "ImageScorer",
    "MetricBundle",
    "QualityScorer",
    "ResolutionConvention",
    "SsimComponents",
    "frc",
    "half_bit_threshold",
    "mse",
    "psnr",
    "resolution_from_frc",
    "ssim",
    "ssim_components",
]
