"""Image quality metrics against a reference."""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
from scipy import ndimage

from ghostkit.acquisition.masks import as_image
from ghostkit.errors import ShapeError
from ghostkit.scoring.frc import FrcCurve, ResolutionConvention, frc, resolution_from_frc

SSIM_SIGMA = 1.5
SSIM_RADIUS = 5  # 11 x 11 window
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(a: np.ndarray, reference: np.ndarray, op: str) -> tuple:
    a = as_image(a, op)
    reference = as_image(reference, op)
    if a.shape != reference.shape:
        raise ShapeError(op, "image", reference.shape, a.shape)
    return a, reference


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _pair(a, b, "mse")
    return float(np.mean((a - b) ** 2))


def psnr(a: np.ndarray, reference: np.ndarray) -> float:
    """``10 log10(peak^2 / MSE)`` with ``peak = max(reference)``; ``inf`` for identical images."""
    a, reference = _pair(a, reference, "psnr")
    error = float(np.mean((a - reference) ** 2))
    if error == 0:
        return math.inf
    peak = float(reference.max())
    if peak <= 0:
        return -math.inf
    return float(10.0 * np.log10(peak * peak / error))


@dataclass
class SsimComponents:
    """Mean luminance, contrast and structure terms and their product."""
    luminance: float
    contrast: float
    structure: float
    ssim: float


def _local(image: np.ndarray) -> np.ndarray:
    return ndimage.gaussian_filter(image, SSIM_SIGMA, mode="reflect", truncate=SSIM_RADIUS / SSIM_SIGMA)


def ssim_components(a: np.ndarray, reference: np.ndarray) -> SsimComponents:
    """Gaussian-window SSIM terms (11x11, sigma 1.5, K1 0.01, K2 0.03).

    The dynamic range is ``max - min`` of the reference (1 for a flat
    reference). Border pixels closer than the window radius are excluded
    from the means when the image is large enough.
    """
    a, reference = _pair(a, reference, "ssim")
    data_range = float(reference.max() - reference.min()) or 1.0
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    c3 = c2 / 2.0

    mu_a, mu_r = _local(a), _local(reference)
    var_a = np.maximum(_local(a * a) - mu_a ** 2, 0.0)
    var_r = np.maximum(_local(reference * reference) - mu_r ** 2, 0.0)
    cov = _local(a * reference) - mu_a * mu_r
    sd_a, sd_r = np.sqrt(var_a), np.sqrt(var_r)

    luminance = (2 * mu_a * mu_r + c1) / (mu_a ** 2 + mu_r ** 2 + c1)
    contrast = (2 * sd_a * sd_r + c2) / (var_a + var_r + c2)
    structure = (cov + c3) / (sd_a * sd_r + c3)
    index = ((2 * mu_a * mu_r + c1) * (2 * cov + c2)) / ((mu_a ** 2 + mu_r ** 2 + c1) * (var_a + var_r + c2))

    crop = (slice(None), slice(None))
    if min(a.shape) > 2 * SSIM_RADIUS:
        crop = (slice(SSIM_RADIUS, -SSIM_RADIUS), slice(SSIM_RADIUS, -SSIM_RADIUS))
    return SsimComponents(
        luminance=float(luminance[crop].mean()),
        contrast=float(contrast[crop].mean()),
        structure=float(structure[crop].mean()),
        ssim=float(index[crop].mean()),
    )


def ssim(a: np.ndarray, reference: np.ndarray) -> float:
    return ssim_components(a, reference).ssim


@dataclass
class MetricBundle:
    """All quality numbers for one reconstruction."""
    mse: float
    psnr: float
    ssim: float
    resolution: float  # pixels, see ``convention``
    convention: ResolutionConvention = ResolutionConvention.PERIOD
    frc: Optional[FrcCurve] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mse": self.mse,
            "psnr": self.psnr,
            "ssim": self.ssim,
            "resolution": self.resolution,
            "resolution_convention": self.convention.value,
        }


class ImageScorer(ABC):
    """Scores a reconstruction against a reference image."""

    @abstractmethod
    def score(self, image: np.ndarray, reference: np.ndarray) -> MetricBundle:
        """Evaluate ``image`` against ``reference``."""


class QualityScorer(ImageScorer):
    """MSE, PSNR, SSIM and the FRC resolution in one pass."""

    def __init__(self, hann: bool = False):
        self.hann = hann

    def score(self, image: np.ndarray, reference: np.ndarray) -> MetricBundle:
        curve = frc(image, reference, hann=self.hann)
        return MetricBundle(
            mse=mse(image, reference),
            psnr=psnr(image, reference),
            ssim=ssim(image, reference),
            resolution=resolution_from_frc(curve),
            frc=curve,
        )
