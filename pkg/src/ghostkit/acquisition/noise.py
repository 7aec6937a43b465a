"""Photon-counting noise for bucket and pencil-beam acquisitions."""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ghostkit.acquisition.masks import BucketVector, as_image
from ghostkit.acquisition.rng import RandomStream
from ghostkit.errors import ConfigError


@dataclass(frozen=True)
class NoiseModel:
    """Poisson model with at most ``C`` expected photons per pixel and realization.

    ``C = inf`` disables the noise (buckets are returned unchanged).
    """
    C: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.C > 0:
            raise ConfigError(f"photon constant C must be positive, got {self.C}")

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.C)


def apply_poisson(
    b: Union[BucketVector, np.ndarray],
    model: NoiseModel,
    stream: str = "buckets",
) -> BucketVector:
    """Draw ``y_m = Poisson(C b_m) / C`` independently for every bucket."""
    if isinstance(b, BucketVector):
        b = b.clean if b.clean is not None else b.values
    clean = np.asarray(b, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(clean)):
        raise ConfigError("clean buckets contain non-finite values")
    if np.any(clean < 0):
        raise ConfigError(f"clean buckets must be non-negative (min {clean.min():.3g})")
    if model.noiseless:
        return BucketVector(clean.copy(), clean=clean)
    counts = RandomStream(model.seed, stream).poisson(model.C * clean)
    return BucketVector(counts / model.C, clean=clean)


def noise_fluctuation_ratio(b: np.ndarray, y: np.ndarray) -> float:
    """Noise amplitude relative to the signal fluctuations, in percent.

    ``100 * mean|y - b| / mean|b - mean(b)|``; a constant clean signal with
    any noise gives ``inf``.
    """
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if b.shape != y.shape:
        raise ConfigError(f"bucket vectors differ in length ({b.size} vs {y.size})")
    noise = np.mean(np.abs(y - b))
    signal = np.mean(np.abs(b - b.mean()))
    if noise == 0:
        return 0.0
    if signal == 0:
        return math.inf
    return float(100.0 * noise / signal)


def pencil_beam_scan(x: np.ndarray, photons_per_pixel: float, seed: int) -> np.ndarray:
    """Raster-scan acquisition: every pixel is ``Poisson(n x) / n``."""
    image = as_image(x)
    if not photons_per_pixel > 0:
        raise ConfigError(f"photons_per_pixel must be positive, got {photons_per_pixel}")
    if np.any(image < 0):
        raise ConfigError("pencil-beam object must be non-negative")
    if math.isinf(photons_per_pixel):
        return image.copy()
    counts = RandomStream(seed, "pencil-beam").poisson(photons_per_pixel * image)
    return counts / photons_per_pixel
