"""Synthetic test objects."""

from enum import Enum
from typing import Union

import numpy as np
from scipy import ndimage

from ghostkit.acquisition.rng import RandomStream
from ghostkit.errors import ConfigError

DISK_AMPLITUDES = (1.0, 0.75, 0.5, 0.25)


class PhantomKind(str, Enum):
    """Built-in phantom families."""
    FLAT = "flat"
    DISKS = "disks"
    BLOBS = "blobs"


def _flat(height: int, width: int) -> np.ndarray:
    return np.ones((height, width), dtype=np.float64)


def _disks(height: int, width: int, stream: RandomStream) -> np.ndarray:
    image = np.zeros((height, width), dtype=np.float64)
    rows, cols = np.mgrid[0:height, 0:width]
    size = min(height, width)
    r_min, r_max = max(1.0, size / 16), max(1.5, size / 6)
    placed = []
    # Rejection sampling; the first accepted disk always has amplitude 1.
    for _ in range(200):
        if len(placed) == 8:
            break
        u = stream.uniform(4)
        radius = r_min + (r_max - r_min) * u[0]
        cy = radius + (height - 2 * radius) * u[1]
        cx = radius + (width - 2 * radius) * u[2]
        if any(np.hypot(cy - py, cx - px) < radius + pr + 1 for py, px, pr in placed):
            continue
        amplitude = DISK_AMPLITUDES[0] if not placed else DISK_AMPLITUDES[int(u[3] * len(DISK_AMPLITUDES))]
        image[(rows - cy) ** 2 + (cols - cx) ** 2 <= radius ** 2] = amplitude
        placed.append((cy, cx, radius))
    return image


def _blobs(height: int, width: int, stream: RandomStream) -> np.ndarray:
    """Thresholded, anisotropically smoothed noise: elongated chromosome-like bodies."""
    scale = max(height, width) / 32
    noise = stream.normal(height * width).reshape(height, width)
    angle = float(stream.uniform(1)[0]) * 180.0
    rotated = ndimage.rotate(noise, angle, reshape=False, mode="wrap", order=1)
    smooth = ndimage.gaussian_filter(rotated, sigma=(3.0 * scale, scale), mode="wrap")
    smooth = ndimage.rotate(smooth, -angle, reshape=False, mode="wrap", order=1)
    support = smooth > np.quantile(smooth, 0.75)

    texture = ndimage.gaussian_filter(stream.normal(height * width).reshape(height, width), sigma=scale)
    texture = (texture - texture.min()) / max(np.ptp(texture), 1e-12)
    image = np.where(support, 0.5 + 0.5 * texture, 0.0)
    image = ndimage.gaussian_filter(image, sigma=0.5)
    peak = image.max()
    return image / peak if peak > 0 else image


def generate_phantom(kind: Union[PhantomKind, str], height: int, width: int, seed: int) -> np.ndarray:
    """Create a ``height x width`` phantom with values in ``[0, 1]``."""
    if height < 1 or width < 1:
        raise ConfigError(f"phantom dimensions must be positive, got {height}x{width}")
    try:
        kind = PhantomKind(kind)
    except ValueError:
        choices = ", ".join(k.value for k in PhantomKind)
        raise ConfigError(f"unknown phantom kind '{kind}' (choose from {choices})") from None

    stream = RandomStream(seed, f"phantom-{kind.value}")
    if kind is PhantomKind.FLAT:
        return _flat(height, width)
    if kind is PhantomKind.DISKS:
        return _disks(height, width, stream)
    return _blobs(height, width, stream)
