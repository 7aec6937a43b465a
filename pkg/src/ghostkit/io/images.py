"""Image export and import: 16-bit PGM, optional 8-bit PNG, phantom files."""

from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from PIL import Image

from ghostkit.acquisition.masks import as_image
from ghostkit.errors import ContainerError

PathLike = Union[str, Path]
PGM_MAXVAL = 65535
GRAY_MODES = ("L", "I;16", "I;16B", "I")


@dataclass(frozen=True)
class IntensityScale:
    """Affine map from stored integers back to intensities: ``value = low + k * step``."""
    low: float
    high: float
    maxval: int = PGM_MAXVAL

    @property
    def step(self) -> float:
        return (self.high - self.low) / self.maxval if self.high > self.low else 0.0

    def to_dict(self) -> dict:
        return {"low": self.low, "high": self.high, "maxval": self.maxval}


def quantize(image: np.ndarray, maxval: int = PGM_MAXVAL) -> Tuple[np.ndarray, IntensityScale]:
    """Min-max scale ``image`` onto ``0..maxval``; a flat image maps to zeros."""
    image = as_image(image)
    low, high = float(image.min()), float(image.max())
    scale = IntensityScale(low, high, maxval)
    if high <= low:
        return np.zeros(image.shape, dtype=np.uint16), scale
    levels = np.rint((image - low) / (high - low) * maxval)
    return np.clip(levels, 0, maxval).astype(np.uint16), scale


def _save(path: PathLike, levels: np.ndarray, fmt: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(levels).save(path, format=fmt)


def write_pgm(path: PathLike, image: np.ndarray) -> IntensityScale:
    """Write a binary 16-bit PGM and return the scale needed to undo the quantization."""
    levels, scale = quantize(image)
    _save(path, levels.astype(np.uint16), "PPM")
    return scale


def read_pgm(path: PathLike, scale: Union[IntensityScale, None] = None) -> np.ndarray:
    """Read a grayscale PGM; with ``scale`` the original intensities are restored."""
    try:
        with Image.open(path) as handle:
            if handle.format != "PPM" or handle.mode not in GRAY_MODES:
                raise ContainerError(f"{path}: not a grayscale PGM ({handle.format} {handle.mode})")
            maxval = 255 if handle.mode == "L" else PGM_MAXVAL
            levels = np.asarray(handle, dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise ContainerError(f"{path}: truncated or unreadable PGM ({exc})") from exc
    if scale is None:
        return levels / maxval
    return scale.low + levels * scale.step


def write_png(path: PathLike, image: np.ndarray) -> IntensityScale:
    """8-bit PNG preview, min-max scaled."""
    levels, scale = quantize(image, maxval=255)
    _save(path, levels.astype(np.uint8), "PNG")
    return scale


def load_phantom_image(path: PathLike) -> np.ndarray:
    """Load a grayscale phantom from any image file and normalize it to ``[0, 1]``."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        image = read_pgm(path)
    else:
        try:
            with Image.open(path) as handle:
                image = np.asarray(handle.convert("F"), dtype=np.float64)
        except OSError as exc:
            raise ContainerError(f"{path}: cannot read image ({exc})") from exc
    image = image - image.min()
    peak = image.max()
    return image / peak if peak > 0 else image
