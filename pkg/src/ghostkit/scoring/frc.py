"""Fourier ring correlation and half-bit resolution."""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List

import numpy as np

from ghostkit.acquisition.masks import as_image
from ghostkit.errors import ShapeError

NYQUIST_RESOLUTION = 2.0


class ResolutionConvention(str, Enum):
    """How a cutoff frequency is turned into a length in pixels."""
    PERIOD = "period"  # 1 / f_c


@dataclass
class FrcCurve:
    """Ring-wise correlation; ring 0 holds the zero frequency."""
    frequencies: np.ndarray  # cycles per pixel, up to 0.5
    correlation: np.ndarray
    counts: np.ndarray  # Fourier samples per ring
    threshold: np.ndarray  # half-bit curve

    def rows(self) -> List[Dict[str, Any]]:
        return [
            {"frequency": float(f), "correlation": float(c), "count": int(n), "threshold": float(t)}
            for f, c, n, t in zip(self.frequencies, self.correlation, self.counts, self.threshold)
        ]


def half_bit_threshold(counts: np.ndarray) -> np.ndarray:
    root = np.sqrt(np.asarray(counts, dtype=np.float64))
    return (0.2071 + 1.9102 / root) / (1.2071 + 0.9102 / root)


def frc(a: np.ndarray, b: np.ndarray, hann: bool = False) -> FrcCurve:
    """Correlate the spectra of ``a`` and ``b`` over rings one frequency bin wide.

    Rings are indexed by ``round(|f| / df)`` with ``df = 1 / min(H, W)`` and
    kept up to the Nyquist frequency. No mean is subtracted.
    """
    a = as_image(a, "frc input")
    b = as_image(b, "frc input")
    if a.shape != b.shape:
        raise ShapeError("frc", "image", a.shape, b.shape)
    height, width = a.shape
    if hann:
        window = np.outer(np.hanning(height), np.hanning(width))
        a, b = a * window, b * window

    fa = np.fft.fft2(a)
    fb = np.fft.fft2(b)
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.fftfreq(width)[None, :]
    step = 1.0 / min(height, width)
    rings = np.rint(np.sqrt(fy ** 2 + fx ** 2) / step).astype(np.int64)
    n_rings = min(height, width) // 2 + 1
    inside = rings < n_rings
    index = rings[inside]

    cross = np.bincount(index, (fa * np.conj(fb)).real[inside], minlength=n_rings)
    power_a = np.bincount(index, (np.abs(fa) ** 2)[inside], minlength=n_rings)
    power_b = np.bincount(index, (np.abs(fb) ** 2)[inside], minlength=n_rings)
    counts = np.bincount(index, minlength=n_rings)

    denominator = np.sqrt(power_a * power_b)
    with np.errstate(divide="ignore", invalid="ignore"):
        correlation = np.where(denominator > 0, cross / denominator, 0.0)
    correlation = np.clip(correlation, -1.0, 1.0)
    return FrcCurve(
        frequencies=np.arange(n_rings) * step,
        correlation=correlation,
        counts=counts,
        threshold=half_bit_threshold(np.maximum(counts, 1)),
    )


def cutoff_frequency(curve: FrcCurve) -> float:
    """First crossing of the half-bit curve at or after ring 1; ``nan`` when it never crosses."""
    d = curve.correlation - curve.threshold
    for r in range(1, d.size):
        if d[r] < 0:
            if r == 1:
                return float(curve.frequencies[r])
            f0, f1 = curve.frequencies[r - 1], curve.frequencies[r]
            return float(f0 + d[r - 1] / (d[r - 1] - d[r]) * (f1 - f0))
    return float("nan")


def resolution_from_frc(curve: FrcCurve) -> float:
    """Resolution ``1 / f_c`` in pixels; 2 px when the curve never crosses."""
    fc = cutoff_frequency(curve)
    if np.isnan(fc) or fc <= 0:
        return NYQUIST_RESOLUTION
    return float(1.0 / fc)
