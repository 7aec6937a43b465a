"""Illumination masks, bucket vectors and the ghost-imaging forward model."""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence

import numpy as np

from ghostkit.acquisition.rng import RandomStream
from ghostkit.errors import ComputationError, ConfigError, ShapeError


def as_image(x: Any, name: str = "image") -> np.ndarray:
    """Validate a 2D finite intensity grid and return it as float64."""
    image = np.asarray(x, dtype=np.float64)
    if image.ndim != 2:
        raise ShapeError(name, "rank", 2, image.ndim)
    if image.size == 0:
        raise ConfigError(f"{name} has zero size {image.shape}")
    if not np.all(np.isfinite(image)):
        raise ConfigError(f"{name} contains non-finite values")
    return image


@dataclass
class MaskSet:
    """Stack of ``M`` illumination patterns; each flattened mask is a row of W."""
    masks: np.ndarray  # [M, height, width], values in [0, 1]

    def __post_init__(self) -> None:
        masks = np.asarray(self.masks, dtype=np.float64)
        if masks.ndim != 3:
            raise ShapeError("MaskSet", "rank", 3, masks.ndim)
        if 0 in masks.shape:
            raise ConfigError(f"mask set has zero dimension {masks.shape}")
        self.masks = masks

    @property
    def M(self) -> int:
        return int(self.masks.shape[0])

    @property
    def height(self) -> int:
        return int(self.masks.shape[1])

    @property
    def width(self) -> int:
        return int(self.masks.shape[2])

    @property
    def shape(self) -> tuple:
        return (self.height, self.width)

    @property
    def matrix(self) -> np.ndarray:
        """The ``[M, N]`` acquisition matrix (a view)."""
        return self.masks.reshape(self.M, -1)

    def subset(self, indices: Sequence[int]) -> "MaskSet":
        return MaskSet(self.masks[np.asarray(indices, dtype=np.int64)])


@dataclass
class BucketVector:
    """Measured bucket values with the optional clean counterpart ``b = W x*``."""
    values: np.ndarray
    clean: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.clean is not None:
            self.clean = np.asarray(self.clean, dtype=np.float64).reshape(-1)
            if self.clean.shape != self.values.shape:
                raise ShapeError("BucketVector", "M", self.values.size, self.clean.size)

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def noise(self) -> Optional[np.ndarray]:
        """``y - b`` when the clean buckets are known."""
        return None if self.clean is None else self.values - self.clean

    def subset(self, indices: Sequence[int]) -> "BucketVector":
        idx = np.asarray(indices, dtype=np.int64)
        return BucketVector(self.values[idx], None if self.clean is None else self.clean[idx])


@dataclass
class AcquisitionSet:
    """Masks plus buckets, optionally with the phantom that produced them."""
    masks: MaskSet
    buckets: BucketVector
    phantom: Optional[np.ndarray] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.buckets) != self.masks.M:
            raise ShapeError("AcquisitionSet", "M", self.masks.M, len(self.buckets))
        if self.phantom is not None:
            self.phantom = as_image(self.phantom, "phantom")
            if self.phantom.shape != self.masks.shape:
                raise ShapeError("AcquisitionSet", "image", self.masks.shape, self.phantom.shape)

    @property
    def W(self) -> np.ndarray:
        return self.masks.matrix

    @property
    def y(self) -> np.ndarray:
        return self.buckets.values

    @property
    def compression(self) -> float:
        """Pixels per realization."""
        return self.masks.height * self.masks.width / self.masks.M


def generate_masks(M: int, height: int, width: int, seed: int) -> MaskSet:
    """Half-Gaussian masks ``|z|`` normalized by the global maximum of the set."""
    if M < 1 or height < 1 or width < 1:
        raise ConfigError(f"mask dimensions must be positive, got M={M}, {height}x{width}")
    stream = RandomStream(seed, "masks")
    values = np.abs(stream.normal(M * height * width)).reshape(M, height, width)
    peak = values.max()
    if peak <= 0:
        raise ComputationError("generated masks are identically zero")
    values /= peak
    if np.any(values.reshape(M, -1).max(axis=1) <= 0):
        raise ComputationError("generated an all-zero mask")
    return MaskSet(values)


def forward_project(W: MaskSet, x: Any) -> BucketVector:
    """Clean buckets ``b_m = sum_n w_mn x_n`` accumulated in 64-bit."""
    image = as_image(x)
    if image.shape[0] != W.height:
        raise ShapeError("forward_project", "height", W.height, image.shape[0])
    if image.shape[1] != W.width:
        raise ShapeError("forward_project", "width", W.width, image.shape[1])
    b = W.matrix @ image.reshape(-1)
    return BucketVector(b, clean=b.copy())
