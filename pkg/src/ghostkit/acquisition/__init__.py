"""Phantoms, illumination masks and simulated photon-limited measurements."""

from ghostkit.acquisition.masks import (
    AcquisitionSet,
    BucketVector,
    MaskSet,
    as_image,
    forward_project,
    generate_masks,
)
from ghostkit.acquisition.noise import (
    NoiseModel,
    apply_poisson,
    noise_fluctuation_ratio,
    pencil_beam_scan,
)
from ghostkit.acquisition.phantoms import PhantomKind, generate_phantom
from ghostkit.acquisition.rng import RandomStream

__all__ = [
    "AcquisitionSet",
    "BucketVector",
    "MaskSet",
    "NoiseModel",
    "PhantomKind",
    "RandomStream",
    "apply_poisson",
    "as_image",
    "forward_project",
    "generate_masks",
    "generate_phantom",
    "noise_fluctuation_ratio",
    "pencil_beam_scan",
]
