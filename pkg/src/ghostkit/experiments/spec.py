"""Experiment description shared by the sweep, dose and gridsearch studies."""

import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from ghostkit.acquisition.masks import AcquisitionSet, as_image, forward_project, generate_masks
from ghostkit.acquisition.noise import NoiseModel, apply_poisson
from ghostkit.acquisition.phantoms import PhantomKind, generate_phantom
from ghostkit.algorithms.engines import Method, default_model_config
from ghostkit.algorithms.training import TrainConfig
from ghostkit.errors import ConfigError
from ghostkit.models.config import ModelConfig
from ghostkit.solvers.variational import VariationalConfig


@dataclass(frozen=True)
class MethodSettings:
    """Per-method configuration; ``lam`` overrides the shared TV weight."""
    method: Method
    lam: Optional[float] = None
    model: Optional[ModelConfig] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", Method(self.method))
        if self.lam is not None and self.lam < 0:
            raise ConfigError(f"{self.method.value}: lambda must be non-negative, got {self.lam}")


@dataclass(frozen=True)
class ExperimentSpec:
    """Phantom, acquisition and methods of one study.

    Repeat ``r`` draws its masks and noise from ``seed + r``, so every
    photon level of a sweep sees the same mask sets.
    """
    phantom: str = PhantomKind.BLOBS.value  # phantom kind or an image path
    height: int = 64
    width: int = 64
    M: int = 410
    photons: Tuple[float, ...] = (100.0,)
    methods: Tuple[MethodSettings, ...] = (MethodSettings(Method.LS),)
    repeats: int = 1
    seed: int = 0
    output_dir: Path = Path("results")
    train: TrainConfig = field(default_factory=TrainConfig)
    variational: VariationalConfig = field(default_factory=VariationalConfig)

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1 or self.M < 1:
            raise ConfigError(f"dimensions must be positive, got M={self.M}, {self.height}x{self.width}")
        if not self.photons:
            raise ConfigError("photon list is empty")
        if any(not c > 0 for c in self.photons):
            raise ConfigError("photon counts must be positive")
        if not self.methods:
            raise ConfigError("method list is empty")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be at least 1, got {self.repeats}")
        object.__setattr__(self, "photons", tuple(float(c) for c in self.photons))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "output_dir", Path(self.output_dir))

    @classmethod
    def from_methods(cls, methods: Sequence[Union[Method, str]], **kwargs: Any) -> "ExperimentSpec":
        return cls(methods=tuple(MethodSettings(Method(m)) for m in methods), **kwargs)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    def load_phantom(self) -> np.ndarray:
        """Synthetic phantom of the requested kind, or an image file resized by cropping."""
        if self.phantom in {k.value for k in PhantomKind}:
            return generate_phantom(self.phantom, self.height, self.width, self.seed)
        from ghostkit.io.images import load_phantom_image

        image = load_phantom_image(self.phantom)
        if image.shape[0] < self.height or image.shape[1] < self.width:
            raise ConfigError(f"phantom image {image.shape} is smaller than {self.shape}")
        top = (image.shape[0] - self.height) // 2
        left = (image.shape[1] - self.width) // 2
        return as_image(image[top:top + self.height, left:left + self.width], "phantom")

    def acquire(self, phantom: np.ndarray, photons: float, repeat: int = 0) -> AcquisitionSet:
        """Masks, clean buckets and Poisson buckets of one realization set."""
        seed = self.seed + repeat
        masks = generate_masks(self.M, self.height, self.width, seed)
        clean = forward_project(masks, phantom)
        noisy = apply_poisson(clean, NoiseModel(photons, seed))
        return AcquisitionSet(
            masks,
            noisy,
            phantom,
            metadata={
                "phantom": self.phantom,
                "height": self.height,
                "width": self.width,
                "M": self.M,
                "photons": "inf" if math.isinf(photons) else photons,
                "seed": seed,
            },
        )

    def configs(self, settings: MethodSettings, repeat: int = 0) -> Tuple[ModelConfig, TrainConfig, VariationalConfig]:
        """Model, training and TV configs of one method for repeat ``repeat``."""
        return resolve_configs(settings, self.train, self.variational, repeat)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "phantom": self.phantom,
            "height": self.height,
            "width": self.width,
            "M": self.M,
            "photons": list(self.photons),
            "methods": [asdict(m) for m in self.methods],
            "repeats": self.repeats,
            "seed": self.seed,
            "output_dir": str(self.output_dir),
            "train": self.train.to_dict(),
            "variational": asdict(self.variational),
        }


def resolve_configs(
    settings: MethodSettings,
    train: TrainConfig,
    variational: VariationalConfig,
    repeat: int = 0,
) -> Tuple[ModelConfig, TrainConfig, VariationalConfig]:
    """Specialize shared configs to one method; repeat ``r`` offsets the training and model seeds."""
    method = settings.method
    model = default_model_config(method, settings.model)
    model = model.with_seed(model.seed + repeat)
    train = replace(train.resolved(model.kind), seed=train.seed + repeat)
    if settings.lam is not None:
        train = train.with_lam(settings.lam)
        variational = replace(variational, lam=settings.lam)
    return model, train, variational
