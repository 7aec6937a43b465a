"""Model configuration, parameter construction and dispatch."""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ghostkit.acquisition.rng import RandomStream
from ghostkit.errors import ConfigError, ShapeError
from ghostkit.tensor.tape import DiffTensor, default_dtype


class ModelKind(str, Enum):
    """Network families."""
    UNET = "unet"
    DNCNN = "dncnn"
    INR = "inr"

    @property
    def convolutional(self) -> bool:
        return self is not ModelKind.INR


class Init(str, Enum):
    """Parameter initialization schemes."""
    HE_UNIFORM = "he_uniform"
    SINE_FIRST = "sine_first"
    SINE = "sine"
    ZEROS = "zeros"


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters for every model kind.

    Only the fields of the selected ``kind`` are used.
    """
    kind: ModelKind = ModelKind.UNET
    in_channels: int = 1
    out_channels: int = 1
    # U-Net
    features: int = 20
    levels: int = 3  # resolution scales, so levels - 1 pooling steps
    # DnCNN
    depth: int = 8
    dncnn_features: int = 48
    # INR
    hidden_layers: int = 3
    width: int = 512
    embeddings: int = 256
    frequency_scale: float = 10.0
    omega0: float = 30.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ModelKind(self.kind))
        sizes = {
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "features": self.features,
            "levels": self.levels,
            "dncnn_features": self.dncnn_features,
            "hidden_layers": self.hidden_layers,
            "width": self.width,
            "embeddings": self.embeddings,
        }
        for name, value in sizes.items():
            if value < 1:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.depth < 2:
            raise ConfigError(f"dncnn depth must be at least 2, got {self.depth}")
        if self.kind is ModelKind.DNCNN and self.in_channels != self.out_channels:
            raise ConfigError("residual DnCNN needs in_channels == out_channels")
        if self.frequency_scale <= 0 or self.omega0 <= 0:
            raise ConfigError("frequency_scale and omega0 must be positive")

    def with_seed(self, seed: int) -> "ModelConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class ParamSpec:
    name: str
    shape: Tuple[int, ...]
    init: Init
    fan_in: int


def conv_specs(name: str, c_out: int, c_in: int, k: int = 3) -> List[ParamSpec]:
    fan_in = c_in * k * k
    return [
        ParamSpec(f"{name}.weight", (c_out, c_in, k, k), Init.HE_UNIFORM, fan_in),
        ParamSpec(f"{name}.bias", (c_out,), Init.ZEROS, fan_in),
    ]


def dense_specs(name: str, n_out: int, n_in: int, init: Init = Init.HE_UNIFORM) -> List[ParamSpec]:
    bias_init = Init.ZEROS if init is Init.HE_UNIFORM else init
    return [
        ParamSpec(f"{name}.weight", (n_out, n_in), init, n_in),
        ParamSpec(f"{name}.bias", (n_out,), bias_init, n_in),
    ]


def _initialize(spec: ParamSpec, stream: RandomStream, omega0: float) -> np.ndarray:
    size = int(np.prod(spec.shape))
    if spec.init is Init.ZEROS:
        return np.zeros(spec.shape, dtype=np.float64)
    if spec.init is Init.HE_UNIFORM:
        bound = math.sqrt(6.0 / spec.fan_in)
    elif spec.init is Init.SINE_FIRST:
        bound = 1.0 / spec.fan_in
    else:
        bound = math.sqrt(6.0 / spec.fan_in) / omega0
    return ((2.0 * stream.uniform(size) - 1.0) * bound).reshape(spec.shape)


@dataclass
class Model:
    """A built network: config, ordered parameters and fixed buffers."""
    config: ModelConfig
    names: List[str]
    parameters: List[np.ndarray]
    buffers: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.parameters))

    def with_parameters(self, parameters: Sequence[np.ndarray]) -> "Model":
        if len(parameters) != len(self.parameters):
            raise ConfigError(f"expected {len(self.parameters)} parameter arrays, got {len(parameters)}")
        for name, old, new in zip(self.names, self.parameters, parameters):
            if old.shape != np.shape(new):
                raise ShapeError("with_parameters", name, old.shape, np.shape(new))
        return Model(self.config, list(self.names), [np.array(p, copy=True) for p in parameters], self.buffers)

    def bind(self, tensors: Sequence[DiffTensor]) -> Dict[str, DiffTensor]:
        """Map parameter names to the tensors standing in for them."""
        if len(tensors) != len(self.names):
            raise ConfigError(f"expected {len(self.names)} parameter tensors, got {len(tensors)}")
        return dict(zip(self.names, tensors))

    def constants(self) -> List[DiffTensor]:
        return [DiffTensor(p.astype(default_dtype())) for p in self.parameters]

    def apply(self, params: Sequence[DiffTensor], x: DiffTensor) -> DiffTensor:
        """Differentiable forward pass with explicit parameter tensors."""
        from ghostkit.models import dncnn, inr, unet

        bound = self.bind(params)
        if self.config.kind is ModelKind.UNET:
            return unet.unet_apply(self.config, bound, x)
        if self.config.kind is ModelKind.DNCNN:
            return dncnn.dncnn_apply(self.config, bound, x)
        return inr.inr_apply(self.config, bound, self.buffers, x)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Inference on plain arrays with the stored parameters."""
        return self.apply(self.constants(), DiffTensor(np.asarray(x, dtype=default_dtype()))).numpy()


def parameter_specs(config: ModelConfig) -> List[ParamSpec]:
    from ghostkit.models import dncnn, inr, unet

    if config.kind is ModelKind.UNET:
        return unet.unet_specs(config)
    if config.kind is ModelKind.DNCNN:
        return dncnn.dncnn_specs(config)
    return inr.inr_specs(config)


def analytic_parameter_count(config: ModelConfig) -> int:
    return int(sum(np.prod(spec.shape) for spec in parameter_specs(config)))


def build_model(config: ModelConfig) -> Model:
    """Initialize parameters (and INR frequencies) deterministically from ``config.seed``."""
    specs = parameter_specs(config)
    stream = RandomStream(config.seed, f"model-{config.kind.value}")
    parameters = [_initialize(spec, stream, config.omega0).astype(default_dtype()) for spec in specs]
    buffers: Dict[str, np.ndarray] = {}
    if config.kind is ModelKind.INR:
        frequencies = RandomStream(config.seed, "fourier-features").normal(2 * config.embeddings)
        buffers["fourier"] = (config.frequency_scale * frequencies).reshape(config.embeddings, 2)
    return Model(config, [spec.name for spec in specs], parameters, buffers)


def activation_bytes(config: ModelConfig, batch: int, height: int, width: int) -> int:
    """Rough size of the activations kept on the tape for one forward pass."""
    pixels = batch * height * width
    itemsize = np.dtype(default_dtype()).itemsize
    if config.kind is ModelKind.UNET:
        floats = 0
        for level in range(config.levels):
            # conv, activation and skip buffers per scale, encoder and decoder
            floats += 8 * config.features * (2 ** level) * pixels // (4 ** level)
    elif config.kind is ModelKind.DNCNN:
        floats = 2 * config.depth * config.dncnn_features * pixels
    else:
        floats = 2 * (config.hidden_layers + 1) * config.width * pixels + 2 * config.embeddings * pixels
    return int(floats * itemsize)
