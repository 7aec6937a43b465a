"""Small U-Net: 3x3 convolutions, LeakyReLU(0.2), max pooling, nearest upsampling."""

from typing import Dict, List

import numpy as np

from ghostkit.errors import ConfigError
from ghostkit.models.config import Model, ModelConfig, ModelKind, ParamSpec, conv_specs
from ghostkit.tensor import ops
from ghostkit.tensor.tape import DiffTensor, default_dtype

SLOPE = 0.2


def _channels(config: ModelConfig, level: int) -> int:
    return config.features * 2 ** level


def unet_specs(config: ModelConfig) -> List[ParamSpec]:
    specs: List[ParamSpec] = []
    previous = config.in_channels
    for level in range(config.levels):
        ch = _channels(config, level)
        specs += conv_specs(f"enc{level}.conv1", ch, previous)
        specs += conv_specs(f"enc{level}.conv2", ch, ch)
        previous = ch
    for level in reversed(range(config.levels - 1)):
        ch = _channels(config, level)
        specs += conv_specs(f"dec{level}.up", ch, _channels(config, level + 1))
        specs += conv_specs(f"dec{level}.conv1", ch, 2 * ch)
        specs += conv_specs(f"dec{level}.conv2", ch, ch)
    specs += conv_specs("head", config.out_channels, config.features, k=1)
    return specs


def _conv(params: Dict[str, DiffTensor], name: str, x: DiffTensor, activate: bool = True) -> DiffTensor:
    y = ops.conv2d(x, params[f"{name}.weight"], params[f"{name}.bias"])
    return ops.leaky_relu(y, SLOPE) if activate else y


def unet_apply(config: ModelConfig, params: Dict[str, DiffTensor], x: DiffTensor) -> DiffTensor:
    """Forward pass on ``[C, H, W]`` or ``[B, C, H, W]`` input; output has the same spatial size."""
    skips: List[DiffTensor] = []
    h = x
    for level in range(config.levels):
        if level > 0:
            h = ops.maxpool2x2(h)
        h = _conv(params, f"enc{level}.conv1", h)
        h = _conv(params, f"enc{level}.conv2", h)
        skips.append(h)
    for level in reversed(range(config.levels - 1)):
        skip = skips[level]
        h = ops.upsample_nearest2x(h, size=skip.shape[-2:])
        h = _conv(params, f"dec{level}.up", h)
        h = ops.concat_channels(h, skip)
        h = _conv(params, f"dec{level}.conv1", h)
        h = _conv(params, f"dec{level}.conv2", h)
    return _conv(params, "head", h, activate=False)


def unet_forward(model: Model, image: np.ndarray) -> np.ndarray:
    """Run the U-Net on a single ``[H, W]`` image."""
    if model.config.kind is not ModelKind.UNET:
        raise ConfigError(f"expected a unet model, got {model.config.kind.value}")
    image = np.asarray(image, dtype=default_dtype())
    out = model.apply(model.constants(), DiffTensor(image[None, None]))
    return out.numpy()[0, 0]
