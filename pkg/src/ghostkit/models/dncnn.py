"""Residual DnCNN chain: the network predicts the noise and subtracts it."""

from typing import Dict, List

import numpy as np

from ghostkit.errors import ConfigError
from ghostkit.models.config import Model, ModelConfig, ModelKind, ParamSpec, conv_specs
from ghostkit.tensor import ops
from ghostkit.tensor.tape import DiffTensor, default_dtype


def dncnn_specs(config: ModelConfig) -> List[ParamSpec]:
    f = config.dncnn_features
    specs = conv_specs("layer0", f, config.in_channels)
    for index in range(1, config.depth - 1):
        specs += conv_specs(f"layer{index}", f, f)
    specs += conv_specs(f"layer{config.depth - 1}", config.out_channels, f)
    return specs


def dncnn_apply(config: ModelConfig, params: Dict[str, DiffTensor], x: DiffTensor) -> DiffTensor:
    def conv(index: int, h: DiffTensor) -> DiffTensor:
        return ops.conv2d(h, params[f"layer{index}.weight"], params[f"layer{index}.bias"])

    h = ops.relu(conv(0, x))
    for index in range(1, config.depth - 1):
        h = ops.leaky_relu(conv(index, h), 0.2)
    return ops.sub(x, conv(config.depth - 1, h))


def dncnn_forward(model: Model, image: np.ndarray) -> np.ndarray:
    if model.config.kind is not ModelKind.DNCNN:
        raise ConfigError(f"expected a dncnn model, got {model.config.kind.value}")
    image = np.asarray(image, dtype=default_dtype())
    return model.apply(model.constants(), DiffTensor(image[None, None])).numpy()[0, 0]
