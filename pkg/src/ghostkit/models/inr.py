"""Implicit neural representation: Fourier features followed by sine layers.

A pixel coordinate ``v`` in ``[-1, 1]^2`` is embedded as
``[sin(2 pi B v), cos(2 pi B v)]`` with a fixed Gaussian frequency matrix
``B``, then passed through ``hidden_layers`` layers ``sin(omega0 (W h + b))``
and a final linear layer producing the intensity.
"""

from typing import Dict, List

import numpy as np

from ghostkit.errors import ConfigError, ShapeError
from ghostkit.models.config import Init, Model, ModelConfig, ModelKind, ParamSpec, dense_specs
from ghostkit.tensor import ops
from ghostkit.tensor.tape import DiffTensor, default_dtype


def inr_specs(config: ModelConfig) -> List[ParamSpec]:
    specs = dense_specs("sine0", config.width, 2 * config.embeddings, Init.SINE_FIRST)
    for index in range(1, config.hidden_layers):
        specs += dense_specs(f"sine{index}", config.width, config.width, Init.SINE)
    specs += dense_specs("output", config.out_channels, config.width, Init.SINE)
    return specs


def coordinate_grid(height: int, width: int) -> np.ndarray:
    """Pixel-centre coordinates in ``[-1, 1]^2``, shape ``[height, width, 2]`` (row, column)."""
    rows = np.linspace(-1.0, 1.0, height) if height > 1 else np.zeros(1)
    cols = np.linspace(-1.0, 1.0, width) if width > 1 else np.zeros(1)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return np.stack([rr, cc], axis=-1)


def fourier_features(frequencies: np.ndarray, grid: np.ndarray) -> np.ndarray:
    projected = 2.0 * np.pi * grid @ frequencies.T
    return np.concatenate([np.sin(projected), np.cos(projected)], axis=1)


def inr_apply(
    config: ModelConfig,
    params: Dict[str, DiffTensor],
    buffers: Dict[str, np.ndarray],
    grid: DiffTensor,
) -> DiffTensor:
    """Evaluate the network on ``[P, 2]`` coordinates; returns ``[P, out_channels]``."""
    if grid.ndim != 2 or grid.shape[1] != 2:
        raise ShapeError("inr_apply", "coordinates", 2, grid.shape[-1])
    embedded = fourier_features(buffers["fourier"], grid.values.astype(np.float64))
    h = DiffTensor(embedded.astype(default_dtype()))
    for index in range(config.hidden_layers):
        h = ops.dense(h, params[f"sine{index}.weight"], params[f"sine{index}.bias"])
        h = ops.sin(ops.scale(h, config.omega0))
    return ops.dense(h, params["output.weight"], params["output.bias"])


def inr_forward(model: Model, grid: np.ndarray) -> np.ndarray:
    """Render the represented image at every point of a ``[height, width, 2]`` coordinate grid."""
    if model.config.kind is not ModelKind.INR:
        raise ConfigError(f"expected an inr model, got {model.config.kind.value}")
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 3 or grid.shape[-1] != 2:
        raise ShapeError("inr_forward", "coordinates", 2, grid.shape[-1] if grid.ndim else 0)
    points = DiffTensor(grid.reshape(-1, 2).astype(default_dtype()))
    return model.apply(model.constants(), points).numpy()[:, 0].reshape(grid.shape[:2])
