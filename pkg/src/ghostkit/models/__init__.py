"""Networks built on the autodiff core: U-Net, DnCNN and a sine-activated INR."""

from ghostkit.models.config import (
    Model,
    ModelConfig,
    ModelKind,
    activation_bytes,
    analytic_parameter_count,
    build_model,
)
from ghostkit.models.dncnn import dncnn_forward
from ghostkit.models.inr import coordinate_grid, inr_forward
from ghostkit.models.unet import unet_forward

__all__ = [
    "Model",
    "ModelConfig",
    "ModelKind",
    "activation_bytes",
    "analytic_parameter_count",
    "build_model",
    "coordinate_grid",
    "dncnn_forward",
    "inr_forward",
    "unet_forward",
]
