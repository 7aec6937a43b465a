"""ghostkit: simulation and reconstruction of photon-limited ghost imaging."""

__version__ = "0.1.0"
__author__ = "ghostkit developers"

# Import main components
from ghostkit.acquisition import AcquisitionSet, MaskSet, NoiseModel, generate_masks, generate_phantom
from ghostkit.algorithms import Method, ReconReport, TrainConfig, reconstruct
from ghostkit.models import ModelConfig, ModelKind, build_model
from ghostkit.scoring import QualityScorer

__all__ = [
    "AcquisitionSet",
    "MaskSet",
    "Method",
    "ModelConfig",
    "ModelKind",
    "NoiseModel",
    "QualityScorer",
    "ReconReport",
    "TrainConfig",
    "build_model",
    "generate_masks",
    "generate_phantom",
    "reconstruct",
]
