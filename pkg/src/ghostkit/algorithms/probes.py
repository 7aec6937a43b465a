"""Monte-Carlo probes of the self-supervised loss.

For a fixed network output ``z`` and target realizations ``i`` with clean
buckets ``b_i``, the expected cross-split loss splits into the supervised
error plus the noise variance:
``E||W_i z - y_i||^2 = ||W_i z - b_i||^2 + E||eps_i||^2``. Under the
Poisson model ``E||eps_i||^2 = sum(b_i) / C``.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, Optional, Sequence, Union

import numpy as np

from ghostkit.acquisition.masks import MaskSet, as_image
from ghostkit.acquisition.noise import NoiseModel
from ghostkit.acquisition.rng import RandomStream
from ghostkit.algorithms.engines import (
    Buckets,
    cross_split_weights,
    gidc_reconstruct,
    holdout_realizations,
    n2g_reconstruct,
)
from ghostkit.algorithms.training import TrainConfig
from ghostkit.errors import ConfigError
from ghostkit.models.config import ModelConfig
from ghostkit.solvers.linear import SubDataset, make_partition_plan

logger = logging.getLogger(__name__)


@dataclass
class LossDecomposition:
    empirical_loss: float  # Monte-Carlo mean of ||W_i z - y_i||^2
    standard_error: float
    supervised_loss: float  # ||W_i z - b_i||^2
    noise_variance: float  # E||eps_i||^2
    repeats: int

    @property
    def predicted_loss(self) -> float:
        return self.supervised_loss + self.noise_variance

    @property
    def deviation(self) -> float:
        """Empirical minus predicted loss in standard errors (0 when both agree exactly)."""
        gap = self.empirical_loss - self.predicted_loss
        if self.standard_error == 0:
            return 0.0 if math.isclose(gap, 0.0, abs_tol=1e-9 * max(1.0, self.predicted_loss)) else math.inf
        return gap / self.standard_error

    def holds(self, sigmas: float = 3.0) -> bool:
        return abs(self.deviation) <= sigmas


def loss_decomposition_probe(
    output: np.ndarray,
    targets: Sequence[SubDataset],
    noise: NoiseModel,
    repeats: int = 10_000,
    stream: str = "loss-probe",
) -> LossDecomposition:
    """Draw ``repeats`` noisy bucket sets for ``targets`` and compare both sides.

    The targets must carry their clean buckets.
    """
    z = as_image(output, "output").reshape(-1)
    if repeats < 2:
        raise ConfigError(f"need at least 2 repeats, got {repeats}")
    if not targets:
        raise ConfigError("no target splits given")
    masks = np.concatenate([t.masks.matrix for t in targets])
    if masks.shape[1] != z.size:
        raise ConfigError(f"output has {z.size} pixels, masks have {masks.shape[1]}")
    clean_parts = []
    for t in targets:
        if t.buckets.clean is None:
            raise ConfigError("loss probe needs clean buckets on every target split")
        clean_parts.append(t.buckets.clean)
    b = np.concatenate(clean_parts)
    predicted = masks @ z

    supervised = float(np.sum((predicted - b) ** 2))
    if noise.noiseless:
        return LossDecomposition(supervised, 0.0, supervised, 0.0, repeats)

    counts = RandomStream(noise.seed, stream).poisson(np.tile(noise.C * b, (repeats, 1)))
    y = counts / noise.C
    losses = np.sum((predicted[None, :] - y) ** 2, axis=1)
    return LossDecomposition(
        empirical_loss=float(losses.mean()),
        standard_error=float(losses.std(ddof=1) / math.sqrt(repeats)),
        supervised_loss=supervised,
        noise_variance=float(b.sum() / noise.C),
        repeats=repeats,
    )


def estimate_noise_floor(
    y: np.ndarray, C: float, weights: Optional[Union[np.ndarray, float]] = None
) -> float:
    """Expected ``0.5 * sum(w * eps^2)`` from the measured buckets, using ``var(y_m) ~ y_m / C``.

    ``weights`` counts how often each bucket enters a loss (``[rows, M]``
    matrices are summed over rows).
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if not C > 0:
        raise ConfigError(f"C must be positive, got {C}")
    if math.isinf(C):
        return 0.0
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.ndim == 2:
        w = w.sum(axis=0)
    return float(0.5 * np.sum(np.broadcast_to(w, y.shape) * np.maximum(y, 0.0)) / C)


@dataclass
class OverfittingContrast:
    """Final data loss of GIDC and N2G next to the noise floor of each loss."""
    gidc_loss: float
    gidc_floor: float
    n2g_loss: float
    n2g_floor: float
    epochs: int

    @property
    def gidc_ratio(self) -> float:
        return self.gidc_loss / self.gidc_floor if self.gidc_floor > 0 else math.inf

    @property
    def n2g_ratio(self) -> float:
        return self.n2g_loss / self.n2g_floor if self.n2g_floor > 0 else math.inf

    def to_dict(self) -> Dict[str, float]:
        return {
            "epochs": self.epochs,
            "gidc_loss": self.gidc_loss,
            "gidc_floor": self.gidc_floor,
            "gidc_ratio": self.gidc_ratio,
            "n2g_loss": self.n2g_loss,
            "n2g_floor": self.n2g_floor,
            "n2g_ratio": self.n2g_ratio,
        }


def overfitting_contrast(
    W: MaskSet,
    y: Buckets,
    C: float,
    model_config: Optional[ModelConfig] = None,
    train_config: Optional[TrainConfig] = None,
) -> OverfittingContrast:
    """Train GIDC and N2G without TV on one acquisition; compare each final data loss to its floor.

    GIDC fits its own buckets, so it can drive the loss below the noise
    floor. N2G only sees the buckets of the other splits, whose noise is
    independent of its input; its floor counts every bucket once per
    sub-reconstruction that targets it.
    """
    if math.isinf(C):
        raise ConfigError("the overfitting contrast needs noisy buckets (finite C)")
    train_config = replace(train_config or TrainConfig(), lam=0.0)
    gidc = gidc_reconstruct(W, y, model_config, train_config)
    n2g = n2g_reconstruct(W, y, model_config, train_config)
    assert gidc.trace is not None and n2g.trace is not None

    holdout = holdout_realizations(W, y, train_config.cv_fraction, train_config.seed)
    M = holdout.train_masks.M
    plan = make_partition_plan(M, train_config.K, train_config.P, train_config.seed)
    train_values = holdout.train_buckets.values
    contrast = OverfittingContrast(
        gidc_loss=gidc.trace.data_loss[-1],
        gidc_floor=estimate_noise_floor(train_values, C),
        n2g_loss=n2g.trace.data_loss[-1],
        n2g_floor=estimate_noise_floor(train_values, C, cross_split_weights(plan, M)),
        epochs=gidc.trace.epochs,
    )
    logger.info(
        "overfitting contrast after %d epochs: gidc %.3f x floor, n2g %.3f x floor",
        contrast.epochs, contrast.gidc_ratio, contrast.n2g_ratio,
    )
    return contrast
