"""Adam training loop with cross-validation checkpoints and early stopping."""

import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from ghostkit.errors import ComputationError, ConfigError
from ghostkit.models.config import Model, ModelKind
from ghostkit.solvers.linear import CglsConfig
from ghostkit.tensor.optim import AdamState, adam_step
from ghostkit.tensor.ops import DEFAULT_TV_EPS
from ghostkit.tensor.tape import DiffTensor, Tape

logger = logging.getLogger(__name__)

CNN_EPOCHS = 5000
INR_EPOCHS = 7000


@dataclass(frozen=True)
class TrainConfig:
    """Configuration shared by the learned reconstruction engines."""
    epochs: Optional[int] = None  # None: the default of the model kind
    lr: float = 3e-4
    weight_decay: float = 1e-2
    lam: float = 1e-5  # TV weight, applied once per network output
    K: int = 4  # splits (N2G / N2I)
    P: int = 1  # permutations (N2G / N2I)
    cv_fraction: float = 0.1
    cv_repeats: int = 3
    seed: int = 0
    checkpoint_every: int = 50
    log_every: int = 100
    tv_eps: float = DEFAULT_TV_EPS
    memory_budget_bytes: int = 4 * 1024 ** 3
    timeout_seconds: Optional[float] = None
    cgls: CglsConfig = field(default_factory=CglsConfig)

    def __post_init__(self) -> None:
        if self.epochs is not None and self.epochs < 0:
            raise ConfigError(f"epochs must be non-negative, got {self.epochs}")
        if not 0.0 < self.cv_fraction < 0.5:
            raise ConfigError(f"cv_fraction must lie in (0, 0.5), got {self.cv_fraction}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be non-negative, got {self.lam}")
        if self.K < 1 or self.P < 1:
            raise ConfigError(f"K and P must be positive, got K={self.K}, P={self.P}")
        if self.cv_repeats < 1:
            raise ConfigError(f"cv_repeats must be at least 1, got {self.cv_repeats}")
        if self.checkpoint_every < 1:
            raise ConfigError(f"checkpoint_every must be at least 1, got {self.checkpoint_every}")

    @classmethod
    def for_model(cls, kind: ModelKind, **overrides: Any) -> "TrainConfig":
        """Defaults for a model kind: 5000 epochs for CNNs, 7000 for INRs."""
        return cls(**overrides).resolved(kind)

    def resolved(self, kind: ModelKind) -> "TrainConfig":
        """Fill an unset epoch count with the default of ``kind``."""
        if self.epochs is not None:
            return self
        return replace(self, epochs=INR_EPOCHS if ModelKind(kind) is ModelKind.INR else CNN_EPOCHS)

    def with_lam(self, lam: float) -> "TrainConfig":
        return replace(self, lam=lam)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class StepOutput:
    """What an objective returns for one set of parameters."""
    loss: DiffTensor  # scalar training loss on the tape
    data_loss: float  # data term alone (no regularizer)
    prediction: np.ndarray  # reconstruction implied by these parameters


Objective = Callable[[List[DiffTensor]], StepOutput]
CvLoss = Callable[[np.ndarray], float]


@dataclass
class TrainTrace:
    """Per-epoch losses; ``cv_loss`` is interpolated between checkpoints."""
    train_loss: List[float] = field(default_factory=list)
    data_loss: List[float] = field(default_factory=list)
    cv_loss: List[float] = field(default_factory=list)
    cv_checkpoints: List[int] = field(default_factory=list)
    cv_checkpoint_loss: List[float] = field(default_factory=list)
    best_epoch: int = 0
    best_cv_loss: float = float("inf")
    wall_time: float = 0.0
    convergence_reason: str = ""

    @property
    def epochs(self) -> int:
        return len(self.train_loss)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class TrainResult:
    model: Model  # parameters at the selected epoch
    prediction: np.ndarray
    trace: TrainTrace


def _is_checkpoint(epoch: int, config: TrainConfig) -> bool:
    return epoch == 0 or epoch % config.checkpoint_every == 0 or epoch == config.epochs - 1


class Trainer:
    """Runs Adam on an objective and keeps the parameters with the lowest CV loss."""

    def __init__(self, config: Optional[TrainConfig] = None):
        self.config = config or TrainConfig()

    def _evaluate(self, objective: Objective, params: List[np.ndarray]) -> StepOutput:
        return objective([DiffTensor(p) for p in params])

    def fit(self, model: Model, objective: Objective, cv_loss: CvLoss) -> TrainResult:
        config = self.config.resolved(model.config.kind)
        start_time = time.perf_counter()
        trace = TrainTrace()
        params = [p.copy() for p in model.parameters]
        state = AdamState.create(params, lr=config.lr, weight_decay=config.weight_decay)

        best_params = [p.copy() for p in params]
        best_prediction: Optional[np.ndarray] = None

        def checkpoint(epoch: int, prediction: np.ndarray) -> None:
            nonlocal best_params, best_prediction
            value = float(cv_loss(prediction))
            if not np.isfinite(value):
                raise ComputationError(f"non-finite cross-validation loss at epoch {epoch}", trace=trace)
            trace.cv_checkpoints.append(epoch)
            trace.cv_checkpoint_loss.append(value)
            if value < trace.best_cv_loss:
                trace.best_cv_loss = value
                trace.best_epoch = epoch
                best_params = [p.copy() for p in params]
                best_prediction = np.array(prediction, dtype=np.float64, copy=True)

        convergence_reason = "max_epochs"
        if config.epochs == 0:
            checkpoint(0, self._evaluate(objective, params).prediction)
            convergence_reason = "no_epochs"

        for epoch in range(config.epochs):
            if epoch > 0 and config.timeout_seconds and (time.perf_counter() - start_time) > config.timeout_seconds:
                convergence_reason = "timeout"
                break

            tape = Tape()
            variables = [tape.variable(p) for p in params]
            step = objective(variables)
            value = step.loss.item()
            if not np.isfinite(value):
                raise ComputationError(f"non-finite training loss at epoch {epoch}", trace=trace)
            trace.train_loss.append(value)
            trace.data_loss.append(float(step.data_loss))

            if _is_checkpoint(epoch, config):
                checkpoint(epoch, step.prediction)
            if config.log_every and epoch % config.log_every == 0:
                logger.debug("epoch %d: loss %.6e, data %.6e", epoch, value, step.data_loss)

            grads = tape.gradient(step.loss, variables)
            params, state = adam_step(params, grads, state)

        if trace.train_loss:
            epochs = np.arange(len(trace.train_loss))
            trace.cv_loss = np.interp(epochs, trace.cv_checkpoints, trace.cv_checkpoint_loss).tolist()
        trace.wall_time = time.perf_counter() - start_time
        trace.convergence_reason = convergence_reason
        logger.info(
            "selected epoch %d of %d (cv loss %.6e, %s)",
            trace.best_epoch, trace.epochs, trace.best_cv_loss, convergence_reason,
        )
        if best_prediction is None:
            raise ComputationError("training produced no cross-validation checkpoint", trace=trace)
        return TrainResult(model.with_parameters(best_params), best_prediction, trace)


def get_training_stats(trace: TrainTrace) -> Dict[str, Any]:
    """Summary numbers of a training run for reports and tables."""
    return {
        "epochs": trace.epochs,
        "best_epoch": trace.best_epoch,
        "best_cv_loss": trace.best_cv_loss,
        "final_train_loss": trace.train_loss[-1] if trace.train_loss else None,
        "min_train_loss": min(trace.train_loss) if trace.train_loss else None,
        "wall_time": trace.wall_time,
        "convergence_reason": trace.convergence_reason,
    }
