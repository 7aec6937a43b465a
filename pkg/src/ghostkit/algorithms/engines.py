"""Reconstruction engines: least squares, TV and the learned methods.

The learned engines share one protocol. A random ``cv_fraction`` of the
realizations is put aside; those realizations never enter network inputs
or training targets, and ``||W_cv x - y_cv||^2`` of the current
reconstruction drives early stopping. Network inputs are standardized to
zero mean and unit variance and the outputs are mapped back with the
inverse affine transform.
"""

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ghostkit.acquisition.masks import BucketVector, MaskSet
from ghostkit.acquisition.rng import RandomStream
from ghostkit.algorithms.training import StepOutput, Trainer, TrainConfig, TrainTrace, get_training_stats
from ghostkit.errors import ConfigError, MemoryBudgetError, ShapeError
from ghostkit.models.config import Model, ModelConfig, ModelKind, activation_bytes, build_model
from ghostkit.models.inr import coordinate_grid
from ghostkit.solvers.linear import (
    PartitionPlan,
    cgls_reconstruct,
    permuted_splits,
    sub_reconstruct_all,
)
from ghostkit.solvers.variational import VariationalConfig, tv_min_reconstruct
from ghostkit.tensor import ops
from ghostkit.tensor.tape import DiffTensor, default_dtype

logger = logging.getLogger(__name__)

Buckets = Union[BucketVector, np.ndarray]


class Method(str, Enum):
    """Reconstruction methods."""
    LS = "ls"
    TV = "tv"
    GIDC = "gidc"
    N2I = "n2i"
    N2G = "n2g"
    INR = "inr"

    @property
    def learned(self) -> bool:
        return self in (Method.GIDC, Method.N2I, Method.N2G, Method.INR)

    @property
    def regularized(self) -> bool:
        return self in (Method.TV, Method.GIDC, Method.N2G, Method.INR)


@dataclass
class ReconReport:
    """A reconstruction with everything needed to trace how it was produced."""
    method: Method
    image: np.ndarray
    config: Dict[str, Any] = field(default_factory=dict)
    seeds: Dict[str, int] = field(default_factory=dict)
    trace: Optional[TrainTrace] = None
    metrics: Dict[str, Any] = field(default_factory=dict)
    model: Optional[Model] = None

    def to_dict(self, timing: bool = True) -> Dict[str, Any]:
        """JSON-ready summary (the image itself is stored separately).

        ``timing=False`` drops the wall time so that reruns serialize identically.
        """
        training = get_training_stats(self.trace) if self.trace is not None else None
        if training is not None and not timing:
            training.pop("wall_time")
        return {
            "method": self.method.value,
            "shape": list(self.image.shape),
            "config": self.config,
            "seeds": self.seeds,
            "training": training,
            "metrics": self.metrics,
        }


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------

@dataclass
class CvHoldout:
    """Realizations split into a training part and a put-aside validation part."""
    train_masks: MaskSet
    train_buckets: BucketVector
    cv_masks: MaskSet
    cv_buckets: BucketVector
    cv_indices: np.ndarray

    def cv_loss(self, image: np.ndarray) -> float:
        residual = self.cv_masks.matrix @ np.asarray(image, dtype=np.float64).reshape(-1)
        residual -= self.cv_buckets.values
        return float(residual @ residual)


def as_buckets(W: MaskSet, y: Buckets) -> BucketVector:
    buckets = y if isinstance(y, BucketVector) else BucketVector(y)
    if len(buckets) != W.M:
        raise ShapeError("reconstruct", "M", W.M, len(buckets))
    if not np.all(np.isfinite(buckets.values)):
        raise ConfigError("buckets contain non-finite values")
    return buckets


def holdout_realizations(
    W: MaskSet, y: Buckets, cv_fraction: float, seed: int, repeat: int = 0
) -> CvHoldout:
    """Put aside ``round(cv_fraction * M)`` (at least one) random realizations."""
    buckets = as_buckets(W, y)
    n_cv = max(1, int(round(cv_fraction * W.M)))
    if n_cv >= W.M:
        raise ConfigError(f"cannot put aside {n_cv} of {W.M} realizations")
    order = RandomStream(seed, f"cv-split-{repeat}").permutation(W.M)
    cv_idx = np.sort(order[:n_cv])
    train_idx = np.sort(order[n_cv:])
    return CvHoldout(
        train_masks=W.subset(train_idx),
        train_buckets=buckets.subset(train_idx),
        cv_masks=W.subset(cv_idx),
        cv_buckets=buckets.subset(cv_idx),
        cv_indices=cv_idx,
    )


@dataclass(frozen=True)
class Normalization:
    """Affine map to zero mean and unit standard deviation."""
    mean: float
    std: float

    @classmethod
    def fit(cls, images: np.ndarray) -> "Normalization":
        std = float(np.std(images))
        return cls(float(np.mean(images)), std if std > 0 else 1.0)

    @classmethod
    def from_buckets(cls, W: MaskSet, y: BucketVector) -> "Normalization":
        """Mean intensity implied by the buckets, used as both offset and scale."""
        level = float(y.values.sum() / max(W.masks.sum(), np.finfo(np.float64).tiny))
        return cls(level, abs(level) if level != 0 else 1.0)

    def forward(self, images: np.ndarray) -> np.ndarray:
        return (images - self.mean) / self.std

    def inverse(self, outputs: DiffTensor) -> DiffTensor:
        return ops.shift(ops.scale(outputs, self.std), self.mean)


def check_memory_budget(config: ModelConfig, batch: int, shape: Tuple[int, int], budget: int) -> int:
    """Raise :class:`MemoryBudgetError` when the forward/backward activations do not fit."""
    # activations plus their gradients
    estimate = 2 * activation_bytes(config, batch, *shape)
    if estimate > budget:
        raise MemoryBudgetError(
            f"{batch} network inputs need about {estimate / 2 ** 20:.0f} MiB of activations, "
            f"budget is {budget / 2 ** 20:.0f} MiB; reduce K*P or the image size"
        )
    return estimate


def _add_tv(data: DiffTensor, images: DiffTensor, config: TrainConfig) -> DiffTensor:
    if config.lam == 0:
        return data
    return ops.add(data, ops.scale(ops.smoothed_tv_loss(images, config.tv_eps), config.lam))


def _require_kind(config: ModelConfig, method: Method) -> None:
    if method is Method.INR and config.kind is not ModelKind.INR:
        raise ConfigError("the inr method needs an inr model")
    if method is not Method.INR and not config.kind.convolutional:
        raise ConfigError(f"method {method.value} needs a convolutional model, got {config.kind.value}")


def _snapshot(method: Method, model_config: ModelConfig, train_config: TrainConfig, **extra: Any) -> Dict[str, Any]:
    model = asdict(model_config)
    model["kind"] = model_config.kind.value
    return {"method": method.value, "model": model, "train": train_config.to_dict(), **extra}


def _seeds(model_config: ModelConfig, train_config: TrainConfig, cv_repeat: int) -> Dict[str, int]:
    return {"train": train_config.seed, "model": model_config.seed, "cv_repeat": cv_repeat}


def _bucket_operator(masks: MaskSet) -> DiffTensor:
    """``W^T`` as a 64-bit constant so that ``images @ W^T`` projects every output."""
    return DiffTensor(np.ascontiguousarray(masks.matrix.T))


def cross_split_weights(plan: PartitionPlan, M: int) -> np.ndarray:
    """Row ``p * K + k`` weights bucket ``m`` by 1 unless ``m`` belongs to split ``k`` of permutation ``p``."""
    weights = np.ones((plan.K * plan.P, M), dtype=np.float64)
    for row, (p, k) in enumerate(plan.pairs()):
        weights[row, plan.index_lists[p][k]] = 0.0
    return weights


def _train(
    method: Method,
    model: Model,
    objective: Callable[[List[DiffTensor]], StepOutput],
    holdout: CvHoldout,
    train_config: TrainConfig,
    cv_repeat: int,
    **extra: Any,
) -> ReconReport:
    train_config = train_config.resolved(model.config.kind)
    result = Trainer(train_config).fit(model, objective, holdout.cv_loss)
    return ReconReport(
        method=method,
        image=result.prediction,
        config=_snapshot(method, model.config, train_config, **extra),
        seeds=_seeds(model.config, train_config, cv_repeat),
        trace=result.trace,
        model=result.model,
    )


# ---------------------------------------------------------------------------
# Learned engines
# ---------------------------------------------------------------------------

def gidc_reconstruct(
    W: MaskSet,
    y: Buckets,
    model_config: Optional[ModelConfig] = None,
    train_config: Optional[TrainConfig] = None,
    cv_repeat: int = 0,
) -> ReconReport:
    """Deep-image-prior reconstruction: fit ``N(r)`` to the buckets, ``r`` the LS image."""
    model_config = model_config or ModelConfig()
    train_config = train_config or TrainConfig()
    _require_kind(model_config, Method.GIDC)
    holdout = holdout_realizations(W, y, train_config.cv_fraction, train_config.seed, cv_repeat)
    check_memory_budget(model_config, 1, W.shape, train_config.memory_budget_bytes)

    r = cgls_reconstruct(holdout.train_masks, holdout.train_buckets, train_config.cgls)
    norm = Normalization.fit(r)
    model = build_model(model_config)
    inputs = DiffTensor(norm.forward(r)[None, None].astype(default_dtype()))
    operator = _bucket_operator(holdout.train_masks)
    target = DiffTensor(holdout.train_buckets.values[None, :])

    def objective(params: List[DiffTensor]) -> StepOutput:
        images = norm.inverse(model.apply(params, inputs))
        data = ops.weighted_sq_error(ops.matmul(ops.reshape(images, (1, -1)), operator), target)
        loss = _add_tv(data, images, train_config)
        return StepOutput(loss, data.item(), images.values[0, 0].astype(np.float64))

    return _train(Method.GIDC, model, objective, holdout, train_config, cv_repeat)


def _split_inputs(
    holdout: CvHoldout, train_config: TrainConfig, method: Method
) -> Tuple[PartitionPlan, np.ndarray]:
    if train_config.K < 2:
        raise ConfigError(f"{method.value} needs at least K=2 splits, got {train_config.K}")
    plan, subsets = permuted_splits(
        holdout.train_masks, holdout.train_buckets, train_config.K, train_config.P, train_config.seed
    )
    return plan, np.stack(sub_reconstruct_all(subsets, train_config.cgls))


def n2g_reconstruct(
    W: MaskSet,
    y: Buckets,
    model_config: Optional[ModelConfig] = None,
    train_config: Optional[TrainConfig] = None,
    cv_repeat: int = 0,
) -> ReconReport:
    """Self-supervised training on sub-reconstructions with cross-split bucket targets.

    Every network output ``N(x_pk)`` is projected onto all training masks;
    the buckets of its own split ``k`` are masked out of the loss, so the
    remaining splits of permutation ``p`` act as targets. The prediction is
    the mean output over all ``K * P`` sub-reconstructions.
    """
    model_config = model_config or ModelConfig()
    train_config = train_config or TrainConfig()
    _require_kind(model_config, Method.N2G)
    holdout = holdout_realizations(W, y, train_config.cv_fraction, train_config.seed, cv_repeat)
    batch = train_config.K * train_config.P
    check_memory_budget(model_config, batch, W.shape, train_config.memory_budget_bytes)

    plan, subs = _split_inputs(holdout, train_config, Method.N2G)
    norm = Normalization.fit(subs)
    model = build_model(model_config)
    inputs = DiffTensor(norm.forward(subs)[:, None].astype(default_dtype()))
    operator = _bucket_operator(holdout.train_masks)
    target = DiffTensor(holdout.train_buckets.values[None, :])
    weights = cross_split_weights(plan, holdout.train_masks.M)

    def objective(params: List[DiffTensor]) -> StepOutput:
        images = norm.inverse(model.apply(params, inputs))
        projected = ops.matmul(ops.reshape(images, (batch, -1)), operator)
        data = ops.weighted_sq_error(projected, target, weights)
        loss = _add_tv(data, images, train_config)
        prediction = images.values[:, 0].astype(np.float64).mean(axis=0)
        return StepOutput(loss, data.item(), prediction)

    return _train(Method.N2G, model, objective, holdout, train_config, cv_repeat, K=plan.K, P=plan.P)


def n2i_reconstruct(
    W: MaskSet,
    y: Buckets,
    model_config: Optional[ModelConfig] = None,
    train_config: Optional[TrainConfig] = None,
    cv_repeat: int = 0,
) -> ReconReport:
    """Noise2Inverse: map each sub-reconstruction to the mean of the other splits."""
    model_config = model_config or ModelConfig()
    train_config = train_config or TrainConfig()
    _require_kind(model_config, Method.N2I)
    holdout = holdout_realizations(W, y, train_config.cv_fraction, train_config.seed, cv_repeat)
    batch = train_config.K * train_config.P
    check_memory_budget(model_config, batch, W.shape, train_config.memory_budget_bytes)

    plan, subs = _split_inputs(holdout, train_config, Method.N2I)
    grouped = subs.reshape(plan.P, plan.K, *subs.shape[1:])
    others = (grouped.sum(axis=1, keepdims=True) - grouped) / (plan.K - 1)
    targets = DiffTensor(others.reshape(batch, 1, *subs.shape[1:]))
    norm = Normalization.fit(subs)
    model = build_model(model_config)
    inputs = DiffTensor(norm.forward(subs)[:, None].astype(default_dtype()))

    def objective(params: List[DiffTensor]) -> StepOutput:
        images = norm.inverse(model.apply(params, inputs))
        loss = ops.weighted_sq_error(images, targets)
        prediction = images.values[:, 0].astype(np.float64).mean(axis=0)
        return StepOutput(loss, loss.item(), prediction)

    return _train(Method.N2I, model, objective, holdout, train_config, cv_repeat, K=plan.K, P=plan.P)


def inr_reconstruct(
    W: MaskSet,
    y: Buckets,
    model_config: Optional[ModelConfig] = None,
    train_config: Optional[TrainConfig] = None,
    cv_repeat: int = 0,
) -> ReconReport:
    """Fit a coordinate network whose rendered image explains the buckets."""
    model_config = model_config or ModelConfig(kind=ModelKind.INR)
    train_config = train_config or TrainConfig()
    _require_kind(model_config, Method.INR)
    holdout = holdout_realizations(W, y, train_config.cv_fraction, train_config.seed, cv_repeat)
    check_memory_budget(model_config, 1, W.shape, train_config.memory_budget_bytes)

    norm = Normalization.from_buckets(holdout.train_masks, holdout.train_buckets)
    model = build_model(model_config)
    grid = DiffTensor(coordinate_grid(*W.shape).reshape(-1, 2).astype(default_dtype()))
    operator = _bucket_operator(holdout.train_masks)
    target = DiffTensor(holdout.train_buckets.values[None, :])

    def objective(params: List[DiffTensor]) -> StepOutput:
        pixels = norm.inverse(model.apply(params, grid))
        data = ops.weighted_sq_error(ops.matmul(ops.reshape(pixels, (1, -1)), operator), target)
        image = ops.reshape(pixels, W.shape)
        loss = _add_tv(data, image, train_config)
        return StepOutput(loss, data.item(), image.values.astype(np.float64))

    return _train(Method.INR, model, objective, holdout, train_config, cv_repeat)


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

def default_model_config(method: Method, model_config: Optional[ModelConfig] = None) -> ModelConfig:
    """The model a method runs with when the caller leaves it open or picks a mismatched kind."""
    if model_config is None:
        return ModelConfig(kind=ModelKind.INR if method is Method.INR else ModelKind.UNET)
    if method is Method.INR and model_config.kind is not ModelKind.INR:
        return ModelConfig(kind=ModelKind.INR, seed=model_config.seed)
    return model_config


def reconstruct(
    method: Union[Method, str],
    W: MaskSet,
    y: Buckets,
    model_config: Optional[ModelConfig] = None,
    train_config: Optional[TrainConfig] = None,
    variational_config: Optional[VariationalConfig] = None,
    cv_repeat: int = 0,
) -> ReconReport:
    """Run any method on a dataset; LS and TV use all realizations."""
    method = Method(method)
    train_config = train_config or TrainConfig()
    buckets = as_buckets(W, y)
    if method is Method.LS:
        image = cgls_reconstruct(W, buckets, train_config.cgls)
        return ReconReport(method, image, config={"method": "ls", "cgls": asdict(train_config.cgls)})
    if method is Method.TV:
        variational_config = variational_config or VariationalConfig()
        image = tv_min_reconstruct(W, buckets, variational_config)
        return ReconReport(method, image, config={"method": "tv", "tv": asdict(variational_config)})

    model_config = default_model_config(method, model_config)
    engines = {
        Method.GIDC: gidc_reconstruct,
        Method.N2G: n2g_reconstruct,
        Method.N2I: n2i_reconstruct,
        Method.INR: inr_reconstruct,
    }
    logger.info("running %s with a %s model", method.value, model_config.kind.value)
    return engines[method](W, buckets, model_config, train_config, cv_repeat)


def mean_prediction(model: Model, inputs: Sequence[np.ndarray], norm: Normalization) -> np.ndarray:
    """Average of the de-normalized network outputs over a stack of inputs."""
    batch = DiffTensor(norm.forward(np.stack(inputs))[:, None].astype(default_dtype()))
    images = norm.inverse(model.apply(model.constants(), batch))
    return images.values[:, 0].astype(np.float64).mean(axis=0)
