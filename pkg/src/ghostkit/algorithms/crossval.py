"""Selection of the regularization weight by put-aside cross-validation."""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ghostkit.acquisition.masks import MaskSet
from ghostkit.algorithms.engines import Buckets, Method, default_model_config, holdout_realizations, reconstruct
from ghostkit.algorithms.training import TrainConfig
from ghostkit.errors import ComputationError, ConfigError
from ghostkit.models.config import ModelConfig
from ghostkit.parallel import parallel_map
from ghostkit.solvers.variational import VariationalConfig, tv_min_reconstruct

logger = logging.getLogger(__name__)


@dataclass
class LambdaScore:
    lam: float
    cv_losses: List[float]  # minimum CV loss of every repeat

    @property
    def mean(self) -> float:
        return float(np.mean(self.cv_losses))

    @property
    def std(self) -> float:
        return float(np.std(self.cv_losses))


@dataclass
class CrossValidationResult:
    method: Method
    best_lam: float
    scores: List[LambdaScore] = field(default_factory=list)  # in grid order

    def ranked(self) -> List[LambdaScore]:
        """Scores by increasing mean CV loss; ties list the larger lambda first."""
        return sorted(self.scores, key=lambda s: (s.mean, -s.lam))

    def losses(self) -> Dict[float, float]:
        return {s.lam: s.mean for s in self.scores}


def solve_tv_for_cv(
    W: MaskSet,
    y: Buckets,
    lam: float,
    config: Optional[VariationalConfig] = None,
    cv_fraction: float = 0.1,
    seed: int = 0,
    repeat: int = 0,
) -> float:
    """CV loss of a TV reconstruction from the non-held-out realizations."""
    config = replace(config or VariationalConfig(), lam=lam)
    holdout = holdout_realizations(W, y, cv_fraction, seed, repeat)
    image = tv_min_reconstruct(holdout.train_masks, holdout.train_buckets, config)
    return holdout.cv_loss(image)


def _run_one(
    method: Method,
    W: MaskSet,
    y: Buckets,
    lam: float,
    repeat: int,
    train_config: TrainConfig,
    model_config: Optional[ModelConfig],
    variational_config: Optional[VariationalConfig],
) -> float:
    if method is Method.TV:
        return solve_tv_for_cv(
            W, y, lam, variational_config, train_config.cv_fraction, train_config.seed, repeat
        )
    report = reconstruct(method, W, y, model_config, train_config.with_lam(lam), cv_repeat=repeat)
    if report.trace is None:
        raise ComputationError(f"{method.value} produced no training trace")
    return report.trace.best_cv_loss


def cross_validate_lambda(
    W: MaskSet,
    y: Buckets,
    method: Union[Method, str],
    grid: Sequence[float],
    train_config: Optional[TrainConfig] = None,
    model_config: Optional[ModelConfig] = None,
    variational_config: Optional[VariationalConfig] = None,
    workers: int = 1,
) -> CrossValidationResult:
    """Average the minimum CV loss over ``cv_repeats`` splits for every grid value.

    Returns the lambda with the lowest mean; ties go to the larger lambda.
    """
    method = Method(method)
    if not method.regularized:
        raise ConfigError(f"method {method.value} has no regularization weight to select")
    grid = [float(lam) for lam in grid]
    if not grid:
        raise ConfigError("lambda grid is empty")
    if any(lam < 0 for lam in grid):
        raise ConfigError("lambda grid values must be non-negative")
    train_config = train_config or TrainConfig()
    if method.learned:
        model_config = default_model_config(method, model_config)

    jobs: List[Tuple[float, int]] = [(lam, r) for lam in grid for r in range(train_config.cv_repeats)]

    def run(job: Tuple[float, int]) -> float:
        lam, repeat = job
        return _run_one(method, W, y, lam, repeat, train_config, model_config, variational_config)

    losses = parallel_map(run, jobs, workers)

    scores = []
    for index, lam in enumerate(grid):
        start = index * train_config.cv_repeats
        scores.append(LambdaScore(lam, losses[start:start + train_config.cv_repeats]))
    result = CrossValidationResult(method, best_lam=0.0, scores=scores)
    result.best_lam = result.ranked()[0].lam
    logger.info("%s: selected lambda %.3g from %d candidates", method.value, result.best_lam, len(grid))
    return result
