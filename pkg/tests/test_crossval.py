"""Regularization weight selection by put-aside cross-validation."""

import math

import numpy as np
import pytest

from ghostkit.acquisition import NoiseModel, apply_poisson, forward_project, generate_masks, generate_phantom
from ghostkit.algorithms import CrossValidationResult, LambdaScore, Method, TrainConfig, cross_validate_lambda
from ghostkit.algorithms.crossval import solve_tv_for_cv
from ghostkit.errors import ConfigError
from ghostkit.models import ModelConfig
from ghostkit.solvers import VariationalConfig

FAST_TV = VariationalConfig(iterations=60)


@pytest.fixture
def noiseless_acquisition():
    phantom = generate_phantom("disks", 8, 8, seed=1)
    masks = generate_masks(128, 8, 8, seed=2)
    return masks, apply_poisson(forward_project(masks, phantom), NoiseModel(math.inf))


class TestRanking:
    def test_ties_prefer_the_larger_lambda(self):
        scores = [LambdaScore(1e-3, [2.0, 4.0]), LambdaScore(1e-1, [3.0, 3.0]), LambdaScore(1.0, [5.0])]
        result = CrossValidationResult(Method.TV, best_lam=0.0, scores=scores)
        assert [s.lam for s in result.ranked()] == [1e-1, 1e-3, 1.0]
        assert result.losses() == {1e-3: 3.0, 1e-1: 3.0, 1.0: 5.0}
        assert scores[0].std == pytest.approx(1.0)


class TestTvSelection:
    def test_single_point_grid(self, small_acquisition):
        result = cross_validate_lambda(
            small_acquisition.masks, small_acquisition.buckets, "tv", [1e-3],
            TrainConfig(cv_repeats=2), variational_config=FAST_TV,
        )
        assert result.best_lam == 1e-3
        assert len(result.scores) == 1
        assert len(result.scores[0].cv_losses) == 2
        assert all(np.isfinite(result.scores[0].cv_losses))

    def test_reproducible(self, small_acquisition):
        def run():
            return cross_validate_lambda(
                small_acquisition.masks, small_acquisition.buckets, Method.TV, [1e-3, 1e-1],
                TrainConfig(cv_repeats=1, seed=4), variational_config=FAST_TV,
            )
        assert run().losses() == run().losses()

    def test_scores_match_single_solves(self, small_acquisition):
        config = TrainConfig(cv_repeats=1, seed=2)
        result = cross_validate_lambda(
            small_acquisition.masks, small_acquisition.buckets, "tv", [1e-2], config, variational_config=FAST_TV
        )
        single = solve_tv_for_cv(
            small_acquisition.masks, small_acquisition.buckets, 1e-2, FAST_TV, config.cv_fraction, config.seed
        )
        assert result.scores[0].cv_losses == [single]

    def test_noiseless_data_prefers_weak_regularization(self, noiseless_acquisition):
        masks, buckets = noiseless_acquisition
        result = cross_validate_lambda(
            masks, buckets, "tv", [1e-4, 1e-2, 100.0],
            TrainConfig(cv_repeats=1), variational_config=VariationalConfig(iterations=2000),
        )
        assert result.best_lam < 100.0
        assert result.losses()[1e-4] < result.losses()[100.0]

    def test_workers_do_not_change_the_result(self, small_acquisition):
        args = (small_acquisition.masks, small_acquisition.buckets, "tv", [1e-3, 1e-1])
        kwargs = dict(train_config=TrainConfig(cv_repeats=2), variational_config=FAST_TV)
        serial = cross_validate_lambda(*args, workers=1, **kwargs)
        threaded = cross_validate_lambda(*args, workers=2, **kwargs)
        assert threaded.best_lam == serial.best_lam
        for a, b in zip(serial.scores, threaded.scores):
            assert a.cv_losses == pytest.approx(b.cv_losses, rel=1e-9)


class TestLearnedSelection:
    def test_gidc_grid(self, small_acquisition):
        config = TrainConfig(epochs=3, lr=1e-2, cv_repeats=1, checkpoint_every=1)
        result = cross_validate_lambda(
            small_acquisition.masks, small_acquisition.buckets, "gidc", [0.0, 1e-3],
            config, ModelConfig(features=2, levels=1),
        )
        assert result.best_lam in (0.0, 1e-3)
        assert all(math.isfinite(s.mean) for s in result.scores)


class TestInvalidGrids:
    @pytest.mark.parametrize("method", ["ls", "n2i"])
    def test_unregularized_methods(self, small_acquisition, method):
        with pytest.raises(ConfigError):
            cross_validate_lambda(small_acquisition.masks, small_acquisition.buckets, method, [1e-3])

    def test_empty_grid(self, small_acquisition):
        with pytest.raises(ConfigError):
            cross_validate_lambda(small_acquisition.masks, small_acquisition.buckets, "tv", [])

    def test_negative_lambda(self, small_acquisition):
        with pytest.raises(ConfigError):
            cross_validate_lambda(small_acquisition.masks, small_acquisition.buckets, "tv", [1e-3, -1.0])
