"""Learned reconstruction engines and the training loop."""

import numpy as np
import pytest

from ghostkit.acquisition import BucketVector, forward_project, generate_masks
from ghostkit.algorithms import (
    Method,
    Normalization,
    TrainConfig,
    cross_split_weights,
    gidc_reconstruct,
    holdout_realizations,
    inr_reconstruct,
    n2g_reconstruct,
    n2i_reconstruct,
    reconstruct,
    training,
)
from ghostkit.algorithms.engines import default_model_config, mean_prediction
from ghostkit.algorithms.training import INR_EPOCHS, get_training_stats
from ghostkit.errors import ConfigError, MemoryBudgetError
from ghostkit.models import ModelConfig, ModelKind, build_model, unet_forward
from ghostkit.solvers import cgls_reconstruct, make_partition_plan, permuted_splits, sub_reconstruct_all

TINY = ModelConfig(features=2, levels=2, seed=1)
TINY_INR = ModelConfig(kind=ModelKind.INR, width=8, embeddings=4, hidden_layers=2, seed=1)


def _config(**overrides):
    values = dict(epochs=4, lr=1e-2, K=2, P=1, checkpoint_every=1, cv_repeats=1, seed=3)
    values.update(overrides)
    return TrainConfig(**values)


class TestTrainConfig:
    @pytest.mark.parametrize(
        "overrides",
        [{"cv_fraction": 0.0}, {"cv_fraction": 0.5}, {"lam": -1.0}, {"K": 0}, {"P": 0}, {"epochs": -1}],
    )
    def test_invalid(self, overrides):
        with pytest.raises(ConfigError):
            TrainConfig(**overrides)

    def test_defaults_per_model_kind(self):
        assert TrainConfig().epochs is None
        assert TrainConfig().resolved(ModelKind.UNET).epochs == 5000
        assert TrainConfig.for_model(ModelKind.INR).epochs == INR_EPOCHS == 7000
        assert TrainConfig(epochs=12).resolved(ModelKind.INR).epochs == 12
        assert TrainConfig().lr == pytest.approx(3e-4)
        assert TrainConfig().cv_fraction == pytest.approx(0.1)


class TestHoldout:
    def test_cv_realizations_are_put_aside(self, small_acquisition):
        holdout = holdout_realizations(small_acquisition.masks, small_acquisition.buckets, 0.1, seed=0)
        assert holdout.cv_masks.M == 10
        assert holdout.train_masks.M == 86
        again = holdout_realizations(small_acquisition.masks, small_acquisition.buckets, 0.1, seed=0)
        np.testing.assert_array_equal(holdout.cv_indices, again.cv_indices)
        other = holdout_realizations(small_acquisition.masks, small_acquisition.buckets, 0.1, seed=0, repeat=1)
        assert not np.array_equal(holdout.cv_indices, other.cv_indices)

    def test_cv_loss_of_the_truth_is_the_noise(self):
        masks = generate_masks(20, 4, 4, seed=0)
        image = np.ones((4, 4))
        holdout = holdout_realizations(masks, forward_project(masks, image), 0.2, seed=1)
        assert holdout.cv_loss(image) == pytest.approx(0.0, abs=1e-20)

    def test_normalization(self):
        norm = Normalization.fit(np.array([1.0, 3.0]))
        assert (norm.mean, norm.std) == (2.0, 1.0)
        np.testing.assert_allclose(norm.forward(np.array([1.0, 3.0])), [-1.0, 1.0])
        assert Normalization.fit(np.full(3, 5.0)).std == 1.0

    def test_non_finite_buckets(self, small_acquisition):
        values = small_acquisition.y.copy()
        values[0] = np.nan
        with pytest.raises(ConfigError):
            reconstruct("ls", small_acquisition.masks, BucketVector(values))


class TestGidc:
    def test_zero_epochs_returns_the_initial_network_output(self, small_acquisition):
        config = _config(epochs=0, lam=0.0)
        report = gidc_reconstruct(small_acquisition.masks, small_acquisition.buckets, TINY, config)
        holdout = holdout_realizations(small_acquisition.masks, small_acquisition.buckets, 0.1, config.seed)
        r = cgls_reconstruct(holdout.train_masks, holdout.train_buckets, config.cgls)
        norm = Normalization.fit(r)
        expected = unet_forward(build_model(TINY), norm.forward(r)) * norm.std + norm.mean
        np.testing.assert_allclose(report.image, expected, rtol=1e-4, atol=1e-4)
        assert report.trace.epochs == 0
        assert report.trace.convergence_reason == "no_epochs"
        assert report.trace.best_epoch == 0

    def test_training_reduces_the_loss(self, small_acquisition):
        report = gidc_reconstruct(small_acquisition.masks, small_acquisition.buckets, TINY, _config(epochs=30))
        trace = report.trace
        assert trace.train_loss[-1] < trace.train_loss[0]
        assert len(trace.train_loss) == len(trace.data_loss) == len(trace.cv_loss) == 30
        assert trace.best_epoch in trace.cv_checkpoints
        assert trace.best_cv_loss == min(trace.cv_checkpoint_loss)

    def test_report_records_seeds_and_config(self, small_acquisition):
        report = gidc_reconstruct(small_acquisition.masks, small_acquisition.buckets, TINY, _config(), cv_repeat=2)
        assert report.method is Method.GIDC
        assert report.seeds == {"train": 3, "model": 1, "cv_repeat": 2}
        assert report.config["model"]["kind"] == "unet"
        summary = report.to_dict(timing=False)
        assert "wall_time" not in summary["training"]
        assert "wall_time" in report.to_dict()["training"]

    def test_timeout_stops_after_one_epoch(self, small_acquisition):
        report = gidc_reconstruct(
            small_acquisition.masks, small_acquisition.buckets, TINY, _config(epochs=50, timeout_seconds=1e-9)
        )
        assert report.trace.convergence_reason == "timeout"
        assert report.trace.epochs == 1

    def test_wall_time_uses_the_monotonic_clock(self, small_acquisition, monkeypatch):
        ticks = iter(range(1000))
        monkeypatch.setattr(training.time, "perf_counter", lambda: float(next(ticks)))
        report = gidc_reconstruct(small_acquisition.masks, small_acquisition.buckets, TINY, _config(epochs=3))
        assert report.trace.wall_time == 1.0

    def test_memory_budget(self, small_acquisition):
        with pytest.raises(MemoryBudgetError):
            gidc_reconstruct(
                small_acquisition.masks, small_acquisition.buckets, TINY, _config(memory_budget_bytes=1)
            )


class TestCrossSplitWeights:
    def test_own_split_is_excluded(self):
        plan = make_partition_plan(10, 3, 2, seed=0)
        weights = cross_split_weights(plan, 10)
        assert weights.shape == (6, 10)
        for row, (p, k) in enumerate(plan.pairs()):
            own = plan.index_lists[p][k]
            assert not weights[row, own].any()
            others = np.setdiff1d(np.arange(10), own)
            assert np.all(weights[row, others] == 1.0)
            assert weights[row].sum() == 10 - len(own)


class TestN2g:
    def test_needs_two_splits(self, small_acquisition):
        with pytest.raises(ConfigError):
            n2g_reconstruct(small_acquisition.masks, small_acquisition.buckets, TINY, _config(K=1))

    def test_memory_budget_checked_before_training(self, small_acquisition):
        with pytest.raises(MemoryBudgetError, match="K\\*P"):
            n2g_reconstruct(
                small_acquisition.masks, small_acquisition.buckets, TINY, _config(P=6, memory_budget_bytes=1024)
            )

    def test_records_splits_and_permutations(self, small_acquisition):
        report = n2g_reconstruct(small_acquisition.masks, small_acquisition.buckets, TINY, _config(K=3, P=2))
        assert report.config["K"] == 3 and report.config["P"] == 2
        assert report.image.shape == (12, 12)

    def test_training_is_bit_reproducible(self, small_acquisition):
        config = _config(K=2, P=2, epochs=5)
        first = n2g_reconstruct(small_acquisition.masks, small_acquisition.buckets, TINY, config)
        second = n2g_reconstruct(small_acquisition.masks, small_acquisition.buckets, TINY, config)
        assert first.trace.train_loss == second.trace.train_loss
        np.testing.assert_array_equal(first.image, second.image)

    def test_output_is_the_mean_over_sub_reconstructions(self, small_acquisition):
        config = _config(K=2, P=2, epochs=3)
        report = n2g_reconstruct(small_acquisition.masks, small_acquisition.buckets, TINY, config)
        holdout = holdout_realizations(small_acquisition.masks, small_acquisition.buckets, 0.1, config.seed)
        _, subsets = permuted_splits(holdout.train_masks, holdout.train_buckets, 2, 2, config.seed)
        inputs = sub_reconstruct_all(subsets, config.cgls)
        norm = Normalization.fit(np.stack(inputs))
        np.testing.assert_allclose(mean_prediction(report.model, inputs, norm), report.image, atol=1e-12)


class TestN2i:
    def test_runs_and_records_splits(self, small_acquisition):
        report = n2i_reconstruct(small_acquisition.masks, small_acquisition.buckets, TINY, _config(K=3))
        assert report.method is Method.N2I
        assert report.config["K"] == 3
        assert np.all(np.isfinite(report.image))

    def test_needs_two_splits(self, small_acquisition):
        with pytest.raises(ConfigError):
            n2i_reconstruct(small_acquisition.masks, small_acquisition.buckets, TINY, _config(K=1))


class TestInr:
    def test_runs_with_a_coordinate_network(self, small_acquisition):
        report = inr_reconstruct(small_acquisition.masks, small_acquisition.buckets, TINY_INR, _config(epochs=3))
        assert report.image.shape == (12, 12)
        assert report.config["model"]["kind"] == "inr"

    def test_rejects_a_convolutional_model(self, small_acquisition):
        with pytest.raises(ConfigError):
            inr_reconstruct(small_acquisition.masks, small_acquisition.buckets, TINY, _config())


class TestDispatch:
    def test_classical_methods(self, small_acquisition):
        ls = reconstruct("ls", small_acquisition.masks, small_acquisition.buckets)
        np.testing.assert_allclose(ls.image, cgls_reconstruct(small_acquisition.masks, small_acquisition.buckets))
        assert ls.trace is None
        tv = reconstruct(Method.TV, small_acquisition.masks, small_acquisition.buckets)
        assert tv.image.min() >= 0.0
        assert tv.to_dict()["training"] is None

    def test_unknown_method(self, small_acquisition):
        with pytest.raises(ValueError):
            reconstruct("n2v", small_acquisition.masks, small_acquisition.buckets)

    def test_default_models(self):
        assert default_model_config(Method.GIDC).kind is ModelKind.UNET
        assert default_model_config(Method.INR).kind is ModelKind.INR
        assert default_model_config(Method.INR, ModelConfig(seed=4)).seed == 4
        assert default_model_config(Method.N2G, TINY) is TINY

    def test_convolutional_method_rejects_inr(self, small_acquisition):
        with pytest.raises(ConfigError):
            reconstruct("gidc", small_acquisition.masks, small_acquisition.buckets, TINY_INR, _config())

    def test_training_stats(self, small_acquisition):
        report = reconstruct("gidc", small_acquisition.masks, small_acquisition.buckets, TINY, _config())
        stats = get_training_stats(report.trace)
        assert stats["epochs"] == 4
        assert stats["min_train_loss"] <= stats["final_train_loss"]
