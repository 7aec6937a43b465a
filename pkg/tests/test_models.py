"""U-Net, DnCNN and INR construction and forward passes."""

import numpy as np
import pytest

from ghostkit.errors import ConfigError, ShapeError
from ghostkit.models import (
    ModelConfig,
    ModelKind,
    activation_bytes,
    analytic_parameter_count,
    build_model,
    coordinate_grid,
    dncnn_forward,
    inr_forward,
    unet_forward,
)
from ghostkit.tensor import ops
from ghostkit.tensor.tape import DiffTensor
from ghostkit.validation import check_gradients

TINY_UNET = ModelConfig(kind=ModelKind.UNET, features=2, levels=1)


def _zeroed(model, names=None):
    params = [
        np.zeros_like(p) if names is None or name in names else p
        for name, p in zip(model.names, model.parameters)
    ]
    return model.with_parameters(params)


class TestParameterCounts:
    def test_unet_default(self):
        model = build_model(ModelConfig())
        assert model.parameter_count == 202_261
        assert 150_000 <= model.parameter_count <= 250_000
        assert analytic_parameter_count(ModelConfig()) == model.parameter_count

    def test_dncnn_default(self):
        config = ModelConfig(kind=ModelKind.DNCNN)
        assert build_model(config).parameter_count == 125_617 == analytic_parameter_count(config)

    def test_inr_default_is_the_sum_of_its_affine_layers(self):
        config = ModelConfig(kind=ModelKind.INR)
        width, inputs = 512, 2 * 256
        expected = (inputs + 1) * width + 2 * (width + 1) * width + (width + 1)
        assert expected == 788_481
        assert analytic_parameter_count(config) == expected

    def test_same_seed_same_parameters(self):
        a = build_model(ModelConfig(features=4, seed=3))
        b = build_model(ModelConfig(features=4, seed=3))
        c = build_model(ModelConfig(features=4, seed=4))
        for pa, pb in zip(a.parameters, b.parameters):
            np.testing.assert_array_equal(pa, pb)
        assert any(not np.array_equal(pa, pc) for pa, pc in zip(a.parameters, c.parameters))

    def test_biases_start_at_zero_and_weights_are_bounded(self):
        model = build_model(ModelConfig(features=4))
        for name, p in zip(model.names, model.parameters):
            if name.endswith(".bias"):
                assert not p.any()
            else:
                fan_in = int(np.prod(p.shape[1:]))
                assert np.abs(p).max() <= np.sqrt(6.0 / fan_in) + 1e-6


class TestConfig:
    def test_invalid_sizes(self):
        with pytest.raises(ConfigError):
            ModelConfig(features=0)
        with pytest.raises(ConfigError):
            ModelConfig(kind="dncnn", depth=1)
        with pytest.raises(ConfigError):
            ModelConfig(kind="dncnn", out_channels=2)
        with pytest.raises(ValueError):
            ModelConfig(kind="transformer")

    def test_kind_accepts_strings(self):
        assert ModelConfig(kind="inr").kind is ModelKind.INR
        assert not ModelKind.INR.convolutional

    def test_with_parameters_checks_shapes(self):
        model = build_model(TINY_UNET)
        with pytest.raises(ConfigError):
            model.with_parameters(model.parameters[:-1])
        wrong = [np.zeros((1,))] + model.parameters[1:]
        with pytest.raises(ShapeError):
            model.with_parameters(wrong)

    def test_activation_estimate_grows_with_batch(self):
        one = activation_bytes(ModelConfig(), 1, 32, 32)
        assert one > 0
        assert activation_bytes(ModelConfig(), 8, 32, 32) == pytest.approx(8 * one, rel=0.01)


class TestUnet:
    @pytest.mark.parametrize("shape", [(16, 16), (13, 10), (7, 9)])
    def test_output_shape_matches_input(self, shape, rng):
        model = build_model(ModelConfig(features=2, levels=3))
        out = unet_forward(model, rng.uniform(size=shape))
        assert out.shape == shape
        assert np.all(np.isfinite(out))

    def test_batched_input(self, rng):
        model = build_model(ModelConfig(features=2, levels=2))
        out = model.apply(model.constants(), DiffTensor(rng.uniform(size=(3, 1, 8, 8))))
        assert out.shape == (3, 1, 8, 8)

    def test_zero_parameters_give_zero_output(self, rng):
        model = _zeroed(build_model(ModelConfig(features=2)))
        assert not unet_forward(model, rng.uniform(size=(12, 12))).any()

    def test_default_model_is_finite_at_init(self, rng):
        out = unet_forward(build_model(ModelConfig()), rng.normal(size=(32, 32)))
        assert np.all(np.isfinite(out))

    def test_gradient_check_tiny_model(self, rng):
        model = build_model(TINY_UNET)
        result = check_gradients(
            lambda t: ops.total(ops.square(model.apply(t[1:], t[0]))),
            [rng.normal(size=(1, 1, 8, 8))] + model.parameters,
        )
        assert result.is_valid, result.relative_errors

    def test_gradient_check_with_pooling(self, rng):
        model = build_model(ModelConfig(features=2, levels=2, seed=1))
        result = check_gradients(
            lambda t: ops.total(ops.square(model.apply(t[1:], t[0]))),
            [rng.normal(size=(1, 1, 8, 8))] + model.parameters,
            max_entries=16,
        )
        assert result.is_valid, result.relative_errors

    def test_translation_covariance(self):
        model = build_model(ModelConfig(features=4, levels=2, seed=2))
        rows, cols = np.mgrid[0:32, 0:32]
        blob = np.exp(-((rows - 16) ** 2 + (cols - 16) ** 2) / 8.0)
        shifted = np.roll(blob, 2, axis=1)
        out = unet_forward(model, blob)
        out_shifted = unet_forward(model, shifted)
        interior = (slice(8, -8), slice(8, -8))
        a = np.roll(out, 2, axis=1)[interior].ravel()
        b = out_shifted[interior].ravel()
        assert np.corrcoef(a, b)[0, 1] > 0.99

    def test_wrong_kind(self, rng):
        with pytest.raises(ConfigError):
            unet_forward(build_model(ModelConfig(kind="dncnn", depth=3, dncnn_features=2)), np.zeros((4, 4)))


class TestDncnn:
    def test_zero_parameters_return_the_input(self, rng):
        model = _zeroed(build_model(ModelConfig(kind="dncnn", depth=3, dncnn_features=4)))
        image = rng.uniform(size=(9, 9))
        np.testing.assert_allclose(dncnn_forward(model, image), image, rtol=1e-6)

    def test_gradient_check(self, rng):
        model = build_model(ModelConfig(kind="dncnn", depth=3, dncnn_features=3))
        result = check_gradients(
            lambda t: ops.total(ops.square(model.apply(t[1:], t[0]))),
            [rng.normal(size=(1, 1, 6, 6))] + model.parameters,
        )
        assert result.is_valid, result.relative_errors


class TestInr:
    SMALL = ModelConfig(kind=ModelKind.INR, width=16, embeddings=8, hidden_layers=3)

    def test_coordinate_grid(self):
        grid = coordinate_grid(3, 4)
        assert grid.shape == (3, 4, 2)
        np.testing.assert_array_equal(grid[0, 0], [-1.0, -1.0])
        np.testing.assert_allclose(grid[0, 1], [-1.0, -1.0 / 3.0])
        np.testing.assert_array_equal(grid[-1, -1], [1.0, 1.0])

    def test_zero_output_layer_gives_zero_image(self):
        model = _zeroed(build_model(self.SMALL), {"output.weight", "output.bias"})
        assert not inr_forward(model, coordinate_grid(5, 6)).any()

    def test_rendering_is_deterministic(self):
        model = build_model(self.SMALL)
        grid = coordinate_grid(4, 4)
        np.testing.assert_array_equal(inr_forward(model, grid), inr_forward(model, grid))
        assert inr_forward(model, coordinate_grid(4, 7)).shape == (4, 7)

    def test_rendering_follows_the_grid(self):
        model = build_model(self.SMALL)
        grid = coordinate_grid(6, 8)
        full = inr_forward(model, grid)
        crop = inr_forward(model, grid[1:4, 2:7])
        np.testing.assert_allclose(crop, full[1:4, 2:7], rtol=1e-5, atol=1e-6)
        flat = model.apply(model.constants(), DiffTensor(grid.reshape(-1, 2))).numpy()[:, 0]
        np.testing.assert_allclose(full.reshape(-1), flat, rtol=1e-5, atol=1e-6)

    def test_grid_needs_coordinate_pairs(self):
        model = build_model(self.SMALL)
        with pytest.raises(ShapeError):
            inr_forward(model, np.zeros((4, 4, 3)))
        with pytest.raises(ShapeError):
            inr_forward(model, np.zeros((16, 2)))

    def test_fourier_frequencies_follow_the_seed(self):
        a = build_model(ModelConfig(kind="inr", width=4, embeddings=8, seed=1)).buffers["fourier"]
        b = build_model(ModelConfig(kind="inr", width=4, embeddings=8, seed=2)).buffers["fourier"]
        assert a.shape == (8, 2)
        assert not np.array_equal(a, b)

    def test_default_model_is_finite(self):
        image = inr_forward(build_model(ModelConfig(kind="inr")), coordinate_grid(16, 16))
        assert np.all(np.isfinite(image))

    def test_gradient_check(self):
        model = build_model(self.SMALL)
        grid = coordinate_grid(4, 4).reshape(-1, 2)
        result = check_gradients(
            lambda t: ops.total(ops.square(model.apply(t, DiffTensor(grid)))),
            model.parameters,
        )
        assert result.is_valid, result.relative_errors

    def test_coordinates_must_be_pairs(self):
        model = build_model(self.SMALL)
        with pytest.raises(ShapeError):
            model.apply(model.constants(), DiffTensor(np.zeros((4, 3))))
