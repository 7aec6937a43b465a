"""Tests for the tape, the differentiable ops and the gradient checker."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghostkit.errors import ComputationError, ConfigError, ShapeError
from ghostkit.tensor import ops
from ghostkit.tensor.tape import DiffTensor, Precision, Tape, emit, get_precision, precision
from ghostkit.validation import GradientChecker, check_gradients


def _grad(fn, *arrays):
    tape = Tape()
    variables = [tape.variable(a) for a in arrays]
    return tape.gradient(fn(*variables), variables)


@pytest.fixture(params=range(20), ids=lambda seed: f"case{seed}")
def case_rng(request):
    return np.random.default_rng(request.param)


class TestTape:
    def test_values_are_read_only_but_caller_array_is_not(self):
        source = np.zeros(3)
        tensor = DiffTensor(source)
        assert not tensor.values.flags.writeable
        source[0] = 1.0
        assert source.flags.writeable

    def test_integer_input_takes_current_precision(self):
        assert DiffTensor(np.arange(3)).values.dtype == np.float32
        with precision("float64"):
            assert DiffTensor(np.arange(3)).values.dtype == np.float64

    def test_precision_context_restores(self):
        assert get_precision() is Precision.FLOAT32
        with precision(Precision.FLOAT64):
            assert get_precision() is Precision.FLOAT64
        assert get_precision() is Precision.FLOAT32

    def test_unused_source_gets_zero_gradient(self):
        tape = Tape()
        x = tape.variable([1.0, 2.0])
        unused = tape.variable([[3.0]])
        gx, gu = tape.gradient(ops.total(ops.square(x)), [x, unused])
        np.testing.assert_allclose(gx, [2.0, 4.0])
        np.testing.assert_array_equal(gu, np.zeros((1, 1)))

    def test_non_scalar_target_rejected(self):
        tape = Tape()
        x = tape.variable([1.0, 2.0])
        with pytest.raises(ConfigError):
            tape.gradient(ops.square(x), [x])

    def test_mixing_tapes_rejected(self):
        a = Tape().variable([1.0])
        b = Tape().variable([1.0])
        with pytest.raises(ConfigError):
            ops.add(a, b)

    def test_constants_are_not_recorded(self):
        result = ops.add(DiffTensor.constant([1.0]), DiffTensor.constant([2.0]))
        assert not result.tracked
        assert result.item() == pytest.approx(3.0)

    def test_non_finite_gradient_raises(self):
        tape = Tape()
        x = tape.variable([1.0])
        bad = emit("bad", (x,), x.values.copy(), lambda g: (g * np.inf,))
        with pytest.raises(ComputationError):
            tape.gradient(ops.total(bad), [x])

    def test_operators_build_the_same_graph_as_ops(self):
        (g,) = _grad(lambda x: (3.0 * x - x * x).sum(), np.array([1.0, 2.0]))
        np.testing.assert_allclose(g, [1.0, -1.0])


class TestOpValues:
    def test_identity_kernel_leaves_input_unchanged(self, rng):
        x = DiffTensor(rng.normal(size=(1, 5, 5)))
        kernel = DiffTensor(np.ones((1, 1, 1, 1)))
        out = ops.conv2d(x, kernel, DiffTensor(np.zeros(1)))
        np.testing.assert_allclose(out.numpy(), x.numpy())

    def test_all_ones_convolution(self):
        out = ops.conv2d(DiffTensor(np.ones((1, 3, 3))), DiffTensor(np.ones((1, 1, 3, 3))), DiffTensor(np.zeros(1)))
        assert out.shape == (1, 3, 3)
        assert out.numpy()[0, 1, 1] == pytest.approx(9.0)
        for corner in [(0, 0), (0, 2), (2, 0), (2, 2)]:
            assert out.numpy()[(0,) + corner] == pytest.approx(4.0)
        assert out.numpy()[0, 0, 1] == pytest.approx(6.0)

    def test_conv2d_bias_and_shape_checks(self):
        x = DiffTensor(np.zeros((2, 3, 4, 4)))
        out = ops.conv2d(x, DiffTensor(np.zeros((5, 3, 3, 3))), DiffTensor(np.full(5, 0.5)))
        assert out.shape == (2, 5, 4, 4)
        np.testing.assert_allclose(out.numpy(), 0.5)
        with pytest.raises(ShapeError):
            ops.conv2d(x, DiffTensor(np.zeros((5, 2, 3, 3))), DiffTensor(np.zeros(5)))
        with pytest.raises(ShapeError):
            ops.conv2d(x, DiffTensor(np.zeros((5, 3, 2, 2))), DiffTensor(np.zeros(5)))

    def test_dense(self):
        out = ops.dense(
            DiffTensor(np.array([1.0, 1.0])),
            DiffTensor(np.array([[1.0, 2.0], [3.0, 4.0]])),
            DiffTensor(np.zeros(2)),
        )
        np.testing.assert_allclose(out.numpy(), [3.0, 7.0])

    def test_relu_and_leaky_relu(self):
        x = DiffTensor(np.array([-1.0, 2.0]))
        np.testing.assert_allclose(ops.relu(x).numpy(), [0.0, 2.0])
        np.testing.assert_allclose(ops.leaky_relu(x, 0.2).numpy(), [-0.2, 2.0])

    def test_sin_derivative_at_zero(self):
        (g,) = _grad(lambda x: ops.total(ops.sin(x)), np.array([0.0]))
        assert g[0] == pytest.approx(1.0)

    def test_maxpool(self):
        out = ops.maxpool2x2(DiffTensor(np.array([[[1.0, 2.0], [3.0, 4.0]]])))
        np.testing.assert_array_equal(out.numpy(), [[[4.0]]])

    def test_maxpool_odd_size_replicates_edge(self):
        x = np.arange(9.0).reshape(1, 3, 3)
        out = ops.maxpool2x2(DiffTensor(x)).numpy()
        np.testing.assert_array_equal(out, [[[4.0, 5.0], [7.0, 8.0]]])

    def test_maxpool_tie_routes_gradient_to_first_element(self):
        (g,) = _grad(lambda x: ops.total(ops.maxpool2x2(x)), np.ones((1, 2, 2)))
        np.testing.assert_array_equal(g, [[[1.0, 0.0], [0.0, 0.0]]])

    def test_upsample(self):
        out = ops.upsample_nearest2x(DiffTensor(np.array([[[5.0]]])))
        np.testing.assert_array_equal(out.numpy(), np.full((1, 2, 2), 5.0))

    def test_upsample_crops_to_requested_size(self):
        out = ops.upsample_nearest2x(DiffTensor(np.ones((1, 2, 2))), size=(3, 3))
        assert out.shape == (1, 3, 3)
        with pytest.raises(ShapeError):
            ops.upsample_nearest2x(DiffTensor(np.ones((1, 2, 2))), size=(2, 4))

    def test_concat_channels(self):
        out = ops.concat_channels(DiffTensor(np.zeros((2, 4, 4))), DiffTensor(np.ones((3, 4, 4))))
        assert out.shape == (5, 4, 4)
        with pytest.raises(ShapeError):
            ops.concat_channels(DiffTensor(np.zeros((2, 4, 4))), DiffTensor(np.ones((3, 4, 5))))

    def test_mse_of_identical_tensors_is_zero(self, rng):
        x = DiffTensor(rng.normal(size=(4, 4)))
        assert ops.mse_loss(x, x).item() == 0.0

    def test_weighted_sq_error(self):
        loss = ops.weighted_sq_error(DiffTensor(np.array([1.0, 2.0])), np.zeros(2), np.array([1.0, 3.0]))
        assert loss.item() == pytest.approx(6.5)

    def test_tv_of_step_edge(self):
        image = DiffTensor(np.array([[0.0, 1.0], [0.0, 1.0]]))
        assert ops.smoothed_tv_loss(image, eps=1e-9).item() == pytest.approx(2.0, abs=1e-6)

    def test_tv_of_constant_image_is_eps_per_pixel(self):
        image = DiffTensor(np.full((4, 5), 0.3))
        assert ops.smoothed_tv_loss(image, eps=1e-3).item() == pytest.approx(20 * 1e-3, rel=1e-6)

    def test_matmul_inner_dimension_checked(self):
        with pytest.raises(ShapeError):
            ops.matmul(DiffTensor(np.zeros((2, 3))), DiffTensor(np.zeros((2, 3))))


class TestGradients:
    """Reverse-mode gradients against central differences (64-bit), 20 random cases per op."""

    def test_conv2d(self, case_rng):
        result = check_gradients(
            lambda t: ops.total(ops.square(ops.conv2d(t[0], t[1], t[2]))),
            [
                case_rng.normal(size=(2, 3, 5, 5)),
                case_rng.normal(size=(4, 3, 3, 3)),
                case_rng.normal(size=4),
            ],
        )
        assert result.is_valid, result.relative_errors

    def test_dense_and_sin(self, case_rng):
        result = check_gradients(
            lambda t: ops.total(ops.sin(ops.dense(t[0], t[1], t[2]))),
            [case_rng.normal(size=(6, 4)), case_rng.normal(size=(3, 4)), case_rng.normal(size=3)],
        )
        assert result.is_valid, result.relative_errors

    def test_maxpool_and_upsample(self, case_rng):
        result = check_gradients(
            lambda t: ops.total(ops.square(ops.upsample_nearest2x(ops.maxpool2x2(t[0]), size=(5, 5)))),
            [case_rng.normal(size=(2, 5, 5))],
        )
        assert result.is_valid, result.relative_errors

    def test_relu(self, case_rng):
        target = case_rng.normal(size=(3, 4))
        result = check_gradients(
            lambda t: ops.mse_loss(ops.relu(t[0]), target), [case_rng.normal(size=(3, 4))]
        )
        assert result.is_valid, result.relative_errors

    def test_concat_and_leaky_relu(self, case_rng):
        result = check_gradients(
            lambda t: ops.total(ops.square(ops.leaky_relu(ops.concat_channels(t[0], t[1])))),
            [case_rng.normal(size=(2, 3, 3)), case_rng.normal(size=(1, 3, 3))],
        )
        assert result.is_valid, result.relative_errors

    def test_matmul_and_weighted_error(self, case_rng):
        weights = case_rng.uniform(size=(3, 5))
        target = case_rng.normal(size=(3, 5))
        result = check_gradients(
            lambda t: ops.weighted_sq_error(ops.matmul(t[0], t[1]), target, weights),
            [case_rng.normal(size=(3, 4)), case_rng.normal(size=(4, 5))],
        )
        assert result.is_valid, result.relative_errors

    def test_smoothed_tv(self, case_rng):
        result = check_gradients(
            lambda t: ops.smoothed_tv_loss(t[0], eps=1e-2), [case_rng.normal(size=(2, 6, 7))]
        )
        assert result.is_valid, result.relative_errors

    def test_mean_shift_scale_reshape(self, case_rng):
        result = check_gradients(
            lambda t: ops.mean(ops.square(ops.shift(ops.scale(ops.reshape(t[0], (3, 4)), 2.0), -1.0))),
            [case_rng.normal(size=12)],
        )
        assert result.is_valid, result.relative_errors

    def test_gradient_of_a_sum_is_the_sum_of_gradients(self, case_rng):
        with precision("float64"):
            x = case_rng.normal(size=(2, 5, 5))
            kernel = case_rng.normal(size=(3, 2, 3, 3))
            bias = case_rng.normal(size=3)
            target = case_rng.normal(size=(3, 5, 5))

            def first(xv, kv, bv):
                return ops.mse_loss(ops.conv2d(xv, kv, bv), target)

            def second(xv, kv, bv):
                return ops.smoothed_tv_loss(ops.sin(xv))

            combined = _grad(lambda *v: ops.add(first(*v), second(*v)), x, kernel, bias)
            parts = zip(_grad(first, x, kernel, bias), _grad(second, x, kernel, bias))
            separate = [a + b for a, b in parts]
            for joint, summed in zip(combined, separate):
                np.testing.assert_allclose(joint, summed, rtol=1e-12, atol=1e-12)

    def test_checker_flags_a_wrong_rule(self, rng):
        def wrong(t):
            x = t[0]
            return ops.total(emit("cube-ish", (x,), x.values ** 2, lambda g: (3.0 * g * x.values,)))

        result = GradientChecker().check(wrong, [rng.normal(size=5)])
        assert not result.is_valid
        assert result.max_relative_error > 0.1

    def test_checker_limits_entries(self, rng):
        result = GradientChecker(max_entries=10).check(
            lambda t: ops.total(ops.square(t[0])), [rng.normal(size=100)]
        )
        assert result.checked_entries == 10
        assert result.is_valid


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 2 ** 16),
    alpha=st.floats(-3.0, 3.0, allow_nan=False),
    beta=st.floats(-3.0, 3.0, allow_nan=False),
)
def test_conv2d_is_linear_in_its_input(seed, alpha, beta):
    gen = np.random.default_rng(seed)
    with precision("float64"):
        x = gen.normal(size=(2, 4, 4))
        z = gen.normal(size=(2, 4, 4))
        kernel = DiffTensor(gen.normal(size=(3, 2, 3, 3)))
        bias = DiffTensor(np.zeros(3))

        def conv(a):
            return ops.conv2d(DiffTensor(a), kernel, bias).numpy()

        np.testing.assert_allclose(conv(alpha * x + beta * z), alpha * conv(x) + beta * conv(z), atol=1e-9)


def test_conv2d_benchmark(benchmark, rng):
    x = DiffTensor(rng.normal(size=(4, 20, 32, 32)).astype(np.float32))
    kernel = DiffTensor(rng.normal(size=(20, 20, 3, 3)).astype(np.float32))
    bias = DiffTensor(np.zeros(20, dtype=np.float32))
    out = benchmark(ops.conv2d, x, kernel, bias)
    assert out.shape == (4, 20, 32, 32)
