"""Differentiable operations over :class:`DiffTensor`.

Every op computes its forward value with numpy, and registers a backward
rule mapping the upstream gradient to one gradient per input. Reductions
and contractions accumulate in 64-bit regardless of the tensor precision.
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from ghostkit.errors import ShapeError
from ghostkit.tensor.tape import DiffTensor, Operand, default_dtype, emit

DEFAULT_TV_EPS = 1e-6


def as_tensor(value: Operand) -> DiffTensor:
    if isinstance(value, DiffTensor):
        return value
    return DiffTensor(np.array(value, dtype=default_dtype(), copy=True))


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _out_dtype(*tensors: DiffTensor) -> np.dtype:
    return np.result_type(*(t.values.dtype for t in tensors))


# ---------------------------------------------------------------------------
# Elementwise arithmetic
# ---------------------------------------------------------------------------

def add(a: Operand, b: Operand) -> DiffTensor:
    a, b = as_tensor(a), as_tensor(b)
    values = a.values + b.values
    return emit(
        "add", (a, b), values,
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: Operand, b: Operand) -> DiffTensor:
    a, b = as_tensor(a), as_tensor(b)
    values = a.values - b.values
    return emit(
        "sub", (a, b), values,
        lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)),
    )


def mul(a: Operand, b: Operand) -> DiffTensor:
    a, b = as_tensor(a), as_tensor(b)
    values = a.values * b.values
    return emit(
        "mul", (a, b), values,
        lambda g: (_unbroadcast(g * b.values, a.shape), _unbroadcast(g * a.values, b.shape)),
    )


def scale(a: DiffTensor, factor: float) -> DiffTensor:
    values = (a.values * factor).astype(a.values.dtype, copy=False)
    return emit("scale", (a,), values, lambda g: (g * factor,))


def shift(a: DiffTensor, offset: float) -> DiffTensor:
    values = (a.values + offset).astype(a.values.dtype, copy=False)
    return emit("shift", (a,), values, lambda g: (g,))


def square(a: DiffTensor) -> DiffTensor:
    return emit("square", (a,), a.values * a.values, lambda g: (2.0 * g * a.values,))


def total(a: DiffTensor) -> DiffTensor:
    """Sum of all elements, accumulated in 64-bit."""
    values = np.asarray(a.values.sum(dtype=np.float64), dtype=a.values.dtype)
    return emit("sum", (a,), values, lambda g: (np.broadcast_to(g, a.shape),))


def mean(a: DiffTensor) -> DiffTensor:
    return scale(total(a), 1.0 / max(a.size, 1))


def reshape(a: DiffTensor, shape: Sequence[int]) -> DiffTensor:
    values = a.values.reshape(tuple(shape))
    return emit("reshape", (a,), values, lambda g: (g.reshape(a.shape),))


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------

def matmul(a: Operand, b: Operand) -> DiffTensor:
    """Matrix product of 2D operands (or 1D vectors), 64-bit accumulation."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise ShapeError("matmul", "rank", "1 or 2", (a.ndim, b.ndim))
    inner_a = a.shape[-1]
    inner_b = b.shape[0]
    if inner_a != inner_b:
        raise ShapeError("matmul", "inner", inner_a, inner_b)
    a64 = a.values.astype(np.float64, copy=False)
    b64 = b.values.astype(np.float64, copy=False)
    values = (a64 @ b64).astype(_out_dtype(a, b), copy=False)

    def backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        a2 = a64.reshape(1, -1) if a.ndim == 1 else a64
        b2 = b64.reshape(-1, 1) if b.ndim == 1 else b64
        g2 = g.reshape(a2.shape[0], b2.shape[1])
        return (g2 @ b2.T).reshape(a.shape), (a2.T @ g2).reshape(b.shape)

    return emit("matmul", (a, b), values, backward)


def dense(input: DiffTensor, weight: DiffTensor, bias: DiffTensor) -> DiffTensor:
    """Affine map ``weight @ input + bias`` for input ``[n]`` or a batch ``[B, n]``."""
    if weight.ndim != 2:
        raise ShapeError("dense", "weight rank", 2, weight.ndim)
    m, n = weight.shape
    if input.shape[-1] != n:
        raise ShapeError("dense", "in_features", n, input.shape[-1])
    if bias.shape != (m,):
        raise ShapeError("dense", "out_features", m, bias.shape[0] if bias.ndim else bias.shape)
    x64 = input.values.astype(np.float64, copy=False)
    w64 = weight.values.astype(np.float64, copy=False)
    values = (x64 @ w64.T + bias.values).astype(_out_dtype(input, weight, bias), copy=False)

    def backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        g2 = g.reshape(-1, m)
        x2 = x64.reshape(-1, n)
        return (g2 @ w64).reshape(input.shape), g2.T @ x2, g2.sum(axis=0)

    return emit("dense", (input, weight, bias), values, backward)


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

def relu(a: DiffTensor) -> DiffTensor:
    mask = a.values > 0
    return emit("relu", (a,), np.where(mask, a.values, 0).astype(a.values.dtype), lambda g: (g * mask,))


def leaky_relu(a: DiffTensor, slope: float = 0.2) -> DiffTensor:
    mask = a.values > 0
    factor = np.where(mask, 1.0, slope)
    values = (a.values * factor).astype(a.values.dtype, copy=False)
    return emit("leaky_relu", (a,), values, lambda g: (g * factor,))


def sin(a: DiffTensor) -> DiffTensor:
    return emit("sin", (a,), np.sin(a.values), lambda g: (g * np.cos(a.values),))


# ---------------------------------------------------------------------------
# Convolution, pooling and resampling (layout [B, C, H, W] or [C, H, W])
# ---------------------------------------------------------------------------

def _as_batched(x: DiffTensor, op: str) -> Tuple[DiffTensor, bool]:
    if x.ndim == 4:
        return x, False
    if x.ndim == 3:
        return reshape(x, (1,) + x.shape), True
    raise ShapeError(op, "rank", "3 or 4", x.ndim)


def conv2d(input: DiffTensor, kernel: DiffTensor, bias: DiffTensor) -> DiffTensor:
    """Same-size 2D cross-correlation with zero padding ``(k - 1) / 2``.

    Computed as a sum of ``k * k`` shifted channel contractions, which keeps
    memory at the size of the padded input.
    """
    x, squeeze = _as_batched(input, "conv2d")
    if kernel.ndim != 4:
        raise ShapeError("conv2d", "kernel rank", 4, kernel.ndim)
    c_out, c_in, kh, kw = kernel.shape
    if kh != kw:
        raise ShapeError("conv2d", "kernel width", kh, kw)
    if kh % 2 == 0:
        raise ShapeError("conv2d", "kernel size", "odd", kh)
    if x.shape[1] != c_in:
        raise ShapeError("conv2d", "in_channels", c_in, x.shape[1])
    if bias.shape != (c_out,):
        raise ShapeError("conv2d", "out_channels", c_out, bias.shape)

    batch, _, height, width = x.shape
    pad = (kh - 1) // 2
    xp = np.pad(x.values.astype(np.float64), ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    w64 = kernel.values.astype(np.float64)
    out = np.zeros((c_out, batch, height, width), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            window = xp[:, :, i:i + height, j:j + width]
            out += np.tensordot(w64[:, :, i, j], window, axes=([1], [1]))
    out = out.transpose(1, 0, 2, 3) + bias.values.reshape(1, c_out, 1, 1)
    values = np.ascontiguousarray(out.astype(_out_dtype(x, kernel, bias), copy=False))

    def backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        grad_xp = np.zeros_like(xp)
        grad_w = np.zeros_like(w64)
        for i in range(kh):
            for j in range(kw):
                window = xp[:, :, i:i + height, j:j + width]
                grad_w[:, :, i, j] = np.tensordot(g, window, axes=([0, 2, 3], [0, 2, 3]))
                grad_xp[:, :, i:i + height, j:j + width] += np.tensordot(
                    g, w64[:, :, i, j], axes=([1], [0])
                ).transpose(0, 3, 1, 2)
        grad_x = grad_xp[:, :, pad:pad + height, pad:pad + width]
        return grad_x, grad_w, g.sum(axis=(0, 2, 3))

    result = emit("conv2d", (x, kernel, bias), values, backward)
    return reshape(result, result.shape[1:]) if squeeze else result


def maxpool2x2(input: DiffTensor) -> DiffTensor:
    """2x2 max pooling with stride 2.

    Odd spatial sizes are first extended by replicating the last row or
    column. Gradients go to the first maximal element in row-major order.
    """
    x, squeeze = _as_batched(input, "maxpool2x2")
    batch, channels, height, width = x.shape
    padded = x.values
    if height % 2 or width % 2:
        padded = np.pad(padded, ((0, 0), (0, 0), (0, height % 2), (0, width % 2)), mode="edge")
    ph, pw = padded.shape[2] // 2, padded.shape[3] // 2
    blocks = padded.reshape(batch, channels, ph, 2, pw, 2).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(batch, channels, ph, pw, 4)
    winner = np.argmax(blocks, axis=-1)
    values = np.take_along_axis(blocks, winner[..., None], axis=-1)[..., 0]

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        grad_blocks = np.zeros(blocks.shape, dtype=np.float64)
        np.put_along_axis(grad_blocks, winner[..., None], g[..., None], axis=-1)
        grad = grad_blocks.reshape(batch, channels, ph, pw, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        grad = grad.reshape(batch, channels, 2 * ph, 2 * pw)
        if height % 2:
            grad[:, :, height - 1, :] += grad[:, :, height, :]
        if width % 2:
            grad[:, :, :, width - 1] += grad[:, :, :, width]
        return (grad[:, :, :height, :width],)

    result = emit("maxpool2x2", (x,), np.ascontiguousarray(values), backward)
    return reshape(result, result.shape[1:]) if squeeze else result


def upsample_nearest2x(input: DiffTensor, size: Optional[Tuple[int, int]] = None) -> DiffTensor:
    """Nearest-neighbour 2x upsampling, optionally cropped to ``size``."""
    x, squeeze = _as_batched(input, "upsample_nearest2x")
    batch, channels, height, width = x.shape
    target_h, target_w = size if size is not None else (2 * height, 2 * width)
    if not (2 * height - 1 <= target_h <= 2 * height and 2 * width - 1 <= target_w <= 2 * width):
        raise ShapeError("upsample_nearest2x", "spatial", (2 * height, 2 * width), (target_h, target_w))
    values = x.values.repeat(2, axis=2).repeat(2, axis=3)[:, :, :target_h, :target_w]

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        full = np.zeros((batch, channels, 2 * height, 2 * width), dtype=np.float64)
        full[:, :, :target_h, :target_w] = g
        return (full.reshape(batch, channels, height, 2, width, 2).sum(axis=(3, 5)),)

    result = emit("upsample_nearest2x", (x,), np.ascontiguousarray(values), backward)
    return reshape(result, result.shape[1:]) if squeeze else result


def concat_channels(a: DiffTensor, b: DiffTensor) -> DiffTensor:
    """Concatenate along the channel axis (axis -3)."""
    if a.ndim != b.ndim:
        raise ShapeError("concat_channels", "rank", a.ndim, b.ndim)
    for axis in (-1, -2):
        if a.shape[axis] != b.shape[axis]:
            name = "width" if axis == -1 else "height"
            raise ShapeError("concat_channels", name, a.shape[axis], b.shape[axis])
    if a.ndim == 4 and a.shape[0] != b.shape[0]:
        raise ShapeError("concat_channels", "batch", a.shape[0], b.shape[0])
    split = a.shape[-3]
    values = np.concatenate([a.values, b.values], axis=-3).astype(_out_dtype(a, b), copy=False)

    def backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return g[..., :split, :, :], g[..., split:, :, :]

    return emit("concat_channels", (a, b), values, backward)


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def mse_loss(pred: DiffTensor, target: Operand) -> DiffTensor:
    """Mean squared error, accumulated in 64-bit."""
    target = as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError("mse_loss", "shape", pred.shape, target.shape)
    return mean(square(sub(pred, target)))


def weighted_sq_error(pred: DiffTensor, target: Operand, weights: Optional[np.ndarray] = None) -> DiffTensor:
    """``0.5 * sum(weights * (pred - target)**2)`` with broadcasting of target/weights."""
    target = as_tensor(target)
    diff = pred.values.astype(np.float64) - target.values.astype(np.float64)
    w = np.ones_like(diff) if weights is None else np.broadcast_to(np.asarray(weights, dtype=np.float64), diff.shape)
    values = np.asarray(0.5 * np.sum(w * diff * diff), dtype=pred.values.dtype)

    def backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        grad = g * w * diff
        return _unbroadcast(grad, pred.shape), -_unbroadcast(grad, target.shape)

    return emit("weighted_sq_error", (pred, target), values, backward)


def smoothed_tv_loss(image: DiffTensor, eps: float = DEFAULT_TV_EPS) -> DiffTensor:
    """Smoothed isotropic total variation ``sum(sqrt(dx^2 + dy^2 + eps^2))``.

    Forward differences over the last two axes with a Neumann boundary
    (the difference past the last row/column is zero). Leading axes are
    summed over.
    """
    if image.ndim < 2:
        raise ShapeError("smoothed_tv_loss", "rank", ">= 2", image.ndim)
    x = image.values.astype(np.float64)
    dx = np.zeros_like(x)
    dy = np.zeros_like(x)
    dx[..., :, :-1] = x[..., :, 1:] - x[..., :, :-1]
    dy[..., :-1, :] = x[..., 1:, :] - x[..., :-1, :]
    magnitude = np.sqrt(dx * dx + dy * dy + eps * eps)
    values = np.asarray(magnitude.sum(), dtype=image.values.dtype)

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        gx = g * dx / magnitude
        gy = g * dy / magnitude
        grad = np.zeros_like(x)
        grad[..., :, :-1] -= gx[..., :, :-1]
        grad[..., :, 1:] += gx[..., :, :-1]
        grad[..., :-1, :] -= gy[..., :-1, :]
        grad[..., 1:, :] += gy[..., :-1, :]
        return (grad,)

    return emit("smoothed_tv_loss", (image,), values, backward)


