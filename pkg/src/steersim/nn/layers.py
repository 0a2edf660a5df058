"""Layer primitives: forward/backward pairs over channels-last arrays.

Conventions
-----------
* Activations are (N, H, W, C) or (N, D); dtype float32 in training,
  float64 in the gradient-check tests.
* Conv weights are (kh, kw, in_c, out_c), fc weights (in_d, out_d),
  biases one per output channel/unit.
* Valid convolution only (no padding); output extent per axis is
  floor((in - k) / stride) + 1.
* Every backward consumes the cache returned by its forward.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels


class ShapeError(ValueError):
    """Operand shapes cannot be combined."""


def _out_extent(n, k, stride):
    return (n - k) // stride + 1


# ---------------------------------------------------------------- conv

def conv_forward(x, weights, bias, stride=1):
    """Valid cross-correlation. Returns (out, cache).

    x: (N, H, W, C); weights: (kh, kw, C, F); bias: (F,).
    out: (N, Ho, Wo, F).
    """
    if x.ndim != 4 or weights.ndim != 4:
        raise ShapeError(f"conv expects 4-d input and weights, got {x.shape} and {weights.shape}")
    N, H, W, C = x.shape
    kh, kw, wc, F = weights.shape
    if wc != C:
        raise ShapeError(f"input channels {x.shape} do not match kernel channels {weights.shape}")
    if kh > H or kw > W:
        raise ShapeError(f"kernel {weights.shape} exceeds input extent {x.shape}")
    if bias.shape != (F,):
        raise ShapeError(f"bias shape {bias.shape} does not match {F} kernels")
    Ho = _out_extent(H, kh, stride)
    Wo = _out_extent(W, kw, stride)
    cols = np.empty((N * Ho * Wo, kh * kw * C), dtype=x.dtype)
    kernels.im2col(x, kh, kw, stride, cols)
    out = cols @ weights.reshape(kh * kw * C, F)
    out += bias
    cache = (x.shape, cols, weights, stride)
    return out.reshape(N, Ho, Wo, F), cache


def conv_backward(cache, grad_out):
    """Gradients of conv_forward; returns (grad_input, grad_weights, grad_bias)."""
    x_shape, cols, weights, stride = cache
    kh, kw, C, F = weights.shape
    N = x_shape[0]
    Ho = _out_extent(x_shape[1], kh, stride)
    Wo = _out_extent(x_shape[2], kw, stride)
    if grad_out.shape != (N, Ho, Wo, F):
        raise ShapeError(f"grad shape {grad_out.shape} does not match forward output {(N, Ho, Wo, F)}")
    g = grad_out.reshape(N * Ho * Wo, F)
    grad_w = (cols.T @ g).reshape(weights.shape)
    grad_b = g.sum(axis=0)
    gcols = g @ weights.reshape(kh * kw * C, F).T
    grad_x = np.zeros(x_shape, dtype=grad_out.dtype)
    kernels.col2im_add(gcols, kh, kw, stride, grad_x)
    return grad_x, grad_w, grad_b


# ------------------------------------------------------------- maxpool

def maxpool_forward(x):
    """2x2 max pooling with stride 2; odd trailing row/column dropped.

    Returns (out, argmax) where argmax codes the winning cell 0..3 in
    row-major window order (ties keep the first maximal element).
    """
    if x.ndim != 4:
        raise ShapeError(f"maxpool expects 4-d input, got {x.shape}")
    N, H, W, C = x.shape
    if H < 2 or W < 2:
        raise ShapeError(f"input {x.shape} smaller than the 2x2 window")
    out = np.empty((N, H // 2, W // 2, C), dtype=x.dtype)
    argmax = np.empty(out.shape, dtype=np.int8)
    kernels.maxpool2x2(x, out, argmax)
    return out, argmax


def maxpool_backward(argmax, grad_out, input_shape):
    """Routes gradient to the recorded argmax positions, zeros elsewhere."""
    dx = np.zeros(input_shape, dtype=grad_out.dtype)
    kernels.maxpool2x2_backward(np.ascontiguousarray(grad_out), argmax, dx)
    return dx


# ---------------------------------------------------------------- relu

def relu(x):
    return np.maximum(x, 0)


def relu_backward(x, grad_out):
    return np.where(x > 0, grad_out, 0).astype(grad_out.dtype, copy=False)


# ------------------------------------------------------------- dropout

def dropout(x, rate, rng, mode):
    """Inverted dropout. Returns (out, mask); mask is None when inactive.

    Train mode zeroes each element with probability `rate` and scales
    survivors by 1/(1-rate) so the expectation is preserved; eval mode
    is the identity.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "eval" or rate == 0.0:
        return x, None
    keep = rng.random(x.shape, dtype=np.float32) >= rate
    mask = keep.astype(x.dtype) / x.dtype.type(1.0 - rate)
    return x * mask, mask


def dropout_backward(mask, grad_out):
    if mask is None:
        return grad_out
    return grad_out * mask


# ------------------------------------------------------- fully connected

def fc_forward(x, weights, bias):
    """y = x @ W + b with x (N, D), W (D, U), b (U,). Returns (out, cache)."""
    if x.ndim != 2 or weights.ndim != 2:
        raise ShapeError(f"fc expects 2-d input and weights, got {x.shape} and {weights.shape}")
    if x.shape[1] != weights.shape[0]:
        raise ShapeError(f"input width {x.shape} does not match weights {weights.shape}")
    if bias.shape != (weights.shape[1],):
        raise ShapeError(f"bias shape {bias.shape} does not match {weights.shape[1]} units")
    out = x @ weights
    out += bias
    return out, (x, weights)


def fc_backward(cache, grad_out):
    x, weights = cache
    if grad_out.shape != (x.shape[0], weights.shape[1]):
        raise ShapeError(f"grad shape {grad_out.shape} does not match output {(x.shape[0], weights.shape[1])}")
    grad_w = x.T @ grad_out
    grad_x = grad_out @ weights.T
    grad_b = grad_out.sum(axis=0)
    return grad_x, grad_w, grad_b


# ---------------------------------------------------------------- loss

@dataclass(frozen=True)
class BatchLoss:
    """Scalar regression loss over one batch: sum of squared errors / 2N."""

    value: float
    batch_size: int
    per_sample_sq_err: np.ndarray = field(repr=False)

    def __post_init__(self):
        expected = float(self.per_sample_sq_err.sum()) / (2 * self.batch_size)
        if abs(self.value - expected) > 1e-9 * max(abs(expected), 1e-30):
            raise ValueError(f"loss value {self.value} inconsistent with per-sample errors ({expected})")


def euclidean_loss(predictions, labels):
    """Mean halved squared error over the batch.

    E = sum_n (yhat_n - y_n)^2 / (2 N). Raises on an empty batch.
    """
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if p.shape != y.shape:
        raise ShapeError(f"predictions {p.shape} and labels {y.shape} differ in length")
    if p.size == 0:
        raise ValueError("empty batch")
    sq = (p - y) ** 2
    return BatchLoss(value=float(sq.sum()) / (2 * p.size), batch_size=p.size, per_sample_sq_err=sq)


def euclidean_loss_grad(predictions, labels):
    """dE/dyhat_n = (yhat_n - y_n) / N, shaped like predictions."""
    p = np.asarray(predictions)
    y = np.asarray(labels, dtype=p.dtype).reshape(p.shape)
    if p.size == 0:
        raise ValueError("empty batch")
    return (p - y) / p.dtype.type(p.shape[0])
