"""Network building blocks: convolution, batch norm, pooling, dropout,
linear layers, and the focal classification loss.

Forward functions take and return autograd Tensors; each records an
analytic backward rule verified against finite differences in the test
suite. Convolutions are evaluated as a single matrix product over an
unrolled (im2col) view of the input, which keeps the arithmetic inside
BLAS.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .autograd import Tensor, make_op
from .errors import ConfigError, DataFormatError, ShapeError

LOG_FLOOR = 1e-12


@dataclass
class LossConfig:
    """Focal loss shape: gamma focuses on hard examples, alpha rescales."""

    gamma: float = 2.0
    alpha: float = 1.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ConfigError(f"gamma must be non-negative, got {self.gamma}")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")


def he_normal(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """Zero-mean normal with std sqrt(2/fan_in), suited to rectifier nets."""
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def _unroll(x: np.ndarray, kernel: int, stride: int, out_len: int) -> np.ndarray:
    """[b, c, L] -> [b, out_len, c, kernel] window gather, copied contiguously."""
    windows = np.lib.stride_tricks.sliding_window_view(x, kernel, axis=2)[:, :, ::stride, :]
    return np.ascontiguousarray(windows.transpose(0, 2, 1, 3))


def _fold(dcols: np.ndarray, padded_len: int, stride: int) -> np.ndarray:
    """Adjoint of _unroll: scatter-add window gradients back onto the axis."""
    b, out_len, c, kernel = dcols.shape
    dx = np.zeros((b, c, padded_len))
    for k in range(kernel):
        dx[:, :, k : k + stride * out_len : stride] += dcols[:, :, :, k].transpose(0, 2, 1)
    return dx


def conv_out_len(length: int, kernel: int, stride: int, padding: int) -> int:
    return (length + 2 * padding - kernel) // stride + 1


def conv1d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation over the time axis with zero padding.

    x: [batch, in_channels, length], weight: [out_channels, in_channels,
    kernel], bias: [out_channels] -> [batch, out_channels, out_length].
    """
    b, c_in, length = x.shape
    c_out, c_in_w, kernel = weight.shape
    if c_in != c_in_w:
        raise ShapeError(f"input has {c_in} channels, kernel expects {c_in_w}")
    if length + 2 * padding < kernel:
        raise ShapeError(f"length {length} with padding {padding} is shorter than kernel {kernel}")
    out_len = conv_out_len(length, kernel, stride, padding)

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    cols = _unroll(xp, kernel, stride, out_len).reshape(b * out_len, c_in * kernel)
    w2 = weight.data.reshape(c_out, c_in * kernel)
    out = (cols @ w2.T).reshape(b, out_len, c_out).transpose(0, 2, 1) + bias.data[None, :, None]

    def backward(g, accumulate):
        g2 = g.transpose(0, 2, 1).reshape(b * out_len, c_out)
        if weight.requires_grad:
            accumulate(weight, (g2.T @ cols).reshape(c_out, c_in, kernel))
        if bias.requires_grad:
            accumulate(bias, g.sum(axis=(0, 2)))
        if x.requires_grad:
            dcols = (g2 @ w2).reshape(b, out_len, c_in, kernel)
            dxp = _fold(dcols, length + 2 * padding, stride)
            accumulate(x, dxp[:, :, padding : padding + length] if padding else dxp)

    return make_op(out, (x, weight, bias), backward)


def maxpool1d(x: Tensor, kernel: int, stride: int, padding: int) -> Tensor:
    """Window maximum over the time axis; padding is -inf and never wins."""
    if padding > kernel // 2:
        raise ConfigError(f"maxpool padding {padding} must not exceed kernel//2 ({kernel // 2})")
    b, c, length = x.shape
    if length + 2 * padding < kernel:
        raise ShapeError(f"maxpool window {kernel} larger than padded length {length + 2 * padding}")
    out_len = conv_out_len(length, kernel, stride, padding)

    xp = x.data
    if padding:
        xp = np.pad(xp, ((0, 0), (0, 0), (padding, padding)), constant_values=-np.inf)
    wins = np.empty((b, c, out_len, kernel))
    for k in range(kernel):
        wins[:, :, :, k] = xp[:, :, k : k + stride * out_len : stride]
    winner = wins.argmax(axis=3)
    out = np.take_along_axis(wins, winner[..., None], axis=3)[..., 0]

    def backward(g, accumulate):
        if not x.requires_grad:
            return
        dxp = np.zeros((b, c, length + 2 * padding))
        for k in range(kernel):
            dxp[:, :, k : k + stride * out_len : stride] += g * (winner == k)
        accumulate(x, dxp[:, :, padding : padding + length] if padding else dxp)

    return make_op(out, (x,), backward)


def adaptive_avg_pool_to_1(x: Tensor) -> Tensor:
    """Mean over the time axis: [b, c, L] -> [b, c, 1]."""
    b, c, length = x.shape
    out = x.data.mean(axis=2, keepdims=True)

    def backward(g, accumulate):
        if x.requires_grad:
            accumulate(x, np.broadcast_to(g / length, (b, c, length)))

    return make_op(out, (x,), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def backward(g, accumulate):
        if x.requires_grad:
            accumulate(x, g * mask)

    return make_op(np.maximum(x.data, 0.0), (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    z = x.data
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)

    def backward(g, accumulate):
        if x.requires_grad:
            accumulate(x, g * out * (1.0 - out))

    return make_op(out, (x,), backward)


def softmax_np(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a plain array (no graph)."""
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis; rows are positive and sum to one."""
    out = softmax_np(x.data)

    def backward(g, accumulate):
        if x.requires_grad:
            inner = (g * out).sum(axis=-1, keepdims=True)
            accumulate(x, out * (g - inner))

    return make_op(out, (x,), backward)


def dropout(x: Tensor, p: float, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout: survivors are rescaled by 1/(1-p) during training,
    so evaluation is the identity."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ConfigError("train-mode dropout needs a random generator")
    keep = rng.random(x.shape) >= p
    factor = keep / (1.0 - p)

    def backward(g, accumulate):
        if x.requires_grad:
            accumulate(x, g * factor)

    return make_op(x.data * factor, (x,), backward)


def batchnorm1d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    eps: float,
    momentum: float,
    training: bool,
) -> Tensor:
    """Per-channel normalization of [b, c, L] activations.

    Training mode normalizes with batch statistics over (batch, time) and
    blends them into the running estimates; eval mode uses the running
    estimates unchanged.
    """
    b, c, length = x.shape
    m = b * length
    if training:
        if m < 2:
            raise ShapeError("train-mode batch norm needs at least 2 values per channel")
        mu = x.data.mean(axis=(0, 2))
        var = x.data.var(axis=(0, 2))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mu = running_mean
        var = running_var

    ivar = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu[None, :, None]) * ivar[None, :, None]
    out = gamma.data[None, :, None] * xhat + beta.data[None, :, None]

    def backward(g, accumulate):
        if gamma.requires_grad:
            accumulate(gamma, (g * xhat).sum(axis=(0, 2)))
        if beta.requires_grad:
            accumulate(beta, g.sum(axis=(0, 2)))
        if not x.requires_grad:
            return
        dxhat = g * gamma.data[None, :, None]
        if training:
            sum_dxhat = dxhat.sum(axis=(0, 2), keepdims=True)
            sum_dxhat_xhat = (dxhat * xhat).sum(axis=(0, 2), keepdims=True)
            dx = (ivar[None, :, None] / m) * (m * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)
        else:
            dx = dxhat * ivar[None, :, None]
        accumulate(x, dx)

    return make_op(out, (x, gamma, beta), backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map: [b, in_features] @ weight.T + bias -> [b, out_features]."""
    if x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"input width {x.shape[-1]} does not match weight width {weight.shape[1]}")
    out = x.data @ weight.data.T + bias.data[None, :]

    def backward(g, accumulate):
        if weight.requires_grad:
            accumulate(weight, g.T @ x.data)
        if bias.requires_grad:
            accumulate(bias, g.sum(axis=0))
        if x.requires_grad:
            accumulate(x, g @ weight.data)

    return make_op(out, (x, weight, bias), backward)


def focal_loss(logits: Tensor, targets: np.ndarray, cfg: LossConfig) -> Tensor:
    """Mean focal loss over a batch of logits.

    p_t is the softmax probability of the true class; each sample
    contributes -alpha * (1 - p_t)**gamma * log(p_t), with the log argument
    floored at 1e-12. With gamma=0 and alpha=1 this is plain cross-entropy.
    """
    targets = np.asarray(targets, dtype=np.int64)
    if logits.data.ndim != 2:
        raise ShapeError(f"logits must be [batch, classes], got {logits.shape}")
    batch, num_classes = logits.shape
    if batch < 1:
        raise ShapeError("focal loss needs at least one sample")
    if targets.shape != (batch,):
        raise ShapeError(f"targets shape {targets.shape} does not match batch {batch}")
    if targets.min() < 0 or targets.max() >= num_classes:
        raise DataFormatError(
            f"target labels must lie in [0, {num_classes}), got range "
            f"[{targets.min()}, {targets.max()}]"
        )

    probs = softmax_np(logits.data)
    rows = np.arange(batch)
    p_t = probs[rows, targets]
    p_floor = np.maximum(p_t, LOG_FLOOR)
    log_pt = np.log(p_floor)
    q = 1.0 - p_t
    loss = float(np.mean(-cfg.alpha * q**cfg.gamma * log_pt))

    def backward(g, accumulate):
        if not logits.requires_grad:
            return
        if cfg.gamma == 0.0:
            dloss_dpt = -cfg.alpha / p_floor
        else:
            # d/dpt of -(1-pt)^g log(pt): the log factor is flat below the floor
            q_safe = np.maximum(q, LOG_FLOOR)
            focus = np.where(q > LOG_FLOOR, cfg.gamma * q_safe ** (cfg.gamma - 1.0) * log_pt, 0.0)
            dloss_dpt = cfg.alpha * (focus - np.where(p_t > LOG_FLOOR, q**cfg.gamma / p_floor, 0.0))
        onehot = np.zeros_like(probs)
        onehot[rows, targets] = 1.0
        dpt_dz = p_t[:, None] * (onehot - probs)
        accumulate(logits, float(g) / batch * dloss_dpt[:, None] * dpt_dz)

    return make_op(np.float64(loss), (logits,), backward)


class Conv1d:
    """1-D convolution layer with He-normal weights and zero bias."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int,
        stride: int = 1,
        padding: int = 0,
        rng: Optional[np.random.Generator] = None,
    ):
        rng = rng or np.random.default_rng(0)
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel
        self.weight = Tensor(
            he_normal(rng, (out_channels, in_channels, kernel), fan_in), requires_grad=True
        )
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return conv1d(x, self.weight, self.bias, self.stride, self.padding)

    def named_parameters(self):
        yield "weight", self.weight, True
        yield "bias", self.bias, False


class BatchNorm1d:
    """Batch normalization state: learnable scale/shift plus running stats."""

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1):
        self.eps = eps
        self.momentum = momentum
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        return batchnorm1d(
            x,
            self.gamma,
            self.beta,
            self.running_mean,
            self.running_var,
            self.eps,
            self.momentum,
            training,
        )

    def named_parameters(self):
        yield "gamma", self.gamma, False
        yield "beta", self.beta, False

    def named_buffers(self):
        yield "running_mean", self.running_mean
        yield "running_var", self.running_var


class Linear:
    """Fully connected layer with He-normal weights and zero bias."""

    def __init__(self, in_features: int, out_features: int, rng: Optional[np.random.Generator] = None):
        rng = rng or np.random.default_rng(0)
        self.weight = Tensor(
            he_normal(rng, (out_features, in_features), in_features), requires_grad=True
        )
        self.bias = Tensor(np.zeros(out_features), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return linear(x, self.weight, self.bias)

    def named_parameters(self):
        yield "weight", self.weight, True
        yield "bias", self.bias, False
