"""Forward/backward pairs for the 1-D convolutional feature extractor.

Tensors are ``(batch, channels, length)``; a ``(channels, length)`` input is
treated as a batch of one.  Each ``*_forward`` returns ``(out, cache)`` and
the matching ``*_backward`` consumes ``(dout, cache)``.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ContractViolation

LEAKY_SLOPE = 0.01


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    return (x[None], True) if x.ndim == 2 else (x, False)


def conv1d_output_length(length: int, kernel: int, stride: int = 1) -> int:
    if length < kernel:
        raise ContractViolation(f"input length {length} shorter than kernel {kernel}")
    return (length - kernel) // stride + 1


def conv1d_forward(x, W, b, stride: int = 1):
    """Valid cross-correlation: ``out[o, l] = b[o] + sum_c,j W[o,c,j] x[c, l*stride + j]``."""
    x, squeeze = _as_batch(x)
    k = W.shape[2]
    L_out = conv1d_output_length(x.shape[2], k, stride)
    cols = sliding_window_view(x, k, axis=2)[:, :, ::stride, :][:, :, :L_out]
    out = np.einsum("bclk,ock->bol", cols, W, optimize=True) + b[None, :, None]
    cache = (x, W, stride, squeeze)
    return (out[0] if squeeze else out), cache


def conv1d_backward(dout, cache):
    x, W, stride, squeeze = cache
    dout = dout[None] if squeeze else dout
    k = W.shape[2]
    L_out = dout.shape[2]
    cols = sliding_window_view(x, k, axis=2)[:, :, ::stride, :][:, :, :L_out]
    dW = np.einsum("bol,bclk->ock", dout, cols, optimize=True)
    db = dout.sum(axis=(0, 2))
    dx = np.zeros_like(x)
    span = stride * (L_out - 1) + 1
    for j in range(k):
        dx[:, :, j:j + span:stride] += np.einsum("bol,oc->bcl", dout, W[:, :, j], optimize=True)
    return (dx[0] if squeeze else dx), dW, db


def batchnorm1d_forward(x, gamma, beta, running_mean, running_var, eps: float = 1e-5,
                        mode: str = "train", momentum: float = 0.9):
    """Per-channel normalization over batch (and length, for 3-D input).

    In train mode the running statistics arrays are updated in place with
    the biased batch variance, so infer mode on a fixed batch converges to
    the train-mode output.
    """
    x = np.asarray(x, dtype=float)
    axes = (0, 2) if x.ndim == 3 else (0,)
    shape = (1, -1, 1) if x.ndim == 3 else (1, -1)
    if mode == "train":
        if x.shape[0] < 2:
            raise ContractViolation("batch normalization in train mode needs batch size >= 2")
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        running_mean *= momentum
        running_mean += (1 - momentum) * mean
        running_var *= momentum
        running_var += (1 - momentum) * var
    elif mode == "infer":
        mean, var = running_mean, running_var
    else:
        raise ContractViolation(f"unknown batchnorm mode {mode!r}")
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean.reshape(shape)) * inv.reshape(shape)
    out = gamma.reshape(shape) * xhat + beta.reshape(shape)
    return out, (xhat, inv, gamma, axes, shape, mode)


def batchnorm1d_backward(dout, cache):
    xhat, inv, gamma, axes, shape, mode = cache
    dgamma = np.sum(dout * xhat, axis=axes)
    dbeta = np.sum(dout, axis=axes)
    dxhat = dout * gamma.reshape(shape)
    if mode == "infer":
        return dxhat * inv.reshape(shape), dgamma, dbeta
    m = xhat.size / xhat.shape[1]
    dx = (inv.reshape(shape) / m) * (
        m * dxhat
        - dxhat.sum(axis=axes, keepdims=True)
        - xhat * np.sum(dxhat * xhat, axis=axes, keepdims=True)
    )
    return dx, dgamma, dbeta


def leaky_relu_forward(x, slope: float = LEAKY_SLOPE):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x, slope * x), (x, slope)


def leaky_relu_backward(dout, cache):
    x, slope = cache
    return np.where(x > 0, dout, slope * dout)


def leaky_relu(x, slope: float = LEAKY_SLOPE):
    return leaky_relu_forward(x, slope)[0]


def maxpool1d_forward(x, width: int = 2, stride: int = 2):
    if width < 1 or stride < 1:
        raise ContractViolation("pool width and stride must be >= 1")
    x, squeeze = _as_batch(x)
    L_out = conv1d_output_length(x.shape[2], width, stride)
    win = sliding_window_view(x, width, axis=2)[:, :, ::stride, :][:, :, :L_out]
    arg = win.argmax(axis=3)
    out = np.take_along_axis(win, arg[..., None], axis=3)[..., 0]
    return (out[0] if squeeze else out), (x.shape, arg, stride, squeeze)


def maxpool1d_backward(dout, cache):
    shape, arg, stride, squeeze = cache
    dout = dout[None] if squeeze else dout
    dx = np.zeros(shape)
    B, C, L_out = arg.shape
    pos = arg + stride * np.arange(L_out)
    bi, ci, _ = np.indices(arg.shape)
    np.add.at(dx, (bi, ci, pos), dout)
    return dx[0] if squeeze else dx


def maxpool1d(x, width: int = 2, stride: int = 2):
    return maxpool1d_forward(x, width, stride)[0]


def dropout_forward(x, p: float, rng, train: bool = True):
    """Inverted dropout; identity when not training or ``p == 0``."""
    if not train or p <= 0:
        return x, None
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * mask, mask


def dropout_backward(dout, mask):
    return dout if mask is None else dout * mask


def softmax(z, axis: int = -1):
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)
