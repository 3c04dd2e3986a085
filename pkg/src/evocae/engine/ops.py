"""Differentiable layer operations built on the kernel backends.

Convolution is cross-correlation (no kernel flip) with zero padding
(k - 1) / 2. Transposed convolution is implemented as the exact adjoint of
the matching strided convolution, so a stride-2 transposed convolution takes
H to 2H for every odd kernel size. Transposed-conv weights use the
(in_channels, out_channels, k, k) layout; plain convolutions use
(out_channels, in_channels, k, k).
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from . import backends


def _check4(x: np.ndarray, label: str) -> None:
    if x.ndim != 4:
        raise ShapeError(f"{label} must be 4-d (B, C, H, W), got shape {x.shape}")


def conv2d(x: np.ndarray, w: np.ndarray, bias: np.ndarray, stride: int) -> np.ndarray:
    _check4(x, "conv input")
    if x.shape[1] != w.shape[1]:
        raise ShapeError(
            f"conv input has {x.shape[1]} channels, weight expects {w.shape[1]}"
        )
    if stride not in (1, 2):
        raise ShapeError(f"stride must be 1 or 2, got {stride}")
    out = backends.get().conv_forward(x, w, stride)
    out += bias.reshape(1, -1, 1, 1)
    return out


def conv2d_backward(
    x: np.ndarray, w: np.ndarray, grad_out: np.ndarray, stride: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    backend = backends.get()
    grad_x = backend.conv_backward_input(grad_out, w, stride, x.shape[2:])
    grad_w = backend.conv_backward_weight(x, grad_out, stride, w.shape[2])
    grad_b = grad_out.sum(axis=(0, 2, 3))
    return grad_x, grad_w, grad_b


def tconv2d(x: np.ndarray, w: np.ndarray, bias: np.ndarray, stride: int) -> np.ndarray:
    _check4(x, "tconv input")
    if x.shape[1] != w.shape[0]:
        raise ShapeError(
            f"tconv input has {x.shape[1]} channels, weight expects {w.shape[0]}"
        )
    if stride not in (1, 2):
        raise ShapeError(f"stride must be 1 or 2, got {stride}")
    out_hw = (x.shape[2] * stride, x.shape[3] * stride)
    out = backends.get().conv_backward_input(x, w, stride, out_hw)
    out += bias.reshape(1, -1, 1, 1)
    return out


def tconv2d_backward(
    x: np.ndarray, w: np.ndarray, grad_out: np.ndarray, stride: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    backend = backends.get()
    grad_x = backend.conv_forward(grad_out, w, stride)
    grad_w = backend.conv_backward_weight(grad_out, x, stride, w.shape[2])
    grad_b = grad_out.sum(axis=(0, 2, 3))
    return grad_x, grad_w, grad_b


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(pre: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    # Subgradient at exactly 0 is fixed to 0.
    return grad_out * (pre > 0)


def skip_add(pre_activation: np.ndarray, skip_source: np.ndarray) -> np.ndarray:
    if pre_activation.shape != skip_source.shape:
        raise ShapeError(
            f"skip add operands differ: {pre_activation.shape} vs {skip_source.shape}"
        )
    return pre_activation + skip_source


def skip_add_backward(grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # The upstream gradient flows unchanged to both operands.
    return grad_out, grad_out


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean over all elements of the squared difference, plus its gradient."""
    if pred.shape != target.shape:
        raise ShapeError(f"loss operands differ: {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff, dtype=np.float64))
    grad = diff * (2.0 / diff.size)
    return loss, grad.astype(pred.dtype, copy=False)
