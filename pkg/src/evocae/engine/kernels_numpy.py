"""Pure-numpy convolution kernels (im2col / col2im + BLAS matmul).

Backend contract shared with the compiled extension:

* ``conv_forward(x, w, stride)``: cross-correlation with zero padding
  (k - 1) / 2. ``x`` is (B, Ci, H, W), ``w`` is (Co, Ci, k, k); output is
  (B, Co, OH, OW) with OH = floor((H - 1) / stride) + 1.
* ``conv_backward_input(g, w, stride, input_hw)``: adjoint of conv_forward,
  scattering (B, Co, OH, OW) gradients back to (B, Ci, H, W).
* ``conv_backward_weight(x, g, stride, kernel)``: weight gradient
  (Co, Ci, k, k) accumulated over the batch.

Bias handling lives in :mod:`evocae.engine.ops`, not here.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

name = "numpy"


def _out_hw(h: int, w: int, stride: int) -> tuple[int, int]:
    return (h - 1) // stride + 1, (w - 1) // stride + 1


def _im2col(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """(B, Ci, H, W) -> (B, Ci*k*k, OH*OW) patch matrix."""
    b, ci, h, w = x.shape
    pad = (kernel - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(xp, (kernel, kernel), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]
    oh, ow = windows.shape[2], windows.shape[3]
    cols = windows.transpose(0, 1, 4, 5, 2, 3).reshape(b, ci * kernel * kernel, oh * ow)
    return np.ascontiguousarray(cols)


def _col2im(
    cols: np.ndarray, input_hw: tuple[int, int], channels: int, kernel: int, stride: int
) -> np.ndarray:
    """Adjoint of _im2col: scatter-add patches back onto the padded image."""
    b = cols.shape[0]
    h, w = input_hw
    pad = (kernel - 1) // 2
    oh, ow = _out_hw(h, w, stride)
    xp = np.zeros((b, channels, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    cols6 = cols.reshape(b, channels, kernel, kernel, oh, ow)
    for kh in range(kernel):
        for kw in range(kernel):
            xp[:, :, kh : kh + stride * oh : stride, kw : kw + stride * ow : stride] += (
                cols6[:, :, kh, kw]
            )
    if pad:
        return np.ascontiguousarray(xp[:, :, pad : pad + h, pad : pad + w])
    return xp


def conv_forward(x: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    b, _, h, width = x.shape
    co, ci, kernel, _ = w.shape
    oh, ow = _out_hw(h, width, stride)
    cols = _im2col(x, kernel, stride)
    out = np.matmul(w.reshape(co, ci * kernel * kernel), cols)
    return out.reshape(b, co, oh, ow)


def conv_backward_input(
    g: np.ndarray, w: np.ndarray, stride: int, input_hw: tuple[int, int]
) -> np.ndarray:
    b, co = g.shape[0], g.shape[1]
    _, ci, kernel, _ = w.shape
    g2 = g.reshape(b, co, -1)
    cols = np.matmul(w.reshape(co, ci * kernel * kernel).T, g2)
    return _col2im(cols, input_hw, ci, kernel, stride)


def conv_backward_weight(
    x: np.ndarray, g: np.ndarray, stride: int, kernel: int
) -> np.ndarray:
    b, ci = x.shape[0], x.shape[1]
    co = g.shape[1]
    cols = _im2col(x, kernel, stride)
    g2 = g.reshape(b, co, -1)
    gw = np.einsum("bol,bkl->ok", g2, cols, optimize=True)
    return gw.reshape(co, ci, kernel, kernel)
