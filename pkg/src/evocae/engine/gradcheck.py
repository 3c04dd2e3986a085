"""Finite-difference verification of the analytic gradients.

Runs in float64. The error metric is max over elements of
|analytic - numeric| / max(1, |analytic|, |numeric|), i.e. absolute error for
small gradients and relative error for large ones. Seeds are re-drawn until
no ReLU pre-activation sits within 10 * eps of its kink, so central
differences stay valid.
"""

from __future__ import annotations

import itertools

import numpy as np

from ..network import CaeSpec
from . import ops
from .net import TrainableNetwork, init_weights


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))


def finite_difference(f, array: np.ndarray, eps: float) -> np.ndarray:
    """Central-difference gradient of scalar ``f()`` wrt ``array`` (in place)."""
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f()
        flat[i] = orig - eps
        lo = f()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * eps)
    return grad


def check_op(forward, backward, arrays: list[np.ndarray], eps: float = 1e-5) -> float:
    """Compare ``backward``'s gradients against finite differences.

    ``forward()`` returns the scalar loss; ``backward()`` returns one
    analytic gradient per entry of ``arrays``.
    """
    analytic = backward()
    worst = 0.0
    for array, grad in zip(arrays, analytic):
        numeric = finite_difference(forward, array, eps)
        worst = max(worst, max_rel_error(grad, numeric))
    return worst


def _kink_free(net: TrainableNetwork, x: np.ndarray, eps: float) -> bool:
    _, caches = net._forward_cached(x)
    margin = 10.0 * eps
    for _, pre in caches:
        if pre is not None and np.min(np.abs(pre)) < margin:
            return False
    return True


def gradcheck_network(
    cae: CaeSpec,
    batch: int = 2,
    eps: float = 1e-5,
    seed: int = 0,
    max_seed_tries: int = 50,
) -> float:
    """Max gradient error over every parameter and the input of a float64 net."""
    h, w = cae.input_size
    for attempt in itertools.count():
        rng = np.random.default_rng(seed + attempt)
        net = init_weights(cae, rng, dtype=np.float64)
        x = rng.uniform(-1.0, 1.0, size=(batch, cae.input_channels, h, w))
        target = rng.uniform(0.0, 1.0, size=x.shape)
        if _kink_free(net, x, eps):
            break
        if attempt + 1 >= max_seed_tries:
            break

    def loss_only() -> float:
        out = net.forward(x)
        loss, _ = ops.mse_loss(out, target)
        return loss

    loss, grads, grad_input = net.forward_backward(x, target)
    worst = max_rel_error(grad_input, finite_difference(loss_only, x, eps))
    for layer, (gw, gb) in zip(net.layers, grads):
        worst = max(worst, max_rel_error(gw, finite_difference(loss_only, layer.weight, eps)))
        worst = max(worst, max_rel_error(gb, finite_difference(loss_only, layer.bias, eps)))
    return worst
