"""Dense tensor engine: conv kernels, layer ops, training loop, gradcheck.

The convolution kernels have two interchangeable backends: a pure-numpy
im2col implementation (default, BLAS-backed) and a compiled direct-loop
extension built from ``_convkernels.pyx``. Set ``EVOCAE_BACKEND=numpy|cython``
or call :func:`set_backend` to choose; ``benchmarks/bench_backends.py``
measures both.
"""

from .backends import active_backend, available_backends, set_backend
from .gradcheck import check_op, finite_difference, gradcheck_network, max_rel_error
from .net import (
    TrainableNetwork,
    adam_step,
    effective_lr,
    init_weights,
    load_weights,
    save_weights,
    train_steps,
)
from .ops import (
    conv2d,
    conv2d_backward,
    mse_loss,
    relu,
    relu_backward,
    skip_add,
    skip_add_backward,
    tconv2d,
    tconv2d_backward,
)

__all__ = [
    "TrainableNetwork",
    "active_backend",
    "adam_step",
    "available_backends",
    "check_op",
    "conv2d",
    "conv2d_backward",
    "effective_lr",
    "finite_difference",
    "gradcheck_network",
    "init_weights",
    "load_weights",
    "max_rel_error",
    "mse_loss",
    "relu",
    "relu_backward",
    "save_weights",
    "set_backend",
    "skip_add",
    "skip_add_backward",
    "tconv2d",
    "tconv2d_backward",
    "train_steps",
]
