"""Trainable network instances: weights, forward/backward, ADAM, checkpoints.

The training objective is the per-element mean squared error over the whole
minibatch tensor. A per-image squared norm averaged over the batch differs
from this only by the constant pixel count, so ADAM trajectories are
equivalent up to a learning-rate rescaling.

Weight checkpoint format (little-endian, documented here and in the README):

    magic   4 bytes  b"EVOC"
    u32     format version (1)
    u8      dtype code (0 = float32, 1 = float64)
    u8      task mode (0 = inpainting, 1 = denoising)
    u16     reserved (0)
    u32     input channels
    u32     input height
    u32     input width
    u32     layer count
    u64     ADAM step counter
    per layer:
        u8   kind (0 conv, 1 tconv, 2 output)
        u8   stride
        u8   skip_provider flag
        u8   has skip_source flag
        u32  skip_source (0 when absent)
        u32  in_channels
        u32  out_channels
        u32  kernel
    per layer, in order: raw weight, bias, ADAM m_w, v_w, m_b, v_b buffers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError, TrainingDivergedError
from ..network import CaeSpec, LayerKind, LayerSpec, TaskMode
from . import ops

CHECKPOINT_MAGIC = b"EVOC"
CHECKPOINT_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

_KIND_CODE = {LayerKind.CONV: 0, LayerKind.TCONV: 1, LayerKind.OUTPUT: 2}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}
_MODE_CODE = {TaskMode.INPAINTING: 0, TaskMode.DENOISING: 1}
_CODE_MODE = {v: k for k, v in _MODE_CODE.items()}


def weight_shape(layer: LayerSpec) -> tuple[int, int, int, int]:
    if layer.kind is LayerKind.TCONV:
        return (layer.in_channels, layer.out_channels, layer.kernel, layer.kernel)
    return (layer.out_channels, layer.in_channels, layer.kernel, layer.kernel)


@dataclass
class LayerState:
    spec: LayerSpec
    weight: np.ndarray
    bias: np.ndarray
    m_w: np.ndarray = field(repr=False, default=None)
    v_w: np.ndarray = field(repr=False, default=None)
    m_b: np.ndarray = field(repr=False, default=None)
    v_b: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.m_w is None:
            self.m_w = np.zeros_like(self.weight)
            self.v_w = np.zeros_like(self.weight)
            self.m_b = np.zeros_like(self.bias)
            self.v_b = np.zeros_like(self.bias)


class TrainableNetwork:
    """Instantiated layers plus optimizer state. Single-owner mutable."""

    def __init__(self, cae: CaeSpec, layers: list[LayerState], step: int = 0):
        self.cae = cae
        self.layers = layers
        self.step = step

    @property
    def dtype(self):
        return self.layers[0].weight.dtype

    def parameters(self) -> list[np.ndarray]:
        params = []
        for layer in self.layers:
            params.append(layer.weight)
            params.append(layer.bias)
        return params

    def _apply_layer(self, idx: int, x: np.ndarray) -> np.ndarray:
        layer = self.layers[idx]
        if layer.spec.kind is LayerKind.TCONV:
            return ops.tconv2d(x, layer.weight, layer.bias, layer.spec.stride)
        return ops.conv2d(x, layer.weight, layer.bias, layer.spec.stride)

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, _ = self._forward_cached(x)
        return out

    def _forward_cached(self, x: np.ndarray):
        if x.shape[1] != self.cae.input_channels:
            raise ShapeError(
                f"network expects {self.cae.input_channels} input channels, "
                f"got {x.shape[1]}"
            )
        n = len(self.cae.encoder)
        caches = []  # (layer input, pre-activation) per layer
        skips: dict[int, np.ndarray] = {}
        act = x
        for j, spec in enumerate(self.cae.encoder):
            pre = self._apply_layer(j, act)
            caches.append((act, pre))
            act = ops.relu(pre)
            if spec.skip_provider:
                skips[j] = act
        for i, spec in enumerate(self.cae.decoder):
            pre = self._apply_layer(n + i, act)
            if spec.skip_source is not None:
                pre = ops.skip_add(pre, skips[spec.skip_source])
            caches.append((act, pre))
            act = ops.relu(pre)
        out = self._apply_layer(2 * n, act)
        caches.append((act, None))
        return out, caches

    def forward_backward(self, x: np.ndarray, target: np.ndarray):
        """Returns (loss, per-layer (grad_w, grad_b) list, grad wrt input)."""
        out, caches = self._forward_cached(x)
        loss, grad = ops.mse_loss(out, target)
        n = len(self.cae.encoder)
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.layers)

        act_in, _ = caches[2 * n]
        out_layer = self.layers[2 * n]
        grad_act, gw, gb = ops.conv2d_backward(act_in, out_layer.weight, grad, 1)
        grads[2 * n] = (gw, gb)

        skip_grads: dict[int, np.ndarray] = {}
        for i in reversed(range(n)):
            spec = self.cae.decoder[i]
            layer = self.layers[n + i]
            act_in, pre = caches[n + i]
            grad_pre = ops.relu_backward(pre, grad_act)
            if spec.skip_source is not None:
                branch, through = ops.skip_add_backward(grad_pre)
                skip_grads[spec.skip_source] = branch
                grad_pre = through
            if spec.kind is LayerKind.TCONV:
                grad_act, gw, gb = ops.tconv2d_backward(
                    act_in, layer.weight, grad_pre, spec.stride
                )
            else:
                grad_act, gw, gb = ops.conv2d_backward(
                    act_in, layer.weight, grad_pre, spec.stride
                )
            grads[n + i] = (gw, gb)

        for j in reversed(range(n)):
            spec = self.cae.encoder[j]
            layer = self.layers[j]
            act_in, pre = caches[j]
            if spec.skip_provider:
                grad_act = grad_act + skip_grads[j]
            grad_pre = ops.relu_backward(pre, grad_act)
            grad_act, gw, gb = ops.conv2d_backward(
                act_in, layer.weight, grad_pre, spec.stride
            )
            grads[j] = (gw, gb)

        return loss, grads, grad_act

    def astype(self, dtype) -> "TrainableNetwork":
        layers = [
            LayerState(
                spec=layer.spec,
                weight=layer.weight.astype(dtype),
                bias=layer.bias.astype(dtype),
                m_w=layer.m_w.astype(dtype),
                v_w=layer.v_w.astype(dtype),
                m_b=layer.m_b.astype(dtype),
                v_b=layer.v_b.astype(dtype),
            )
            for layer in self.layers
        ]
        return TrainableNetwork(self.cae, layers, self.step)


def init_weights(
    cae: CaeSpec, rng: np.random.Generator, dtype=np.float32
) -> TrainableNetwork:
    """He-style init: weights ~ Normal(0, sqrt(2 / (in_channels * k^2))), biases 0."""
    layers = []
    for spec in (*cae.encoder, *cae.decoder, cae.output_layer):
        fan_in = spec.in_channels * spec.kernel**2
        std = np.sqrt(2.0 / fan_in)
        weight = rng.normal(0.0, std, size=weight_shape(spec)).astype(dtype)
        bias = np.zeros(spec.out_channels, dtype=dtype)
        layers.append(LayerState(spec=spec, weight=weight, bias=bias))
    return TrainableNetwork(cae, layers)


def adam_step(
    net: TrainableNetwork,
    grads: list[tuple[np.ndarray, np.ndarray]],
    lr: float,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
) -> TrainableNetwork:
    """One ADAM update with bias correction; increments the step counter."""
    for gw, gb in grads:
        if not (np.isfinite(gw).all() and np.isfinite(gb).all()):
            raise TrainingDivergedError("non-finite gradient in ADAM step")
    net.step += 1
    t = net.step
    corr1 = 1.0 - beta1**t
    corr2 = 1.0 - beta2**t
    for layer, (gw, gb) in zip(net.layers, grads):
        for param, grad, m, v in (
            (layer.weight, gw, layer.m_w, layer.v_w),
            (layer.bias, gb, layer.m_b, layer.v_b),
        ):
            m *= beta1
            m += (1.0 - beta1) * grad
            v *= beta2
            v += (1.0 - beta2) * grad * grad
            param -= lr * (m / corr1) / (np.sqrt(v / corr2) + eps)
    return net


def effective_lr(base_lr: float, iteration: int, milestones: tuple[int, ...]) -> float:
    """Learning rate for 1-based ``iteration``: x0.1 after each milestone."""
    decays = sum(1 for m in milestones if m < iteration)
    return base_lr * 0.1**decays


def train_steps(
    net: TrainableNetwork,
    batch_stream,
    iterations: int,
    lr: float,
    milestones: tuple[int, ...] = (),
):
    """Run forward/loss/backward/ADAM for ``iterations`` minibatches.

    ``batch_stream`` yields (corrupted, clean) pairs of fixed shape. Returns
    (net, loss_trace). Raises TrainingDivergedError with the iteration index
    when the loss goes non-finite.
    """
    milestones = tuple(sorted(milestones))
    trace = []
    for it in range(1, iterations + 1):
        corrupted, clean = next(batch_stream)
        loss, grads, _ = net.forward_backward(corrupted, clean)
        if not np.isfinite(loss):
            raise TrainingDivergedError("loss is non-finite", iteration=it)
        try:
            adam_step(net, grads, effective_lr(lr, it, milestones))
        except TrainingDivergedError as exc:
            raise TrainingDivergedError(str(exc), iteration=it) from exc
        trace.append(loss)
    return net, trace


# -- checkpoint io ---------------------------------------------------------

_HEADER = struct.Struct("<4sIBBHIIIIQ")
_LAYER = struct.Struct("<BBBBIIII")


def save_weights(net: TrainableNetwork, path) -> None:
    dtype_code = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}[np.dtype(net.dtype)]
    cae = net.cae
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                CHECKPOINT_MAGIC,
                CHECKPOINT_VERSION,
                dtype_code,
                _MODE_CODE[cae.mode],
                0,
                cae.input_channels,
                cae.input_size[0],
                cae.input_size[1],
                len(net.layers),
                net.step,
            )
        )
        for layer in net.layers:
            spec = layer.spec
            fh.write(
                _LAYER.pack(
                    _KIND_CODE[spec.kind],
                    spec.stride,
                    int(spec.skip_provider),
                    int(spec.skip_source is not None),
                    spec.skip_source or 0,
                    spec.in_channels,
                    spec.out_channels,
                    spec.kernel,
                )
            )
        for layer in net.layers:
            for buf in (layer.weight, layer.bias, layer.m_w, layer.v_w, layer.m_b, layer.v_b):
                fh.write(np.ascontiguousarray(buf, dtype=net.dtype).tobytes())


def load_weights(path) -> TrainableNetwork:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise ShapeError(f"{path}: not a weight checkpoint (bad magic)")
    (
        _,
        version,
        dtype_code,
        mode_code,
        _,
        channels,
        height,
        width,
        n_layers,
        step,
    ) = _HEADER.unpack_from(raw, 0)
    if version != CHECKPOINT_VERSION:
        raise ShapeError(f"{path}: unsupported checkpoint version {version}")
    dtype = {0: np.float32, 1: np.float64}[dtype_code]
    offset = _HEADER.size

    specs: list[LayerSpec] = []
    for _ in range(n_layers):
        kind, stride, provider, has_src, src, in_ch, out_ch, kernel = _LAYER.unpack_from(
            raw, offset
        )
        offset += _LAYER.size
        specs.append(
            LayerSpec(
                kind=_CODE_KIND[kind],
                in_channels=in_ch,
                out_channels=out_ch,
                kernel=kernel,
                stride=stride,
                skip_provider=bool(provider),
                skip_source=src if has_src else None,
                activation=_CODE_KIND[kind] is not LayerKind.OUTPUT,
            )
        )

    itemsize = np.dtype(dtype).itemsize
    layers = []
    for spec in specs:
        wshape = weight_shape(spec)
        bshape = (spec.out_channels,)
        bufs = []
        for shape in (wshape, bshape, wshape, wshape, bshape, bshape):
            count = int(np.prod(shape))
            buf = np.frombuffer(raw, dtype=dtype, count=count, offset=offset).reshape(
                shape
            ).copy()
            offset += count * itemsize
            bufs.append(buf)
        layers.append(
            LayerState(
                spec,
                weight=bufs[0],
                bias=bufs[1],
                m_w=bufs[2],
                v_w=bufs[3],
                m_b=bufs[4],
                v_b=bufs[5],
            )
        )

    n_enc = (n_layers - 1) // 2
    cae = CaeSpec(
        mode=_CODE_MODE[mode_code],
        encoder=tuple(specs[:n_enc]),
        decoder=tuple(specs[n_enc : 2 * n_enc]),
        output_layer=specs[-1],
        input_channels=channels,
        input_size=(height, width),
    )
    return TrainableNetwork(cae, layers, step)
