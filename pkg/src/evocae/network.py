"""Symmetric autoencoder expansion, shape tracing and the architecture-string notation.

Only the encoder path is searched; the decoder is derived from it. Decoder
layer ``i`` (1-based) mirrors encoder layer ``n - i + 1``: same kernel, the
mirror's output width as channel count, and a stride-2 transposed convolution
exactly where the mirror downsampled. Skip connections add an encoder layer's
post-activation maps into the mirrored decoder layer's pre-activation maps.
A fixed 3x3 convolution maps back to the image channels at the end.

Architecture strings follow the grammar::

    arch  := layer ("-" layer)*
    layer := ("C" | "CS") "(" filters "," kernel ")"

``CS`` marks a layer with a skip connection. In inpainting mode a layer
without a skip downsamples with stride 2 instead (the two are exclusive); in
denoising mode every layer keeps stride 1.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .errors import ArchitectureError, ConfigError, ParseError, ShapeError
from .genotype import EncoderSpec, NodeType

OUTPUT_KERNEL = 3
CAE_FORMAT_VERSION = 1


class TaskMode(Enum):
    INPAINTING = "inpainting"
    DENOISING = "denoising"


class LayerKind(Enum):
    CONV = "conv"
    TCONV = "tconv"
    OUTPUT = "output"


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    in_channels: int
    out_channels: int
    kernel: int
    stride: int
    skip_provider: bool = False  # encoder layers: feeds its mirror
    skip_source: int | None = None  # decoder layers: 0-based encoder index
    activation: bool = True  # ReLU after the layer; False for the output conv


@dataclass(frozen=True)
class CaeSpec:
    """Full symmetric network: encoder, mirrored decoder, output layer."""

    mode: TaskMode
    encoder: tuple[LayerSpec, ...]
    decoder: tuple[LayerSpec, ...]
    output_layer: LayerSpec
    input_channels: int
    input_size: tuple[int, int]

    @property
    def layers(self) -> tuple[LayerSpec, ...]:
        return (*self.encoder, *self.decoder, self.output_layer)

    def to_dict(self) -> dict:
        return {
            "version": CAE_FORMAT_VERSION,
            "mode": self.mode.value,
            "input_channels": self.input_channels,
            "input_size": list(self.input_size),
            "encoder": [
                [layer.out_channels, layer.kernel, layer.skip_provider]
                for layer in self.encoder
            ],
        }

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "CaeSpec":
        try:
            if data["version"] != CAE_FORMAT_VERSION:
                raise ConfigError(
                    f"unsupported network format version {data['version']}"
                )
            enc = EncoderSpec(
                layers=tuple(
                    NodeType(int(f), int(k), bool(skip))
                    for f, k, skip in data["encoder"]
                )
            )
            return expand(
                enc,
                TaskMode(data["mode"]),
                int(data["input_channels"]),
                tuple(data["input_size"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed network document: {exc}") from exc

    @classmethod
    def from_text(cls, text: str) -> "CaeSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"network file is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def expand(
    enc: EncoderSpec,
    mode: TaskMode,
    input_channels: int,
    input_size: tuple[int, int],
) -> CaeSpec:
    """Expand a decoded encoder path into the full symmetric network spec.

    Raises ArchitectureError when downsampling would shrink the bottleneck
    below one pixel, or when the mirrored shapes cannot line up for the given
    input size.
    """
    if len(enc) == 0:
        raise ArchitectureError("encoder path is empty")
    if input_channels not in (1, 3):
        raise ArchitectureError(f"input channels must be 1 or 3, got {input_channels}")
    h, w = input_size
    if h < 1 or w < 1:
        raise ArchitectureError(f"invalid input size {input_size}")

    if mode is TaskMode.INPAINTING:
        down = sum(1 for layer in enc.layers if not layer.skip)
        if 2**down > min(h, w):
            raise ArchitectureError(
                f"{down} downsampling layers shrink a {h}x{w} input below one pixel"
            )

    n = len(enc.layers)
    encoder = []
    in_ch = input_channels
    for layer in enc.layers:
        stride = 2 if (mode is TaskMode.INPAINTING and not layer.skip) else 1
        encoder.append(
            LayerSpec(
                kind=LayerKind.CONV,
                in_channels=in_ch,
                out_channels=layer.filters,
                kernel=layer.kernel,
                stride=stride,
                skip_provider=layer.skip,
            )
        )
        in_ch = layer.filters

    decoder = []
    for i in range(n):
        mirror_idx = n - 1 - i
        mirror = encoder[mirror_idx]
        in_ch = encoder[n - 1].out_channels if i == 0 else decoder[i - 1].out_channels
        decoder.append(
            LayerSpec(
                kind=LayerKind.TCONV if mirror.stride == 2 else LayerKind.CONV,
                in_channels=in_ch,
                out_channels=mirror.out_channels,
                kernel=mirror.kernel,
                stride=mirror.stride,
                skip_source=mirror_idx if mirror.skip_provider else None,
            )
        )

    output_layer = LayerSpec(
        kind=LayerKind.OUTPUT,
        in_channels=encoder[0].out_channels,
        out_channels=input_channels,
        kernel=OUTPUT_KERNEL,
        stride=1,
        activation=False,
    )
    cae = CaeSpec(
        mode=mode,
        encoder=tuple(encoder),
        decoder=tuple(decoder),
        output_layer=output_layer,
        input_channels=input_channels,
        input_size=(h, w),
    )
    try:
        trace_shapes(cae)
    except ShapeError as exc:
        raise ArchitectureError(f"mirrored shapes do not line up: {exc}") from exc
    return cae


def layer_output_hw(kind: LayerKind, stride: int, h: int, w: int) -> tuple[int, int]:
    """Spatial output size under the fixed padding geometry.

    Convolutions use zero padding (kernel - 1) / 2, so stride 1 preserves the
    size and stride 2 yields ceil(size / 2). Stride-2 transposed convolutions
    exactly double the size; stride 1 preserves it.
    """
    if kind is LayerKind.TCONV:
        return (h * stride, w * stride)
    if stride == 2:
        return ((h + 1) // 2, (w + 1) // 2)
    return (h, w)


def trace_shapes(cae: CaeSpec) -> list[tuple[int, int, int]]:
    """Per-layer output shapes (C, H, W), validating every structural rule.

    Raises ShapeError naming the offending layer pair when a skip pair or the
    final output shape mismatches.
    """
    h, w = cae.input_size
    shapes: list[tuple[int, int, int]] = []
    ch = cae.input_channels
    provider_shapes: dict[int, tuple[int, int, int]] = {}

    for j, layer in enumerate(cae.encoder):
        if layer.in_channels != ch:
            raise ShapeError(
                f"encoder layer {j + 1} expects {layer.in_channels} channels, gets {ch}"
            )
        h, w = layer_output_hw(layer.kind, layer.stride, h, w)
        if h < 1 or w < 1:
            raise ShapeError(f"encoder layer {j + 1} output shrank to {h}x{w}")
        ch = layer.out_channels
        shapes.append((ch, h, w))
        if layer.skip_provider:
            provider_shapes[j] = (ch, h, w)

    n = len(cae.encoder)
    for i, layer in enumerate(cae.decoder):
        if layer.in_channels != ch:
            raise ShapeError(
                f"decoder layer {i + 1} expects {layer.in_channels} channels, gets {ch}"
            )
        h, w = layer_output_hw(layer.kind, layer.stride, h, w)
        ch = layer.out_channels
        shapes.append((ch, h, w))
        if layer.skip_source is not None:
            provided = provider_shapes[layer.skip_source]
            if provided != (ch, h, w):
                raise ShapeError(
                    f"skip pair mismatch: encoder layer {layer.skip_source + 1} "
                    f"provides {provided}, decoder layer {i + 1} consumes {(ch, h, w)}"
                )

    out = cae.output_layer
    if out.in_channels != ch:
        raise ShapeError(
            f"output layer expects {out.in_channels} channels, gets {ch}"
        )
    h, w = layer_output_hw(out.kind, out.stride, h, w)
    shapes.append((out.out_channels, h, w))
    if (out.out_channels, h, w) != (cae.input_channels, *cae.input_size):
        raise ShapeError(
            f"final output shape {(out.out_channels, h, w)} differs from the input "
            f"shape {(cae.input_channels, *cae.input_size)}"
        )
    return shapes


def param_count(cae: CaeSpec) -> int:
    """Total trainable parameter count (weights plus biases)."""
    total = 0
    for layer in cae.layers:
        total += layer.in_channels * layer.out_channels * layer.kernel**2
        total += layer.out_channels
    return total


def arch_to_string(enc: EncoderSpec) -> str:
    """Canonical text form: layers joined by '-', each as C(F,k) or CS(F,k)."""
    return "-".join(
        f"{'CS' if layer.skip else 'C'}({layer.filters},{layer.kernel})"
        for layer in enc.layers
    )


_LAYER_RE = re.compile(r"\s*(CS|C)\s*\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*")


def parse_arch(text: str) -> EncoderSpec:
    """Parse the architecture-string notation; inverse of arch_to_string.

    Whitespace around tokens is tolerated. Raises ParseError with the
    offending position for malformed input.
    """
    if not text or not text.strip():
        raise ParseError("empty architecture string", position=0)
    layers = []
    pos = 0
    while True:
        match = _LAYER_RE.match(text, pos)
        if not match:
            raise ParseError(
                f"expected C(F,k) or CS(F,k), found {text[pos:pos + 12]!r}",
                position=pos,
            )
        filters = int(match.group(2))
        kernel = int(match.group(3))
        if filters < 1:
            raise ParseError(f"filter count must be positive: {filters}", position=pos)
        if kernel < 1 or kernel % 2 == 0:
            raise ParseError(f"kernel size must be odd: {kernel}", position=pos)
        layers.append(NodeType(filters, kernel, match.group(1) == "CS"))
        pos = match.end()
        if pos == len(text):
            break
        if text[pos] != "-":
            raise ParseError(f"expected '-', found {text[pos]!r}", position=pos)
        pos += 1
    return EncoderSpec(layers=tuple(layers))


def architecture_validator(
    mode: TaskMode, input_channels: int, input_size: tuple[int, int]
) -> Callable[[EncoderSpec], bool]:
    """Validity predicate for mutation: the path must expand and trace cleanly."""

    def valid(enc: EncoderSpec) -> bool:
        try:
            expand(enc, mode, input_channels, input_size)
        except ArchitectureError:
            return False
        return True

    return valid
