"""Image ingestion, splitting, patch extraction, corruption, synthetic sets.

Images are (channels, H, W) float32 arrays with intensities in [0, 1].
Corruption never mutates its input and is deterministic given the RNG state.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, DataError

log = logging.getLogger(__name__)

SUPPORTED_SUFFIXES = (".png", ".bmp", ".ppm", ".pgm", ".pbm", ".tif", ".tiff")


@dataclass
class ImageSet:
    """Homogeneous-channel list of images, each (C, H, W) in [0, 1]."""

    images: list[np.ndarray]
    labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.labels:
            self.labels = [str(i) for i in range(len(self.images))]

    def __len__(self) -> int:
        return len(self.images)

    @property
    def channels(self) -> int:
        return self.images[0].shape[0]


class CorruptionKind(Enum):
    NONE = "none"
    CENTER = "center"
    PIXEL = "pixel"
    HALF = "half"
    NOISE = "noise"


@dataclass(frozen=True)
class CorruptionSpec:
    """Parametric corruption: block/pixel/half masks or additive Gaussian noise.

    ``amount`` means: side fraction for CENTER, drop probability for PIXEL,
    noise sigma on the 0..255 scale for NOISE; unused otherwise. Masked
    pixels are set to ``fill`` in every channel.
    """

    kind: CorruptionKind
    amount: float = 0.0
    fill: float = 0.0

    def __post_init__(self):
        if self.kind is CorruptionKind.CENTER and not 0.0 < self.amount < 1.0:
            raise ConfigError(f"center mask side fraction must be in (0, 1): {self.amount}")
        if self.kind is CorruptionKind.PIXEL and not 0.0 <= self.amount < 1.0:
            raise ConfigError(f"pixel drop probability must be in [0, 1): {self.amount}")
        if self.kind is CorruptionKind.NOISE and self.amount < 0.0:
            raise ConfigError(f"noise sigma must be >= 0: {self.amount}")

    def describe(self) -> str:
        if self.kind in (CorruptionKind.NONE, CorruptionKind.HALF):
            return self.kind.value
        return f"{self.kind.value}:{self.amount:g}"

    @classmethod
    def parse(cls, text: str, fill: float = 0.0) -> "CorruptionSpec":
        """Parse 'none', 'half', 'center:0.5', 'pixel:0.8' or 'noise:30'."""
        head, _, tail = text.strip().partition(":")
        try:
            kind = CorruptionKind(head.lower())
        except ValueError:
            raise ConfigError(
                f"unknown corruption {head!r}; choices: "
                f"{[k.value for k in CorruptionKind]}"
            ) from None
        amount = 0.0
        if tail:
            try:
                amount = float(tail)
            except ValueError:
                raise ConfigError(f"bad corruption amount {tail!r}") from None
        elif kind is CorruptionKind.CENTER:
            amount = 0.5
        elif kind is CorruptionKind.PIXEL:
            amount = 0.8
        return cls(kind=kind, amount=amount, fill=fill)


def load_images(directory, expected_channels: int) -> ImageSet:
    """Load every supported image below ``directory`` in lexicographic order.

    Unreadable files are skipped with a warning; an empty result is an error.
    Values are normalized so 8-bit 255 maps to exactly 1.0.
    """
    directory = Path(directory)
    if expected_channels not in (1, 3):
        raise ConfigError(f"expected_channels must be 1 or 3: {expected_channels}")
    if not directory.is_dir():
        raise DataError(f"{directory} is not a directory")
    paths = sorted(
        p for p in directory.iterdir() if p.suffix.lower() in SUPPORTED_SUFFIXES
    )
    images, labels = [], []
    for path in paths:
        try:
            with Image.open(path) as img:
                img = img.convert("L" if expected_channels == 1 else "RGB")
                arr = np.asarray(img, dtype=np.float32) / 255.0
        except (OSError, UnidentifiedImageError) as exc:
            log.warning("skipping unreadable image %s: %s", path, exc)
            continue
        if arr.ndim == 2:
            arr = arr[None, :, :]
        else:
            arr = arr.transpose(2, 0, 1)
        images.append(np.ascontiguousarray(arr))
        labels.append(path.name)
    if not images:
        raise DataError(f"no readable images found in {directory}")
    return ImageSet(images=images, labels=labels)


def split(
    image_set: ImageSet, fractions: tuple[float, float, float], seed: int
) -> tuple[ImageSet, ImageSet, ImageSet]:
    """Seed-deterministic shuffle then partition into train/val/test."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1: {fractions}")
    n = len(image_set)
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(np.floor(fractions[0] * n))
    n_val = int(np.floor(fractions[1] * n))
    cuts = (order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :])
    parts = tuple(
        ImageSet(
            images=[image_set.images[i] for i in idx],
            labels=[image_set.labels[i] for i in idx],
        )
        for idx in cuts
    )
    if any(len(p) == 0 for p in parts):
        raise DataError(
            f"split of {n} images with fractions {fractions} left an empty part"
        )
    return parts


def extract_patches(
    image: np.ndarray, size: int, count: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Uniformly random ``size x size`` crops fully inside the image."""
    _, h, w = image.shape
    if h < size or w < size:
        raise DataError(f"image {h}x{w} is smaller than the patch size {size}")
    tops = rng.integers(0, h - size + 1, size=count)
    lefts = rng.integers(0, w - size + 1, size=count)
    return [
        np.ascontiguousarray(image[:, t : t + size, l : l + size])
        for t, l in zip(tops, lefts)
    ]


def corrupt(
    clean_batch: np.ndarray, spec: CorruptionSpec, rng: np.random.Generator
) -> np.ndarray:
    """Apply the corruption to a (B, C, H, W) batch; the input stays untouched."""
    out = clean_batch.copy()
    b, _, h, w = out.shape
    if spec.kind is CorruptionKind.NONE:
        return out
    if spec.kind is CorruptionKind.CENTER:
        side = int(round(spec.amount * min(h, w)))
        top = (h - side) // 2
        left = (w - side) // 2
        out[:, :, top : top + side, left : left + side] = spec.fill
        return out
    if spec.kind is CorruptionKind.PIXEL:
        drop = int(np.floor(spec.amount * h * w))
        for i in range(b):
            flat = rng.permutation(h * w)[:drop]
            rows, cols = np.unravel_index(flat, (h, w))
            out[i, :, rows, cols] = spec.fill
        return out
    if spec.kind is CorruptionKind.HALF:
        for i in range(b):
            choice = int(rng.integers(4))
            if choice == 0:
                out[i, :, :, : w // 2] = spec.fill
            elif choice == 1:
                out[i, :, :, w - w // 2 :] = spec.fill
            elif choice == 2:
                out[i, :, : h // 2, :] = spec.fill
            else:
                out[i, :, h - h // 2 :, :] = spec.fill
        return out
    # Gaussian noise, sigma given on the 0..255 scale.
    noise = rng.normal(0.0, spec.amount / 255.0, size=out.shape)
    np.clip(out + noise.astype(out.dtype), 0.0, 1.0, out=out)
    return out


def synth_dataset(
    kind: str, n: int, size: int, seed: int, channels: int = 1
) -> ImageSet:
    """Procedural desk-scale image sets with learnable structure.

    Kinds: ``gradients`` (smooth oriented ramps), ``rectangles`` (binary
    axis-aligned boxes), ``digits`` (seven-segment style glyphs).
    """
    if n < 1 or size < 4:
        raise ConfigError(f"need n >= 1 and size >= 4, got n={n} size={size}")
    if channels not in (1, 3):
        raise ConfigError(f"channels must be 1 or 3: {channels}")
    rng = np.random.default_rng(seed)
    makers = {
        "gradients": _synth_gradient,
        "rectangles": _synth_rectangles,
        "digits": _synth_digit,
    }
    if kind not in makers:
        raise ConfigError(f"unknown synthetic kind {kind!r}; choices: {sorted(makers)}")
    images = [makers[kind](size, channels, rng) for _ in range(n)]
    labels = [f"{kind}-{i:04d}" for i in range(n)]
    return ImageSet(images=images, labels=labels)


def _synth_gradient(size: int, channels: int, rng: np.random.Generator) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float32) / max(size - 1, 1)
    img = np.empty((channels, size, size), dtype=np.float32)
    for c in range(channels):
        angle = rng.uniform(0.0, 2.0 * np.pi)
        phase = rng.uniform(0.0, 1.0)
        ramp = np.cos(angle) * xs + np.sin(angle) * ys + phase
        lo, hi = ramp.min(), ramp.max()
        img[c] = (ramp - lo) / max(hi - lo, 1e-6)
    return img


def _synth_rectangles(size: int, channels: int, rng: np.random.Generator) -> np.ndarray:
    img = np.zeros((channels, size, size), dtype=np.float32)
    for _ in range(int(rng.integers(1, 4))):
        h = int(rng.integers(size // 4, max(size // 2, size // 4 + 1)))
        w = int(rng.integers(size // 4, max(size // 2, size // 4 + 1)))
        top = int(rng.integers(0, size - h + 1))
        left = int(rng.integers(0, size - w + 1))
        img[:, top : top + h, left : left + w] = 1.0
    return img


# Segment occupancy for digits 0-9: (top, top-left, top-right, middle,
# bottom-left, bottom-right, bottom).
_SEGMENTS = {
    0: (1, 1, 1, 0, 1, 1, 1),
    1: (0, 0, 1, 0, 0, 1, 0),
    2: (1, 0, 1, 1, 1, 0, 1),
    3: (1, 0, 1, 1, 0, 1, 1),
    4: (0, 1, 1, 1, 0, 1, 0),
    5: (1, 1, 0, 1, 0, 1, 1),
    6: (1, 1, 0, 1, 1, 1, 1),
    7: (1, 0, 1, 0, 0, 1, 0),
    8: (1, 1, 1, 1, 1, 1, 1),
    9: (1, 1, 1, 1, 0, 1, 1),
}


def _synth_digit(size: int, channels: int, rng: np.random.Generator) -> np.ndarray:
    digit = int(rng.integers(10))
    top, tl, tr, mid, bl, br, bottom = _SEGMENTS[digit]
    img = np.zeros((channels, size, size), dtype=np.float32)
    t = max(size // 8, 1)  # stroke thickness
    m = size // 2
    if top:
        img[:, 0:t, t : size - t] = 1.0
    if mid:
        img[:, m - t // 2 : m - t // 2 + t, t : size - t] = 1.0
    if bottom:
        img[:, size - t :, t : size - t] = 1.0
    if tl:
        img[:, 0:m, 0:t] = 1.0
    if bl:
        img[:, m:, 0:t] = 1.0
    if tr:
        img[:, 0:m, size - t :] = 1.0
    if br:
        img[:, m:, size - t :] = 1.0
    return img


def save_image(array: np.ndarray, path) -> None:
    """Write a (C, H, W) [0, 1] array as an 8-bit image file."""
    arr = np.clip(array, 0.0, 1.0)
    arr = np.round(arr * 255.0).astype(np.uint8)
    if arr.shape[0] == 1:
        Image.fromarray(arr[0], mode="L").save(path)
    else:
        Image.fromarray(arr.transpose(1, 2, 0), mode="RGB").save(path)
