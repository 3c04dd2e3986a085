"""Image-quality scoring: PSNR (the fitness statistic) and SSIM (reporting).

The fitness convention is the arithmetic mean of per-image PSNR values, not
the PSNR of pooled MSE. A zero-MSE pair scores +inf, which orders above every
finite fitness and must never crash selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dataio import CorruptionSpec, ImageSet, corrupt
from .errors import ShapeError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class QualityReport:
    psnr_values: list[float]
    ssim_values: list[float]
    labels: list[str] = field(default_factory=list)
    ssim_fallback: bool = False

    @property
    def count(self) -> int:
        return len(self.psnr_values)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean(self.psnr_values))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean(self.ssim_values))

    def to_csv(self) -> str:
        lines = ["image,psnr_db,ssim"]
        labels = self.labels or [str(i) for i in range(self.count)]
        for label, p, s in zip(labels, self.psnr_values, self.ssim_values):
            lines.append(f"{label},{p:.6g},{s:.6g}")
        lines.append(f"mean,{self.mean_psnr:.6g},{self.mean_ssim:.6g}")
        return "\n".join(lines) + "\n"


def psnr(x: np.ndarray, y: np.ndarray, peak: float = 1.0) -> float:
    """10 * log10(peak^2 / MSE) over all pixels and channels of one image."""
    if x.shape != y.shape:
        raise ShapeError(f"psnr operands differ: {x.shape} vs {y.shape}")
    mse = float(np.mean((x.astype(np.float64) - y.astype(np.float64)) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    window = np.outer(g, g)
    return window / window.sum()


_WINDOW = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)


def _ssim_channel(x: np.ndarray, y: np.ndarray, peak: float) -> tuple[float, bool]:
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    h, w = x.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        # Too small for the sliding window: global statistics instead.
        mu_x, mu_y = x.mean(), y.mean()
        var_x = np.mean((x - mu_x) ** 2)
        var_y = np.mean((y - mu_y) ** 2)
        cov = np.mean((x - mu_x) * (y - mu_y))
        value = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
            (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
        )
        return float(value), True

    wx = sliding_window_view(x, (SSIM_WINDOW, SSIM_WINDOW))
    wy = sliding_window_view(y, (SSIM_WINDOW, SSIM_WINDOW))
    mu_x = np.tensordot(wx, _WINDOW, axes=([2, 3], [0, 1]))
    mu_y = np.tensordot(wy, _WINDOW, axes=([2, 3], [0, 1]))
    ex2 = np.tensordot(wx * wx, _WINDOW, axes=([2, 3], [0, 1]))
    ey2 = np.tensordot(wy * wy, _WINDOW, axes=([2, 3], [0, 1]))
    exy = np.tensordot(wx * wy, _WINDOW, axes=([2, 3], [0, 1]))
    var_x = ex2 - mu_x * mu_x
    var_y = ey2 - mu_y * mu_y
    cov = exy - mu_x * mu_y
    values = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    )
    return float(values.mean()), False


def ssim_with_flag(x: np.ndarray, y: np.ndarray, peak: float = 1.0) -> tuple[float, bool]:
    """(value, used_global_fallback); channels are scored then averaged."""
    if x.shape != y.shape:
        raise ShapeError(f"ssim operands differ: {x.shape} vs {y.shape}")
    x = x.astype(np.float64)
    y = y.astype(np.float64)
    if x.ndim == 2:
        x = x[None]
        y = y[None]
    values, fallback = [], False
    for c in range(x.shape[0]):
        value, used_fallback = _ssim_channel(x[c], y[c], peak)
        values.append(value)
        fallback = fallback or used_fallback
    return float(np.mean(values)), fallback


def ssim(x: np.ndarray, y: np.ndarray, peak: float = 1.0) -> float:
    """Windowed structural similarity (11x11 Gaussian window, sigma 1.5)."""
    return ssim_with_flag(x, y, peak)[0]


def evaluate_set(
    network,
    images: ImageSet,
    corruption: CorruptionSpec,
    seed: int,
    batch_size: int = 16,
    dtype=np.float32,
) -> QualityReport:
    """Corrupt each image deterministically (seeded by index), restore, score.

    Scoring is whole-image against the clean original; masked regions are not
    treated specially. ``network`` is anything with a ``forward(batch)``
    method, or a plain callable.
    """
    forward = getattr(network, "forward", network)
    psnr_values: list[float] = []
    ssim_values: list[float] = []
    fallback = False
    for start in range(0, len(images), batch_size):
        chunk = images.images[start : start + batch_size]
        corrupted = [
            corrupt(
                img[None].astype(dtype),
                corruption,
                np.random.default_rng(np.random.SeedSequence([seed, start + k])),
            )[0]
            for k, img in enumerate(chunk)
        ]
        restored = forward(np.stack(corrupted))
        for img, rec in zip(chunk, restored):
            if img.shape != rec.shape:
                raise ShapeError(
                    f"restored shape {rec.shape} differs from image shape {img.shape}"
                )
            psnr_values.append(psnr(img, rec))
            value, used_fallback = ssim_with_flag(img, rec)
            ssim_values.append(value)
            fallback = fallback or used_fallback
    return QualityReport(
        psnr_values=psnr_values,
        ssim_values=ssim_values,
        labels=list(images.labels),
        ssim_fallback=fallback,
    )
