"""Input-preprocessing defenses and anomaly detection baselines.

JPEG-style compression (blockwise DCT quantization without entropy coding or
chroma subsampling, so it captures the pixel-level effect only), median
filtering, and an MSE threshold detector over model outputs. Defenses apply
to both modalities of a pair identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError
from .imagecore import ImagePair, validate_image
from .metrics import MetricTable

DEFENSE_KINDS = ("none", "jpeg", "median", "mse_detector")

# Standard JPEG luminance quantization table (quality 50 base).
JPEG_LUMA_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)

BLOCK = 8


@dataclass(frozen=True)
class DefenseConfig:
    """One configured defense; kind "none" is an explicit pass-through."""

    kind: str = "none"
    jpeg_quality: int = 75
    median_kernel: int = 3
    mse_threshold: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in DEFENSE_KINDS:
            raise ConfigError(f"unknown defense kind {self.kind!r}; expected one of {DEFENSE_KINDS}")
        if not 1 <= self.jpeg_quality <= 100:
            raise ConfigError(f"jpeg quality must lie in [1, 100], got {self.jpeg_quality}")
        if self.median_kernel < 3 or self.median_kernel % 2 == 0:
            raise ConfigError(f"median kernel must be an odd integer >= 3, got {self.median_kernel}")
        if self.mse_threshold is not None and self.mse_threshold < 0:
            raise ConfigError(f"mse threshold must be non-negative, got {self.mse_threshold}")

    def describe(self) -> str:
        if self.kind == "jpeg":
            return f"jpeg(q={self.jpeg_quality})"
        if self.kind == "median":
            return f"median(k={self.median_kernel})"
        if self.kind == "mse_detector":
            return f"mse_detector(threshold={self.mse_threshold!r})"
        return "none"


def _dct_matrix(n: int = BLOCK) -> np.ndarray:
    k = np.arange(n, dtype=np.float64)
    basis = np.cos(np.pi * (2.0 * k[None, :] + 1.0) * k[:, None] / (2.0 * n))
    basis *= np.sqrt(2.0 / n)
    basis[0, :] = np.sqrt(1.0 / n)
    return basis


_DCT = _dct_matrix()


def quantization_table(quality: int) -> np.ndarray:
    """Luminance table scaled by the standard quality factor, clamped to [1, 255]."""
    if not 1 <= quality <= 100:
        raise ConfigError(f"jpeg quality must lie in [1, 100], got {quality}")
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    table = np.floor((JPEG_LUMA_TABLE * scale + 50.0) / 100.0)
    return np.clip(table, 1.0, 255.0)


def _jpeg_plane(plane: np.ndarray, table: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    pad_h = (-h) % BLOCK
    pad_w = (-w) % BLOCK
    padded = np.pad(plane, ((0, pad_h), (0, pad_w)), mode="edge")
    shifted = padded * 255.0 - 128.0
    nbh = shifted.shape[0] // BLOCK
    nbw = shifted.shape[1] // BLOCK
    blocks = shifted.reshape(nbh, BLOCK, nbw, BLOCK).transpose(0, 2, 1, 3)
    coef = np.einsum("ij,bcjk,lk->bcil", _DCT, blocks, _DCT)
    coef = np.round(coef / table) * table
    rebuilt = np.einsum("ji,bcjk,kl->bcil", _DCT, coef, _DCT)
    out = rebuilt.transpose(0, 2, 1, 3).reshape(nbh * BLOCK, nbw * BLOCK)
    out = (out + 128.0) / 255.0
    return np.clip(out[:h, :w], 0.0, 1.0)


def jpeg_compress(image: np.ndarray, quality: int = 75) -> np.ndarray:
    """Simulate JPEG compression at the given quality on a [0, 1] image.

    Per 8x8 block and per channel: level shift to the 0..255 scale, DCT-II,
    quantize by the quality-scaled luminance table, dequantize, inverse DCT.
    Edge blocks are padded by replication and cropped afterwards.
    """
    arr = validate_image(image)
    table = quantization_table(quality)
    if arr.ndim == 2:
        return _jpeg_plane(arr, table)
    return np.stack([_jpeg_plane(arr[..., c], table) for c in range(arr.shape[2])], axis=-1)


def median_filter(image: np.ndarray, kernel: int = 3) -> np.ndarray:
    """Per-pixel median over a kernel x kernel window, replicated borders."""
    if kernel < 3 or kernel % 2 == 0:
        raise ConfigError(f"median kernel must be an odd integer >= 3, got {kernel}")
    arr = validate_image(image)
    if arr.ndim == 3:
        return np.stack(
            [median_filter(arr[..., c], kernel) for c in range(arr.shape[2])], axis=-1
        )
    pad = kernel // 2
    padded = np.pad(arr, pad, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kernel, kernel))
    return np.median(windows, axis=(2, 3))


def mse_detect(prediction: np.ndarray, reference: np.ndarray, threshold: float) -> tuple[bool, float]:
    """Flag a prediction whose MSE against the reference exceeds the threshold."""
    pred = np.asarray(prediction, dtype=np.float64)
    ref = np.asarray(reference, dtype=np.float64)
    if pred.shape != ref.shape:
        raise ConfigError(f"prediction shape {pred.shape} does not match reference {ref.shape}")
    mse = float(np.mean((pred - ref) ** 2))
    return mse > threshold, mse


def detection_threshold(clean_mses: np.ndarray, quantile: float = 0.95) -> float:
    """Calibrate the detector threshold at a quantile of clean-sample MSEs."""
    values = np.asarray(clean_mses, dtype=np.float64).ravel()
    if values.size == 0:
        raise ConfigError("need at least one clean MSE to calibrate")
    return float(np.quantile(values, quantile))


def apply_defense(pair: ImagePair, config: DefenseConfig) -> ImagePair:
    """Preprocess both modalities of a pair with the configured defense.

    The detector kind is not a preprocessing step and passes images through.
    """
    if config.kind == "jpeg":
        return ImagePair(
            visible=jpeg_compress(pair.visible, config.jpeg_quality),
            infrared=jpeg_compress(pair.infrared, config.jpeg_quality),
        )
    if config.kind == "median":
        return ImagePair(
            visible=median_filter(pair.visible, config.median_kernel),
            infrared=median_filter(pair.infrared, config.median_kernel),
        )
    return pair


def attack_under_defense(
    adversarial: ImagePair,
    defense: DefenseConfig,
    evaluate: Callable[[ImagePair], MetricTable],
) -> MetricTable:
    """Re-evaluate an attacked pair after preprocessing it with a defense.

    `evaluate` queries the target model and computes effectiveness metrics
    for a pair; it is built by the attack layer so ground truth and clean
    references stay in one place.
    """
    return evaluate(apply_defense(adversarial, defense))
