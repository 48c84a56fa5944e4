"""Histogram-of-oriented-gradients features for 32x32 RGB images.

Pipeline: luma grayscale, central-difference gradients with replicated
borders, magnitude-weighted votes into unsigned orientation bins (linear
interpolation between the two nearest bin centers), per-cell histograms,
and L2-Hys block normalization (L2, clip, L2 again).

Coordinates: x is the column index increasing rightward, y the row index
increasing downward; orientation is atan2(gy, gx) folded into [0, 180).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import IMAGE_SIDE, LabeledImageSet
from .errors import ConfigError
from .feature_core import FeatureSet

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# Denominator guard for block normalization; zero-gradient blocks stay zero.
NORM_EPS = 1e-12

# When True, block normalization re-checks its own output bounds.
DEBUG_CHECKS = False


@dataclass(frozen=True)
class HogConfig:
    orientations: int = 9
    cell_size: int = 8
    block_size: int = 2
    block_stride: int = 1
    clip: float = 0.2

    def validate(self) -> None:
        if self.orientations < 2:
            raise ConfigError(f"orientations must be >= 2, got {self.orientations}")
        if self.cell_size < 1 or IMAGE_SIDE % self.cell_size != 0:
            raise ConfigError(
                f"cell_size must divide {IMAGE_SIDE}, got {self.cell_size}"
            )
        if self.block_size < 1 or self.block_size > self.cells_per_axis:
            raise ConfigError(
                f"block_size {self.block_size} exceeds {self.cells_per_axis} "
                "cells per axis"
            )
        if self.block_stride < 1:
            raise ConfigError(f"block_stride must be >= 1, got {self.block_stride}")
        if not 0 < self.clip:
            raise ConfigError(f"clip must be positive, got {self.clip}")

    @property
    def cells_per_axis(self) -> int:
        return IMAGE_SIDE // self.cell_size

    @property
    def blocks_per_axis(self) -> int:
        return (self.cells_per_axis - self.block_size) // self.block_stride + 1

    @property
    def block_dim(self) -> int:
        return self.block_size * self.block_size * self.orientations

    @property
    def feature_dim(self) -> int:
        return self.blocks_per_axis * self.blocks_per_axis * self.block_dim


def grayscale(pixels: np.ndarray) -> np.ndarray:
    """Luma intensities in [0, 1] as a 32x32 float64 matrix."""
    planes = pixels.reshape(3, IMAGE_SIDE, IMAGE_SIDE).astype(np.float64)
    r, g, b = LUMA_WEIGHTS
    return (r * planes[0] + g * planes[1] + b * planes[2]) / 255.0


def _gradients(gray: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    padded = np.pad(gray, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    return gx, gy


def cell_histograms(pixels: np.ndarray, cfg: HogConfig) -> np.ndarray:
    """Magnitude-weighted orientation histograms per cell.

    Returns (cells_y, cells_x, orientations). Each pixel's vote is split
    linearly between the two bin centers nearest its orientation; centers
    sit at (k + 0.5) * 180 / orientations, wrapping at 180.
    """
    cfg.validate()
    gx, gy = _gradients(grayscale(pixels))
    magnitude = np.hypot(gx, gy)
    theta = np.degrees(np.arctan2(gy, gx)) % 180.0

    bin_width = 180.0 / cfg.orientations
    position = theta / bin_width - 0.5
    low = np.floor(position)
    frac = position - low
    low_bin = low.astype(np.int64) % cfg.orientations
    high_bin = (low_bin + 1) % cfg.orientations

    cells = cfg.cells_per_axis
    rows, cols = np.indices((IMAGE_SIDE, IMAGE_SIDE))
    cell_y = rows // cfg.cell_size
    cell_x = cols // cfg.cell_size

    hist = np.zeros((cells, cells, cfg.orientations))
    np.add.at(hist, (cell_y, cell_x, low_bin), magnitude * (1.0 - frac))
    np.add.at(hist, (cell_y, cell_x, high_bin), magnitude * frac)
    return hist


def _normalize_block(block: np.ndarray, clip: float) -> np.ndarray:
    normed = block / (np.linalg.norm(block) + NORM_EPS)
    clipped = np.minimum(normed, clip)
    out = clipped / (np.linalg.norm(clipped) + NORM_EPS)
    if DEBUG_CHECKS:
        if np.linalg.norm(normed) > 1 + 1e-9:
            raise AssertionError("block norm exceeds 1 after L2 step")
        if clipped.max(initial=0.0) > clip + 1e-9:
            raise AssertionError("block element exceeds clip threshold")
    return out


def hog_features(pixels: np.ndarray, cfg: HogConfig | None = None) -> np.ndarray:
    """HOG descriptor of one 3072-byte image; length cfg.feature_dim."""
    cfg = cfg or HogConfig()
    hist = cell_histograms(pixels, cfg)
    nb = cfg.blocks_per_axis
    out = np.empty(cfg.feature_dim)
    pos = 0
    for by in range(nb):
        for bx in range(nb):
            y0 = by * cfg.block_stride
            x0 = bx * cfg.block_stride
            block = hist[y0 : y0 + cfg.block_size, x0 : x0 + cfg.block_size].ravel()
            out[pos : pos + cfg.block_dim] = _normalize_block(block, cfg.clip)
            pos += cfg.block_dim
    return out


def hog_feature_set(
    image_set: LabeledImageSet, cfg: HogConfig | None = None
) -> FeatureSet:
    """Row i holds hog_features of image i; name 'hog', labels copied."""
    cfg = cfg or HogConfig()
    cfg.validate()
    values = np.empty((len(image_set), cfg.feature_dim), dtype=np.float32)
    for i in range(len(image_set)):
        values[i] = hog_features(image_set.images[i], cfg)
    return FeatureSet("hog", values, image_set.labels)
