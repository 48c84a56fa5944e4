"""Shared test utilities: a synthetic image corpus and an independent
brute-force HOG reference.

The synthetic corpus gives each class a distinct base color (visible to
pixel features) and a distinct stripe orientation (visible to gradient
features), so both extractor families carry genuine class signal. It stands
in for the real dataset when ENSEMBLEKIT_DATA is not set.
"""

from __future__ import annotations

import math
import os

import numpy as np

from ensemblekit import dataset

# One RGB base color per class, spread around the hue wheel.
_angles = 2.0 * np.pi * np.arange(10) / 10.0
PALETTE = np.stack(
    [
        128 + 100 * np.cos(_angles),
        128 + 100 * np.cos(_angles + 2 * np.pi / 3),
        128 + 100 * np.cos(_angles + 4 * np.pi / 3),
    ],
    axis=1,
)

STRIPE_PERIOD = 8.0
STRIPE_AMPLITUDE = 60.0
NOISE_SIGMA = 15.0


def synthetic_image_set(
    labels: np.ndarray, seed: int, provenance: str = "synthetic"
) -> dataset.LabeledImageSet:
    """Class-structured random images: base color + oriented stripes + noise.

    Class c's stripes run at c * 18 degrees, covering the full unsigned
    orientation range across the ten classes.
    """
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    yy, xx = np.mgrid[0:32, 0:32]
    images = np.empty((n, 3072), dtype=np.uint8)
    for c in range(10):
        idx = np.where(labels == c)[0]
        if idx.size == 0:
            continue
        theta = np.deg2rad(18.0 * c)
        phase = rng.uniform(0, 2 * np.pi, size=(idx.size, 1, 1))
        wave = np.sin(
            2 * np.pi * (xx * np.cos(theta) + yy * np.sin(theta)) / STRIPE_PERIOD
            + phase
        )
        for p in range(3):
            chan = (
                PALETTE[c, p]
                + STRIPE_AMPLITUDE * wave
                + rng.normal(0, NOISE_SIGMA, size=wave.shape)
            )
            images[idx, p * 1024 : (p + 1) * 1024] = (
                np.clip(chan, 0, 255).astype(np.uint8).reshape(idx.size, 1024)
            )
    return dataset.LabeledImageSet(images=images, labels=labels, provenance=provenance)


def balanced_labels(per_class: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.permutation(np.repeat(np.arange(10, dtype=np.int64), per_class))


def write_synthetic_data_dir(path: str, per_batch_per_class: int, seed: int) -> str:
    """Write data_batch_1..5.bin and test_batch.bin under path."""
    os.makedirs(path, exist_ok=True)
    for i, name in enumerate(dataset.TRAIN_FILES):
        labels = balanced_labels(per_batch_per_class, seed=seed + i)
        image_set = synthetic_image_set(labels, seed=seed + 100 + i)
        with open(os.path.join(path, name), "wb") as fh:
            fh.write(dataset.serialize_batch(image_set))
    labels = balanced_labels(per_batch_per_class, seed=seed + 50)
    image_set = synthetic_image_set(labels, seed=seed + 150)
    with open(os.path.join(path, dataset.TEST_FILE), "wb") as fh:
        fh.write(dataset.serialize_batch(image_set))
    return path


def real_data_dir() -> str | None:
    """ENSEMBLEKIT_DATA when it holds all six batch files, else None."""
    root = os.environ.get(dataset.DATA_DIR_ENV)
    if not root:
        return None
    names = (*dataset.TRAIN_FILES, dataset.TEST_FILE)
    if all(os.path.isfile(os.path.join(root, n)) for n in names):
        return root
    return None


def reference_hog(
    pixels: np.ndarray,
    orientations: int,
    cell: int,
    block: int,
    stride: int,
    clip: float,
) -> np.ndarray:
    """Scalar-loop HOG computed without any shared code paths.

    Luma grayscale, central differences with replicated borders, votes
    linearly split between the two nearest bin centers, L2-Hys blocks.
    """
    gray = [
        [
            (
                0.299 * float(pixels[0 * 1024 + r * 32 + c])
                + 0.587 * float(pixels[1 * 1024 + r * 32 + c])
                + 0.114 * float(pixels[2 * 1024 + r * 32 + c])
            )
            / 255.0
            for c in range(32)
        ]
        for r in range(32)
    ]

    def at(r: int, c: int) -> float:
        return gray[min(max(r, 0), 31)][min(max(c, 0), 31)]

    cells = 32 // cell
    hist = [[[0.0] * orientations for _ in range(cells)] for _ in range(cells)]
    bin_width = 180.0 / orientations
    for r in range(32):
        for c in range(32):
            gx = (at(r, c + 1) - at(r, c - 1)) / 2.0
            gy = (at(r + 1, c) - at(r - 1, c)) / 2.0
            magnitude = math.hypot(gx, gy)
            theta = math.degrees(math.atan2(gy, gx)) % 180.0
            position = theta / bin_width - 0.5
            low = math.floor(position)
            frac = position - low
            target = hist[r // cell][c // cell]
            target[int(low) % orientations] += magnitude * (1.0 - frac)
            target[(int(low) + 1) % orientations] += magnitude * frac

    blocks_per_axis = (cells - block) // stride + 1
    out: list[float] = []
    for by in range(blocks_per_axis):
        for bx in range(blocks_per_axis):
            vec: list[float] = []
            for cy in range(by * stride, by * stride + block):
                for cx in range(bx * stride, bx * stride + block):
                    vec.extend(hist[cy][cx])
            norm = math.sqrt(sum(v * v for v in vec)) + 1e-12
            clipped = [min(v / norm, clip) for v in vec]
            norm2 = math.sqrt(sum(v * v for v in clipped)) + 1e-12
            out.extend(v / norm2 for v in clipped)
    return np.asarray(out)
