"""Reader for the CIFAR-10 binary distribution.

Each record is 3073 bytes: one label byte, then 3072 pixel bytes stored
plane-major (1024 red, 1024 green, 1024 blue, each a row-major 32x32
plane). Batch files are read in numeric order so every consumer of the
exported features sees the same canonical row order.
"""

from __future__ import annotations

import os

import numpy as np

TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
TEST_FILES = ("test_batch.bin",)
RECORD_BYTES = 3073
IMAGE_SIDE = 32
N_CLASSES = 10

ENV_DATA_DIR = "ENSEMBLEKIT_DATA"  # same convention as the toolkit


def load_split(data_dir: str, split: str) -> tuple[np.ndarray, np.ndarray]:
    """Return (images, labels): uint8 NHWC images and uint8 labels."""
    if split == "train":
        names = TRAIN_FILES
    elif split == "test":
        names = TEST_FILES
    else:
        raise ValueError(f"split must be 'train' or 'test', not {split!r}")
    images = []
    labels = []
    for file_name in names:
        path = os.path.join(data_dir, file_name)
        raw = np.fromfile(path, dtype=np.uint8)
        if raw.size == 0 or raw.size % RECORD_BYTES:
            raise ValueError(
                f"{path}: {raw.size} bytes is not a whole number of "
                f"{RECORD_BYTES}-byte records"
            )
        records = raw.reshape(-1, RECORD_BYTES)
        batch_labels = records[:, 0]
        if batch_labels.max(initial=0) >= N_CLASSES:
            bad = int(np.argmax(batch_labels >= N_CLASSES))
            raise ValueError(
                f"{path}: record {bad} has label {batch_labels[bad]}"
            )
        planes = records[:, 1:].reshape(-1, 3, IMAGE_SIDE, IMAGE_SIDE)
        images.append(planes.transpose(0, 2, 3, 1))  # NHWC for the networks
        labels.append(batch_labels)
    return np.concatenate(images), np.concatenate(labels)
