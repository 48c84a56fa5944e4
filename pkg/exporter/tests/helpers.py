"""Shared bits for the exporter tests."""

from __future__ import annotations

import pathlib
import struct

import numpy as np

RECORD_BYTES = 3073
BATCH_NAMES = tuple(f"data_batch_{i}.bin" for i in range(1, 6)) + (
    "test_batch.bin",
)


def write_record_file(path, labels, pixels=None) -> None:
    """Write one batch file from explicit labels (and optional pixels)."""
    labels = np.asarray(labels, dtype=np.uint8)
    records = np.zeros((labels.size, RECORD_BYTES), dtype=np.uint8)
    records[:, 0] = labels
    if pixels is not None:
        records[:, 1:] = pixels
    pathlib.Path(path).write_bytes(records.tobytes())


def write_cifar_dir(path, per_batch_per_class: int = 1, seed: int = 0):
    """Fabricate all six batch files in the binary record layout.

    Labels are a shuffled balanced block per file so row order is
    non-trivial; pixels are noise. Returns the directory path.
    """
    rng = np.random.default_rng(seed)
    path = pathlib.Path(path)
    for file_name in BATCH_NAMES:
        labels = np.repeat(
            np.arange(10, dtype=np.uint8), per_batch_per_class
        )
        rng.shuffle(labels)
        pixels = rng.integers(
            0, 256, size=(labels.size, RECORD_BYTES - 1), dtype=np.uint8
        )
        write_record_file(path / file_name, labels, pixels)
    return path


def read_fset(path):
    """Minimal struct-based reader; returns (name, labels, values).

    Deliberately shares no code with either package: the tests should
    fail if the written bytes drift from the published layout.
    """
    blob = pathlib.Path(path).read_bytes()
    magic, version, n, d, namelen = struct.unpack_from("<4sIQIH", blob, 0)
    assert magic == b"FSET" and version == 1
    name = blob[22:22 + namelen].decode("utf-8")
    labels_at = 22 + namelen
    values_at = labels_at + n
    labels = np.frombuffer(blob[labels_at:values_at], dtype=np.uint8)
    values = np.frombuffer(
        blob[values_at:values_at + 4 * n * d], dtype="<f4"
    ).reshape(n, d)
    assert values_at + 4 * n * d == len(blob), "trailing bytes"
    return name, labels, values
