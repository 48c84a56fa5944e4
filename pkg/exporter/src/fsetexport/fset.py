"""Writer for FSET v1, the feature-file format of the ensemblekit toolkit.

Implemented from the format description rather than shared code, so this
package interoperates with the toolkit strictly through bytes on disk:

    "FSET" | u32 version=1 | u64 n | u32 d | u16 namelen | name (utf-8)
          | n label bytes | n*d little-endian float32, row-major
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"FSET"
VERSION = 1
N_CLASSES = 10


def write_fset(path: str, name: str, labels: np.ndarray, values: np.ndarray) -> int:
    """Write one feature set; returns the number of bytes written.

    Values are stored as float32; the cast must not create infinities and
    labels must be CIFAR-10 class indices. Readers reject anything else,
    so refusing here keeps a bad export from looking like a good file.
    """
    labels = np.asarray(labels)
    values = np.asarray(values)
    if values.ndim != 2:
        raise ValueError(f"values must be 2-d, got shape {values.shape}")
    if labels.shape != (values.shape[0],):
        raise ValueError(
            f"{labels.shape[0] if labels.ndim == 1 else labels.shape} labels "
            f"for {values.shape[0]} feature rows"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= N_CLASSES):
        bad = int(np.argmax((labels < 0) | (labels >= N_CLASSES)))
        raise ValueError(f"label {labels[bad]} at row {bad} outside 0..{N_CLASSES - 1}")
    # An overflowing cast is caught by the finiteness check right below;
    # numpy's interim warning would only duplicate the error.
    with np.errstate(over="ignore"):
        out = np.ascontiguousarray(values, dtype="<f4")
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out.ravel()))[0])
        raise ValueError(f"non-finite value at flat index {bad} after float32 cast")
    name_bytes = name.encode("utf-8")
    if len(name_bytes) > 0xFFFF:
        raise ValueError(f"name is {len(name_bytes)} bytes, max 65535")
    n, d = out.shape
    header = struct.pack("<4sIQIH", MAGIC, VERSION, n, d, len(name_bytes))
    with open(path, "wb") as fh:
        written = fh.write(header)
        written += fh.write(name_bytes)
        written += fh.write(labels.astype(np.uint8).tobytes())
        written += fh.write(out.tobytes())
    return written
