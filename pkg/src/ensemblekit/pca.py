"""Principal component analysis via SVD of the centered data matrix.

Components follow a deterministic sign convention (the largest-magnitude
entry of each component is positive, ties broken by lowest index) so that
repeated fits are reproducible. Variances use the 1/(n-1) sample
normalization; total_variance is the sum over all input dimensions, which
lets explained-variance ratios be computed for any truncation k.

PCAM v1 model file layout, little-endian, float32 values:

    magic   "PCAM"            4 bytes
    version u32 = 1           4 bytes
    d       u32               4 bytes
    k       u32               4 bytes
    total_variance f32        4 bytes
    mean        f32 * d
    variances   f32 * k
    components  f32 * k*d, row-major
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from .errors import (
    ArgError,
    DegenerateDataError,
    DimensionError,
    MagicError,
    NonFiniteError,
    RankWarning,
    TruncationError,
    VersionError,
)
from .feature_core import _read_exact

PCAM_MAGIC = b"PCAM"
PCAM_VERSION = 1


@dataclass(frozen=True)
class PcaModel:
    """Training mean, orthonormal component rows (descending variance),
    per-component variances, and the total variance of the training data."""

    mean: np.ndarray
    components: np.ndarray
    variances: np.ndarray
    total_variance: float

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def d(self) -> int:
        return self.components.shape[1]


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Flip rows so each component's largest-|entry| is positive."""
    out = components.copy()
    for row in out:
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            row *= -1.0
    return out


def pca_fit(X: np.ndarray, k: int) -> PcaModel:
    """Fit the top-k principal components of an (n, d) matrix.

    Warns (RankWarning) when k exceeds the numerical rank of the centered
    data; the trailing components then span an arbitrary null-space basis.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"X must be 2-D, got shape {X.shape}")
    n, d = X.shape
    if n < 2:
        raise ArgError(f"need at least 2 samples, got {n}")
    if not 1 <= k <= min(n, d):
        raise ArgError(f"k={k} outside [1, min(n, d)={min(n, d)}]")
    mean = X.mean(axis=0)
    centered = X - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    tol = s[0] * max(n, d) * np.finfo(np.float64).eps if s.size else 0.0
    rank = int(np.count_nonzero(s > tol))
    if k > rank:
        warnings.warn(
            f"k={k} exceeds numerical rank {rank} of the data",
            RankWarning,
            stacklevel=2,
        )
    all_variances = s**2 / (n - 1)
    return PcaModel(
        mean=mean,
        components=_fix_signs(vt[:k]),
        variances=all_variances[:k],
        total_variance=float(all_variances.sum()),
    )


def pca_transform(model: PcaModel, X: np.ndarray) -> np.ndarray:
    """Project (m, d) rows onto the components: (X - mean) @ components.T."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.d:
        raise DimensionError(
            f"X has shape {X.shape}, model expects (m, {model.d})"
        )
    return (X - model.mean) @ model.components.T


def explained_variance_ratio(model: PcaModel) -> np.ndarray:
    """Per-component variance divided by the total training variance."""
    if model.total_variance <= 0.0:
        raise DegenerateDataError("total variance is zero (all-constant data)")
    return model.variances / model.total_variance


def write_pcam(model: PcaModel, sink: BinaryIO) -> int:
    header = struct.pack(
        "<4sIIIf",
        PCAM_MAGIC,
        PCAM_VERSION,
        model.d,
        model.k,
        model.total_variance,
    )
    written = 0
    for chunk in (
        header,
        model.mean.astype("<f4").tobytes(),
        model.variances.astype("<f4").tobytes(),
        np.ascontiguousarray(model.components, dtype="<f4").tobytes(),
    ):
        sink.write(chunk)
        written += len(chunk)
    return written


def read_pcam(source: BinaryIO) -> PcaModel:
    magic = _read_exact(source, 4, 0, "magic")
    if magic != PCAM_MAGIC:
        raise MagicError(f"bad magic {magic!r} at offset 0 (want b'PCAM')", offset=0)
    (version,) = struct.unpack("<I", _read_exact(source, 4, 4, "version"))
    if version != PCAM_VERSION:
        raise VersionError(f"unsupported PCAM version {version} at offset 4", offset=4)
    d, k, total_variance = struct.unpack(
        "<IIf", _read_exact(source, 12, 8, "header")
    )
    offset = 20
    mean = np.frombuffer(_read_exact(source, d * 4, offset, "mean"), dtype="<f4")
    offset += d * 4
    variances = np.frombuffer(
        _read_exact(source, k * 4, offset, "variances"), dtype="<f4"
    )
    offset += k * 4
    components = np.frombuffer(
        _read_exact(source, k * d * 4, offset, "components"), dtype="<f4"
    ).reshape(k, d)
    for name, arr in (("mean", mean), ("variances", variances),
                      ("components", components)):
        if not np.isfinite(arr).all():
            raise NonFiniteError(f"non-finite value in {name}")
    return PcaModel(
        mean=mean.astype(np.float64),
        components=components.astype(np.float64),
        variances=variances.astype(np.float64),
        total_variance=float(total_variance),
    )


def save_pcam(model: PcaModel, path: str) -> int:
    with open(path, "wb") as fh:
        return write_pcam(model, fh)


def load_pcam(path: str) -> PcaModel:
    with open(path, "rb") as fh:
        return read_pcam(fh)
