"""FeatureSet data model and the FSET binary interchange format.

Every feature producer (the built-in extractors and the external CNN
exporter) speaks FSET, so feature files from any source can be fused.

FSET v1 layout, all integers little-endian:

    magic   "FSET"                       4 bytes
    version u32 = 1                      4 bytes
    n       u64 (sample count)           8 bytes
    d       u32 (feature dimension)      4 bytes
    namelen u16                          2 bytes
    name    UTF-8                        namelen bytes
    labels  u8 * n
    values  IEEE-754 binary32 LE * n*d, row-major

Values are stored at 32-bit precision; in-memory linear algebra elsewhere
runs at 64-bit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from .dataset import NUM_CLASSES
from .errors import (
    AlignmentError,
    DimensionError,
    LabelError,
    LengthError,
    MagicError,
    NonFiniteError,
    TruncationError,
    VersionError,
)

FSET_MAGIC = b"FSET"
FSET_VERSION = 1

# Dimensions whose training standard deviation falls below this are treated
# as constant: they are centered but not scaled.
SIGMA_FLOOR = 1e-12


@dataclass(frozen=True)
class FeatureSet:
    """Named (n, d) float32 matrix of per-image features with aligned labels.

    Row i of every FeatureSet in one experiment must refer to the same
    underlying image i; concat_feature_sets enforces this via label equality.
    """

    name: str
    values: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if values.ndim != 2:
            raise DimensionError(f"values must be 2-D, got shape {values.shape}")
        if labels.shape != (values.shape[0],):
            raise LengthError(
                f"labels length {labels.shape[0] if labels.ndim else 'scalar'} "
                f"!= {values.shape[0]} rows"
            )
        if labels.size and (labels.min() < 0 or labels.max() >= NUM_CLASSES):
            bad = int(np.argmax((labels < 0) | (labels >= NUM_CLASSES)))
            raise LabelError(f"label {labels[bad]} at row {bad} outside [0, 9]")
        if not np.isfinite(values).all():
            bad = int(np.argmin(np.isfinite(values).ravel()))
            raise NonFiniteError(f"non-finite value at flat index {bad}")
        values.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def values64(self) -> np.ndarray:
        """Values widened to float64 for numerical work."""
        return self.values.astype(np.float64)


def write_fset(feature_set: FeatureSet, sink: BinaryIO) -> int:
    """Serialize to the FSET v1 layout; returns the number of bytes written."""
    name_bytes = feature_set.name.encode("utf-8")
    if len(name_bytes) > 0xFFFF:
        raise LengthError(f"name is {len(name_bytes)} bytes, max 65535")
    header = struct.pack(
        "<4sIQIH",
        FSET_MAGIC,
        FSET_VERSION,
        feature_set.n,
        feature_set.d,
        len(name_bytes),
    )
    written = 0
    for chunk in (
        header,
        name_bytes,
        feature_set.labels.astype(np.uint8).tobytes(),
        np.ascontiguousarray(feature_set.values, dtype="<f4").tobytes(),
    ):
        sink.write(chunk)
        written += len(chunk)
    return written


def _read_exact(source: BinaryIO, count: int, offset: int, what: str) -> bytes:
    data = source.read(count)
    if len(data) != count:
        raise TruncationError(
            f"expected {count} bytes of {what} at offset {offset}, got {len(data)}",
            offset=offset + len(data),
        )
    return data


def read_fset(source: BinaryIO) -> FeatureSet:
    """Parse an FSET v1 stream, validating every declared length and value."""
    magic = _read_exact(source, 4, 0, "magic")
    if magic != FSET_MAGIC:
        raise MagicError(f"bad magic {magic!r} at offset 0 (want b'FSET')", offset=0)
    (version,) = struct.unpack("<I", _read_exact(source, 4, 4, "version"))
    if version != FSET_VERSION:
        raise VersionError(
            f"unsupported FSET version {version} at offset 4", offset=4
        )
    n, d, name_len = struct.unpack("<QIH", _read_exact(source, 14, 8, "header"))
    offset = 22
    name = _read_exact(source, name_len, offset, "name").decode("utf-8")
    offset += name_len
    labels_at = offset
    labels = np.frombuffer(_read_exact(source, n, offset, "labels"), dtype=np.uint8)
    offset += n
    if labels.size and labels.max() >= NUM_CLASSES:
        bad = int(np.argmax(labels >= NUM_CLASSES))
        raise LabelError(
            f"label {labels[bad]} at offset {labels_at + bad} exceeds 9",
            offset=labels_at + bad,
        )
    values_at = offset
    raw = _read_exact(source, n * d * 4, offset, "values")
    values = np.frombuffer(raw, dtype="<f4").reshape(n, d)
    finite = np.isfinite(values).ravel()
    if not finite.all():
        bad = int(np.argmin(finite))
        raise NonFiniteError(
            f"non-finite value at offset {values_at + bad * 4}",
            offset=values_at + bad * 4,
        )
    return FeatureSet(name, values, labels.astype(np.int64))


def save_fset(feature_set: FeatureSet, path: str) -> int:
    with open(path, "wb") as fh:
        return write_fset(feature_set, fh)


def load_fset(path: str) -> FeatureSet:
    with open(path, "rb") as fh:
        return read_fset(fh)


def concat_feature_sets(sets: list[FeatureSet]) -> FeatureSet:
    """Column-wise concatenation of label-aligned feature sets.

    All inputs must have the same sample count and element-wise identical
    label sequences (a misordered feature file shows up here).
    """
    if not sets:
        raise AlignmentError("need at least one feature set")
    first = sets[0]
    for other in sets[1:]:
        if other.n != first.n:
            raise AlignmentError(
                f"sample counts differ: {first.name!r} has {first.n}, "
                f"{other.name!r} has {other.n}"
            )
        if not np.array_equal(other.labels, first.labels):
            bad = int(np.argmax(other.labels != first.labels))
            raise AlignmentError(
                f"labels disagree at row {bad}: {first.name!r} has "
                f"{first.labels[bad]}, {other.name!r} has {other.labels[bad]}"
            )
    if len(sets) == 1:
        return first
    values = np.hstack([s.values for s in sets])
    name = "+".join(s.name for s in sets)
    return FeatureSet(name, values, first.labels)


@dataclass(frozen=True)
class StandardizationStats:
    """Per-dimension training mean and standard deviation.

    scale is the divisor actually applied: sigma where sigma >= SIGMA_FLOOR,
    1.0 for (near-)constant dimensions, which are centered only.
    """

    mean: np.ndarray
    sigma: np.ndarray

    @property
    def scale(self) -> np.ndarray:
        return np.where(self.sigma < SIGMA_FLOOR, 1.0, self.sigma)

    def apply(self, feature_set: FeatureSet) -> FeatureSet:
        if feature_set.d != self.mean.shape[0]:
            raise DimensionError(
                f"feature set has d={feature_set.d}, stats have d={self.mean.shape[0]}"
            )
        transformed = (feature_set.values64() - self.mean) / self.scale
        return FeatureSet(feature_set.name, transformed.astype(np.float32),
                          feature_set.labels)


def standardize(
    train: FeatureSet, others: list[FeatureSet] | None = None
) -> tuple[FeatureSet, list[FeatureSet], StandardizationStats]:
    """Z-score every dimension using statistics fit on the training set only.

    sigma is the population standard deviation (1/n normalization), so a
    training column holding {1, 3} maps exactly to {-1, +1}. All sets must
    share the training dimensionality.
    """
    others = others or []
    for other in others:
        if other.d != train.d:
            raise DimensionError(
                f"dimension mismatch: train d={train.d}, {other.name!r} d={other.d}"
            )
    values = train.values64()
    stats = StandardizationStats(mean=values.mean(axis=0), sigma=values.std(axis=0))
    return stats.apply(train), [stats.apply(o) for o in others], stats
