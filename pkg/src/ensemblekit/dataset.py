"""CIFAR-10 binary dataset handling.

Reads the canonical binary distribution (data_batch_1..5.bin, test_batch.bin),
where each record is 1 label byte followed by 3072 pixel bytes stored as three
row-major 32x32 color planes (red, green, blue). Provides horizontal-flip
augmentation and deterministic per-class subsetting for small-scale runs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientClassError, LabelError, LengthError

CLASS_NAMES = (
    "airplane",
    "automobile",
    "bird",
    "cat",
    "deer",
    "dog",
    "frog",
    "horse",
    "ship",
    "truck",
)

NUM_CLASSES = 10
IMAGE_SIDE = 32
PLANE_SIZE = IMAGE_SIDE * IMAGE_SIDE
IMAGE_BYTES = 3 * PLANE_SIZE
RECORD_BYTES = 1 + IMAGE_BYTES

TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
TEST_FILE = "test_batch.bin"

DATA_DIR_ENV = "ENSEMBLEKIT_DATA"


def class_name(index: int) -> str:
    if not 0 <= index < NUM_CLASSES:
        raise LabelError(f"class index {index} outside [0, {NUM_CLASSES - 1}]")
    return CLASS_NAMES[index]


def class_index(name: str) -> int:
    try:
        return CLASS_NAMES.index(name)
    except ValueError:
        raise LabelError(f"unknown class name {name!r}") from None


@dataclass(frozen=True)
class LabeledImageSet:
    """Ordered images with aligned labels.

    images is an (n, 3072) uint8 array, one plane-ordered record per row;
    labels is an (n,) integer array of class indices. Index i always refers
    to the same (image, label) pair. Arrays are marked read-only so sets can
    be shared freely.
    """

    images: np.ndarray
    labels: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        images = np.ascontiguousarray(self.images, dtype=np.uint8)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if images.ndim != 2 or images.shape[1] != IMAGE_BYTES:
            raise LengthError(
                f"images must be (n, {IMAGE_BYTES}) uint8, got {images.shape}"
            )
        if labels.shape != (images.shape[0],):
            raise LengthError(
                f"labels length {labels.shape} does not match {images.shape[0]} images"
            )
        if labels.size and (labels.min() < 0 or labels.max() >= NUM_CLASSES):
            bad = int(np.argmax((labels < 0) | (labels >= NUM_CLASSES)))
            raise LabelError(f"label {labels[bad]} at index {bad} outside [0, 9]")
        images.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.images.shape[0]

    def pixel(self, i: int, plane: int, row: int, col: int) -> int:
        """Intensity of image i at (plane, row, col)."""
        return int(self.images[i, plane * PLANE_SIZE + row * IMAGE_SIDE + col])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=NUM_CLASSES)


def parse_cifar10_batch(data: bytes, provenance: str = "") -> LabeledImageSet:
    """Parse a CIFAR-10 binary batch: 3073-byte records, label byte first.

    Raises LengthError unless the payload is a positive multiple of 3073,
    LabelError if any label byte exceeds 9.
    """
    n_bytes = len(data)
    if n_bytes == 0 or n_bytes % RECORD_BYTES != 0:
        raise LengthError(
            f"batch length {n_bytes} is not a positive multiple of {RECORD_BYTES}"
        )
    records = np.frombuffer(data, dtype=np.uint8).reshape(-1, RECORD_BYTES)
    labels = records[:, 0]
    if labels.max(initial=0) >= NUM_CLASSES:
        bad = int(np.argmax(labels >= NUM_CLASSES))
        raise LabelError(
            f"label byte {labels[bad]} at record {bad} "
            f"(offset {bad * RECORD_BYTES}) exceeds 9; not a CIFAR-10 batch?",
            offset=bad * RECORD_BYTES,
        )
    return LabeledImageSet(records[:, 1:].copy(), labels.astype(np.int64), provenance)


def serialize_batch(image_set: LabeledImageSet) -> bytes:
    """Inverse of parse_cifar10_batch: emit 3073-byte records in order."""
    n = len(image_set)
    records = np.empty((n, RECORD_BYTES), dtype=np.uint8)
    records[:, 0] = image_set.labels.astype(np.uint8)
    records[:, 1:] = image_set.images
    return records.tobytes()


def _as_planes(pixels: np.ndarray) -> np.ndarray:
    return pixels.reshape(-1, 3, IMAGE_SIDE, IMAGE_SIDE)


def horizontal_flip(pixels: np.ndarray) -> np.ndarray:
    """Mirror one 3072-byte image left-right: out(p,r,c) = in(p,r,31-c)."""
    planes = pixels.reshape(3, IMAGE_SIDE, IMAGE_SIDE)
    return np.ascontiguousarray(planes[:, :, ::-1]).reshape(IMAGE_BYTES)


def vertical_flip(pixels: np.ndarray) -> np.ndarray:
    """Mirror one 3072-byte image top-bottom (non-default augmentation)."""
    planes = pixels.reshape(3, IMAGE_SIDE, IMAGE_SIDE)
    return np.ascontiguousarray(planes[:, ::-1, :]).reshape(IMAGE_BYTES)


def augment_with_hflip(image_set: LabeledImageSet) -> LabeledImageSet:
    """Append horizontally flipped copies: originals first, flips after.

    Output index i < n is input image i unchanged; index n + i is its flip.
    Labels are duplicated in the same order, so every class count doubles.
    """
    flipped = np.ascontiguousarray(
        _as_planes(image_set.images)[:, :, :, ::-1]
    ).reshape(-1, IMAGE_BYTES)
    images = np.concatenate([image_set.images, flipped])
    labels = np.concatenate([image_set.labels, image_set.labels])
    provenance = image_set.provenance + "+hflip" if image_set.provenance else "hflip"
    return LabeledImageSet(images, labels, provenance)


def subset_per_class(
    image_set: LabeledImageSet, per_class: int, seed: int
) -> LabeledImageSet:
    """Select exactly per_class images of each class, deterministically.

    A single PCG64 shuffle (numpy default_rng) of all indices decides both
    which images are kept and their output order, so the same seed always
    yields the same subset on the same input.
    """
    counts = image_set.class_counts()
    for idx in range(NUM_CLASSES):
        if counts[idx] < per_class:
            raise InsufficientClassError(
                f"class {CLASS_NAMES[idx]} ({idx}) has {counts[idx]} images, "
                f"need {per_class}"
            )
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(image_set))
    taken = np.zeros(NUM_CLASSES, dtype=np.int64)
    keep = []
    for i in order:
        label = image_set.labels[i]
        if taken[label] < per_class:
            taken[label] += 1
            keep.append(i)
            if len(keep) == per_class * NUM_CLASSES:
                break
    keep = np.asarray(keep, dtype=np.int64)
    provenance = f"{image_set.provenance}[{per_class}/class seed={seed}]"
    return LabeledImageSet(image_set.images[keep], image_set.labels[keep], provenance)


def resolve_data_dir(flag_value: str | None, env: dict | None = None) -> str:
    """Data directory from flag, else ENSEMBLEKIT_DATA environment variable."""
    if flag_value:
        return flag_value
    env = os.environ if env is None else env
    value = env.get(DATA_DIR_ENV)
    if not value:
        raise FileNotFoundError(
            f"no data directory: pass --data-dir or set {DATA_DIR_ENV}"
        )
    return value


def load_split(data_dir: str, split: str) -> LabeledImageSet:
    """Load the train (batches 1..5 in order) or test split from data_dir."""
    if split == "train":
        names = TRAIN_FILES
    elif split == "test":
        names = (TEST_FILE,)
    else:
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    parts = []
    for name in names:
        path = os.path.join(data_dir, name)
        with open(path, "rb") as fh:
            parts.append(parse_cifar10_batch(fh.read(), provenance=name))
    images = np.concatenate([p.images for p in parts])
    labels = np.concatenate([p.labels for p in parts])
    return LabeledImageSet(images, labels, split)
