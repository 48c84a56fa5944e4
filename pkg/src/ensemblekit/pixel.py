"""Raw pixel intensities as features.

Each image's 3072 bytes are kept in their native plane-major order (red
plane, green plane, blue plane, each row-major) and scaled into [0, 1].
The ordering is irrelevant to a dense classifier but fixed so feature files
from different runs align column-for-column.
"""

from __future__ import annotations

import numpy as np

from .dataset import LabeledImageSet
from .feature_core import FeatureSet


def pixel_feature_set(image_set: LabeledImageSet) -> FeatureSet:
    """Row i = image i's bytes / 255 as float32; name 'pixel', d = 3072."""
    values = image_set.images.astype(np.float32) / np.float32(255.0)
    return FeatureSet("pixel", values, image_set.labels)


def reconstruct_images(feature_set: FeatureSet) -> np.ndarray:
    """Undo the [0, 1] scaling back to uint8 image bytes."""
    return np.rint(feature_set.values64() * 255.0).astype(np.uint8)
