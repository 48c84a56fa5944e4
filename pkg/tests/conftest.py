from __future__ import annotations

import numpy as np
import pytest

import helpers
from ensemblekit import pixel
from ensemblekit.hog import HogConfig, hog_feature_set


@pytest.fixture(scope="session")
def toy_data_dir(tmp_path_factory) -> str:
    """Small on-disk corpus: 5 batches x 100 images + 100 test images."""
    root = tmp_path_factory.mktemp("toy-data")
    return helpers.write_synthetic_data_dir(str(root), per_batch_per_class=10, seed=0)


@pytest.fixture(scope="session")
def toy_images():
    """In-memory 300-image training set, 30 per class."""
    return helpers.synthetic_image_set(helpers.balanced_labels(30, seed=1), seed=2)


@pytest.fixture(scope="session")
def toy_test_images():
    return helpers.synthetic_image_set(helpers.balanced_labels(10, seed=3), seed=4)


@pytest.fixture(scope="session")
def toy_hog_sets(toy_images, toy_test_images):
    cfg = HogConfig()
    return hog_feature_set(toy_images, cfg), hog_feature_set(toy_test_images, cfg)


@pytest.fixture(scope="session")
def toy_pixel_sets(toy_images, toy_test_images):
    return pixel.pixel_feature_set(toy_images), pixel.pixel_feature_set(
        toy_test_images
    )


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
