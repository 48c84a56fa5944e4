"""The export pipeline: fine-tune (optionally), strip the head, write files."""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import numpy as np

from . import __version__, cifar, fset, models

# Must be set before the first tensorflow import anywhere in the process
# to silence banner-level C++ logging; harmless if already imported.
os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "2")

OPTIMIZER_NOTE = "adam(lr=1e-3)"


class ExportError(Exception):
    """Base for failures the command line reports as data errors."""


class MissingWeightsError(ExportError):
    pass


class DimensionMismatchError(ExportError):
    pass


@dataclass(frozen=True)
class ExportSpec:
    backbone: str
    data_dir: str
    train_out: str
    test_out: str
    weights: str | None  # None = random initialization
    epochs: int = 100
    patience: int = 10
    min_delta: float = 0.0
    batch_size: int = 128
    augment: bool = True
    seed: int = 0


@dataclass(frozen=True)
class ExportResult:
    backbone: str
    feature_dim: int
    train_rows: int
    test_rows: int
    epochs_run: int
    duration_seconds: float


def export_features(spec: ExportSpec) -> ExportResult:
    """Produce the train and test feature files at the requested paths.

    Transfer-learning backbones fine-tune on the mirror-doubled training
    split first (early stopping on validation accuracy); the CIFAR-specific
    variant exports its checkpoint as-is. Features are always extracted for
    the raw, ordered splits so the files stay row-aligned with every other
    feature source.
    """
    try:
        backbone = models.BACKBONES[spec.backbone]
    except KeyError:
        raise ValueError(
            f"unknown backbone {spec.backbone!r}; choose from "
            f"{', '.join(sorted(models.BACKBONES))}"
        ) from None
    _check_weights(backbone, spec.weights)
    if spec.epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {spec.epochs}")

    from tensorflow import keras

    started = time.monotonic()
    keras.utils.set_random_seed(spec.seed)

    train_images, train_labels = cifar.load_split(spec.data_dir, "train")
    test_images, test_labels = cifar.load_split(spec.data_dir, "test")

    try:
        model = models.build_classifier(backbone, spec.weights)
    except Exception as exc:
        # Keras wraps weight-download failures inconsistently; anything that
        # breaks while fetching "imagenet" means the same thing to the user.
        if spec.weights == "imagenet":
            raise MissingWeightsError(
                "could not load ImageNet weights (offline?); pass "
                "--weights-file or --random-init"
            ) from exc
        raise

    epochs_run = 0
    if backbone.trains and spec.epochs > 0:
        if spec.augment:
            # Doubled training set: originals first, mirrored copies after.
            train_x = np.concatenate(
                [train_images, train_images[:, :, ::-1, :]]
            )
            train_y = np.concatenate([train_labels, train_labels])
        else:
            train_x, train_y = train_images, train_labels
        model.compile(
            optimizer=keras.optimizers.Adam(learning_rate=1e-3),
            loss="sparse_categorical_crossentropy",
            metrics=["accuracy"],
        )
        stopper = keras.callbacks.EarlyStopping(
            monitor="val_accuracy",
            patience=spec.patience,
            min_delta=spec.min_delta,
            restore_best_weights=True,
        )
        history = model.fit(
            _labeled_batches(train_x, train_y, backbone, spec, shuffle=True),
            validation_data=_labeled_batches(
                test_images, test_labels, backbone, spec, shuffle=False
            ),
            epochs=spec.epochs,
            callbacks=[stopper],
            verbose=2,
        )
        epochs_run = len(history.history["loss"])

    extractor = models.feature_extractor(model)
    train_features = extractor.predict(
        _image_batches(train_images, backbone, spec.batch_size), verbose=0
    )
    test_features = extractor.predict(
        _image_batches(test_images, backbone, spec.batch_size), verbose=0
    )
    if train_features.shape[1] != backbone.feature_dim:
        raise DimensionMismatchError(
            f"{backbone.key} produced {train_features.shape[1]}-dim "
            f"features, expected {backbone.feature_dim}"
        )

    fset.write_fset(spec.train_out, backbone.set_name, train_labels, train_features)
    fset.write_fset(spec.test_out, backbone.set_name, test_labels, test_features)
    result = ExportResult(
        backbone=backbone.key,
        feature_dim=backbone.feature_dim,
        train_rows=len(train_labels),
        test_rows=len(test_labels),
        epochs_run=epochs_run,
        duration_seconds=time.monotonic() - started,
    )
    _write_manifest(spec, backbone, result)
    return result


def _check_weights(backbone: models.Backbone, weights: str | None) -> None:
    if weights is None:
        return
    if weights == "imagenet":
        if backbone.default_weights != "imagenet":
            raise MissingWeightsError(
                f"{backbone.key} has no ImageNet weights; pass "
                "--weights-file or --random-init"
            )
        return
    if not os.path.exists(weights):
        raise MissingWeightsError(f"weights file not found: {weights}")


def _batch_transform(backbone: models.Backbone):
    """Per-batch pixel pipeline: cast, resize if needed, then preprocess."""
    import tensorflow as tf

    pre = models.preprocessor(backbone)
    side = backbone.input_side

    def prepare(x):
        x = tf.cast(x, tf.float32)
        if side != cifar.IMAGE_SIDE:
            x = tf.image.resize(x, (side, side), method="bilinear")
        return pre(x)

    return prepare


def _image_batches(images, backbone: models.Backbone, batch_size: int):
    """Image-only batches in source order, for feature extraction."""
    import tensorflow as tf

    prepare = _batch_transform(backbone)
    ds = tf.data.Dataset.from_tensor_slices(images).batch(batch_size)
    return ds.map(prepare, num_parallel_calls=tf.data.AUTOTUNE).prefetch(
        tf.data.AUTOTUNE
    )


def _labeled_batches(
    images, labels, backbone: models.Backbone, spec: ExportSpec, shuffle: bool
):
    """(image, label) batches for fit(); shuffling is seed-driven."""
    import tensorflow as tf

    prepare = _batch_transform(backbone)
    ds = tf.data.Dataset.from_tensor_slices((images, labels))
    if shuffle:
        ds = ds.shuffle(len(labels), seed=spec.seed,
                        reshuffle_each_iteration=True)
    ds = ds.batch(spec.batch_size)
    return ds.map(
        lambda x, y: (prepare(x), y), num_parallel_calls=tf.data.AUTOTUNE
    ).prefetch(tf.data.AUTOTUNE)


def _write_manifest(
    spec: ExportSpec, backbone: models.Backbone, result: ExportResult
) -> None:
    path = spec.train_out + ".manifest"
    resize = "none (native 32x32)"
    if backbone.input_side != cifar.IMAGE_SIDE:
        resize = f"{backbone.input_side}x{backbone.input_side} bilinear"
    rows = [
        ("tool", f"fsetexport {__version__}"),
        ("backbone", backbone.key),
        ("set_name", backbone.set_name),
        ("feature_dim", backbone.feature_dim),
        ("feature_layer", models.FEATURE_LAYER),
        ("resize", resize),
        ("preprocessing", models.preprocessing_note(backbone)),
        ("weights", spec.weights if spec.weights else "random-init"),
        ("optimizer", OPTIMIZER_NOTE if backbone.trains else "none (no fine-tune)"),
        ("epochs_requested", spec.epochs if backbone.trains else 0),
        ("epochs_run", result.epochs_run),
        ("patience", spec.patience),
        ("min_delta", spec.min_delta),
        ("augment", spec.augment if backbone.trains else False),
        ("batch_size", spec.batch_size),
        ("seed", spec.seed),
        ("train_out", f"{spec.train_out} ({result.train_rows} rows)"),
        ("test_out", f"{spec.test_out} ({result.test_rows} rows)"),
        ("duration_seconds", f"{result.duration_seconds:.3f}"),
    ]
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in rows:
            fh.write(f"{key} = {value}\n")
