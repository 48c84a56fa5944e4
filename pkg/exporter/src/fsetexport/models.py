"""Backbone construction and the feature-head replacement.

TensorFlow is imported inside the build functions, not at module level,
so argument errors and --help stay instant.
"""

from __future__ import annotations

from dataclasses import dataclass

# Every classifier exposes its penultimate activations under this layer
# name; extraction looks it up instead of counting layers.
FEATURE_LAYER = "feature_head"


@dataclass(frozen=True)
class Backbone:
    """Static description of one supported network."""

    key: str
    set_name: str  # name field written into the .fset files
    feature_dim: int
    input_side: int  # images are bilinearly resized to this square
    trains: bool  # transfer-learning backbones fine-tune before export
    default_weights: str | None


VGG16 = Backbone("vgg16", "tl_vgg", 512, 32, True, "imagenet")
INCEPTION = Backbone(
    "inception-resnet-v2", "tl_inception", 1024, 75, True, "imagenet"
)
CIFAR_VGG = Backbone("cifar-vgg", "cifar_vgg", 512, 32, False, None)

BACKBONES = {b.key: b for b in (VGG16, INCEPTION, CIFAR_VGG)}

# Published normalization of the pretrained cifar-vgg checkpoint.
_CIFAR_VGG_MEAN = 120.707
_CIFAR_VGG_STD = 64.15


def preprocessing_note(backbone: Backbone) -> str:
    """Human-readable description recorded in the export manifest."""
    if backbone.key == "vgg16":
        return "keras vgg16 preprocess_input (BGR, ImageNet mean subtraction)"
    if backbone.key == "inception-resnet-v2":
        return "keras inception_resnet_v2 preprocess_input (scale to [-1, 1])"
    return f"(x - {_CIFAR_VGG_MEAN}) / {_CIFAR_VGG_STD}"


def preprocessor(backbone: Backbone):
    """Per-batch pixel transform applied after the resize, if any."""
    from tensorflow import keras

    if backbone.key == "vgg16":
        return keras.applications.vgg16.preprocess_input
    if backbone.key == "inception-resnet-v2":
        return keras.applications.inception_resnet_v2.preprocess_input

    def normalize(x):
        return (x - _CIFAR_VGG_MEAN) / (_CIFAR_VGG_STD + 1e-7)

    return normalize


def build_classifier(backbone: Backbone, weights: str | None):
    """Full 10-class classifier with the replacement head in place.

    `weights` is None for random initialization, "imagenet" for the
    pretrained base (head stays random), or a path to a Keras weights
    checkpoint for the whole classifier.
    """
    if backbone.key == "vgg16":
        model = _tl_vgg(weights)
    elif backbone.key == "inception-resnet-v2":
        model = _tl_inception(weights)
    elif backbone.key == "cifar-vgg":
        model = _cifar_vgg()
    else:
        raise ValueError(f"unknown backbone {backbone.key!r}")
    if weights is not None and weights != "imagenet":
        model.load_weights(weights)
    return model


def feature_extractor(model):
    """Sub-model ending at the feature head; softmax and dropout fall away."""
    from tensorflow import keras

    return keras.Model(model.input, model.get_layer(FEATURE_LAYER).output)


def _tl_vgg(weights: str | None):
    from tensorflow import keras
    from tensorflow.keras import layers

    base = keras.applications.VGG16(
        include_top=False,
        weights="imagenet" if weights == "imagenet" else None,
        input_shape=(32, 32, 3),
    )
    x = layers.Flatten(name="flatten")(base.output)
    x = layers.Dense(512, activation="relu", name=FEATURE_LAYER)(x)
    x = layers.Dropout(0.5, name="head_dropout")(x)
    out = layers.Dense(10, activation="softmax", name="predictions")(x)
    return keras.Model(base.input, out, name="tl_vgg")


def _tl_inception(weights: str | None):
    from tensorflow import keras
    from tensorflow.keras import layers

    # The stock network pools to 1536; the replacement head narrows to the
    # 1024 features the export format promises for this backbone.
    base = keras.applications.InceptionResNetV2(
        include_top=False,
        weights="imagenet" if weights == "imagenet" else None,
        input_shape=(75, 75, 3),
        pooling="avg",
    )
    x = layers.Dense(1024, activation="relu", name=FEATURE_LAYER)(base.output)
    x = layers.Dropout(0.5, name="head_dropout")(x)
    out = layers.Dense(10, activation="softmax", name="predictions")(x)
    return keras.Model(base.input, out, name="tl_inception")


def _cifar_vgg():
    """The CIFAR-specific VGG variant, matching the published checkpoint.

    Thirteen 3x3 conv layers (each conv + relu + batch norm) with dropout
    sprinkled between them, five max-pools, then a 512-wide dense block.
    Layer order follows the upstream model exactly so its weights file
    loads as-is; the feature head is the batch norm after the dense layer,
    which is what remains once the top dropout and softmax are stripped.
    """
    from tensorflow import keras
    from tensorflow.keras import layers

    reg = keras.regularizers.l2(5e-4)
    widths = (64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512, 512)
    drop_after = {1: 0.3, 3: 0.4, 5: 0.4, 6: 0.4, 8: 0.4, 9: 0.4, 11: 0.4, 12: 0.4}
    pool_after = {2, 4, 7, 10, 13}

    inputs = keras.Input(shape=(32, 32, 3))
    x = inputs
    for i, width in enumerate(widths, start=1):
        x = layers.Conv2D(width, (3, 3), padding="same", kernel_regularizer=reg)(x)
        x = layers.Activation("relu")(x)
        x = layers.BatchNormalization()(x)
        if i in drop_after:
            x = layers.Dropout(drop_after[i])(x)
        if i in pool_after:
            x = layers.MaxPooling2D(pool_size=(2, 2))(x)
    x = layers.Dropout(0.5)(x)
    x = layers.Flatten()(x)
    x = layers.Dense(512, kernel_regularizer=reg)(x)
    x = layers.Activation("relu")(x)
    x = layers.BatchNormalization(name=FEATURE_LAYER)(x)
    x = layers.Dropout(0.5)(x)
    x = layers.Dense(10)(x)
    out = layers.Activation("softmax")(x)
    return keras.Model(inputs, out, name="cifar_vgg")
