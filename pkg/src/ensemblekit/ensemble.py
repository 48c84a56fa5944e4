"""Feature-ensemble experiments: standardize, concatenate, optionally
PCA-truncate, then train and evaluate the fully-connected classifier.

Members are named feature sources: the builtins "hog" and "pixel" (computed
from images) or a path prefix P resolved to P.train.fset / P.test.fset.
The test split doubles as the validation set during training, mirroring the
protocol the reproduced experiments used; treat reported accuracies
accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import fcnn, pca
from .dataset import LabeledImageSet
from .errors import AlignmentError, ArgError, ConfigError
from .evaluation import EvalReport, evaluate
from .feature_core import FeatureSet, concat_feature_sets, load_fset, standardize
from .hog import HogConfig, hog_feature_set
from .pixel import pixel_feature_set

BUILTIN_MEMBERS = ("hog", "pixel")


@dataclass(frozen=True)
class EnsembleSpec:
    """Configuration of one ensemble experiment.

    fcnn.input_dim is a placeholder; the pipeline overwrites it with the
    dimensionality that reaches the classifier.
    """

    members: tuple[str, ...]
    pca_k: int | None = None
    standardize: bool = True
    fcnn: fcnn.FcnnConfig = field(
        default_factory=lambda: fcnn.FcnnConfig(input_dim=1)
    )
    hog: HogConfig = field(default_factory=HogConfig)

    def validate(self) -> None:
        if not self.members:
            raise ConfigError("ensemble needs at least one member")
        if self.pca_k is not None and self.pca_k < 1:
            raise ConfigError(f"pca_k must be >= 1, got {self.pca_k}")


def resolve_member(
    member: str,
    split: str,
    images: LabeledImageSet | None,
    hog_cfg: HogConfig | None = None,
) -> FeatureSet:
    """Materialize one member's features for a split."""
    if member == "hog":
        if images is None:
            raise ConfigError("member 'hog' needs image data for extraction")
        return hog_feature_set(images, hog_cfg or HogConfig())
    if member == "pixel":
        if images is None:
            raise ConfigError("member 'pixel' needs image data for extraction")
        return pixel_feature_set(images)
    if member.endswith(".fset"):
        raise ConfigError(
            f"file member {member!r} must be a path prefix; "
            "<prefix>.train.fset and <prefix>.test.fset are loaded per split"
        )
    return load_fset(f"{member}.{split}.fset")


@dataclass(frozen=True)
class EnsembleResult:
    outcome: fcnn.TrainOutcome
    report: EvalReport
    pca_model: pca.PcaModel | None


def run_on_feature_sets(
    spec: EnsembleSpec,
    train_sets: list[FeatureSet],
    test_sets: list[FeatureSet],
) -> EnsembleResult:
    """The pipeline after member features exist, in order: per-member
    standardization (statistics fit on train only), concatenation, optional
    PCA fit on train applied to both splits, training, test evaluation."""
    spec.validate()
    if len(train_sets) != len(spec.members) or len(test_sets) != len(spec.members):
        raise AlignmentError(
            f"{len(spec.members)} members but {len(train_sets)} train / "
            f"{len(test_sets)} test feature sets"
        )

    if spec.standardize:
        standardized_train, standardized_test = [], []
        for tr, te in zip(train_sets, test_sets):
            tr_std, (te_std,), _ = standardize(tr, [te])
            standardized_train.append(tr_std)
            standardized_test.append(te_std)
        train_sets, test_sets = standardized_train, standardized_test

    train_concat = concat_feature_sets(list(train_sets))
    test_concat = concat_feature_sets(list(test_sets))

    pca_model = None
    if spec.pca_k is not None:
        if spec.pca_k > train_concat.d:
            raise ArgError(
                f"pca_k={spec.pca_k} exceeds concatenated dimension "
                f"{train_concat.d}"
            )
        pca_model = pca.pca_fit(train_concat.values64(), spec.pca_k)
        name = f"pca{spec.pca_k}({train_concat.name})"
        train_concat = FeatureSet(
            name,
            pca.pca_transform(pca_model, train_concat.values64()).astype(np.float32),
            train_concat.labels,
        )
        test_concat = FeatureSet(
            name,
            pca.pca_transform(pca_model, test_concat.values64()).astype(np.float32),
            test_concat.labels,
        )

    cfg = replace(spec.fcnn, input_dim=train_concat.d)
    outcome = fcnn.train(cfg, train_concat, test_concat)
    probabilities = fcnn.forward(outcome.model, test_concat.values64())

    metadata = {
        "members": "+".join(spec.members),
        "standardize": spec.standardize,
        "pca_k": spec.pca_k,
        "seed": cfg.seed,
        "input_dim": cfg.input_dim,
        "stop_epoch": outcome.stop_epoch,
        "stopped_early": outcome.stopped_early,
    }
    if pca_model is not None:
        metadata["pca_explained_variance"] = float(
            pca.explained_variance_ratio(pca_model).sum()
        )
    report = evaluate(probabilities, test_concat.labels, metadata=metadata)
    return EnsembleResult(outcome, report, pca_model)


def run_ensemble(
    spec: EnsembleSpec,
    train_images: LabeledImageSet | None = None,
    test_images: LabeledImageSet | None = None,
) -> EnsembleResult:
    """Resolve every member for both splits, then run the pipeline."""
    spec.validate()
    train_sets = [
        resolve_member(m, "train", train_images, spec.hog) for m in spec.members
    ]
    test_sets = [
        resolve_member(m, "test", test_images, spec.hog) for m in spec.members
    ]
    return run_on_feature_sets(spec, train_sets, test_sets)
