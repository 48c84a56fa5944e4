"""Command-line interface.

One executable with subcommands covering the full pipeline: dataset
inspection, feature extraction, feature-file validation, PCA, classifier
training, evaluation, ensemble runs, and canned reproduction experiments.

Option precedence is flags > config file (--config, `key = value` lines) >
environment > built-in defaults. Every successful run writes a RunManifest
next to its primary output (or `<subcommand>.manifest` in the working
directory for commands that only print). Exit codes: 0 success, 1 usage
error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import dataset, ensemble, evaluation, fcnn, pca
from .config import kv_to_dict, parse_bool, parse_kv
from .errors import ArgError, ConfigError, DataError, NumericalError
from .feature_core import load_fset, save_fset
from .hog import HogConfig
from .manifest import RunManifest

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

EXPERIMENTS = {
    # member lists per experiment; file members are prefixes under --features-dir
    "e1": (("tl_vgg", "hog", "pixel"), 500),
    "e2": (("tl_vgg", "tl_inception"), None),
    "e3": (("tl_vgg", "hog", "pixel", "cifar_vgg", "tl_inception"), 1000),
}
DESK_MEMBERS = ("hog", "pixel")
DESK_TRAIN_PER_CLASS = 500
DESK_TEST_PER_CLASS = 100


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ensemblekit",
        description="CIFAR-10 classification from fused feature sets",
    )
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--threads", type=int, help="bound internal parallelism")
    parser.add_argument(
        "--verbose", action="store_true", help="print per-epoch training history"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_dataset = sub.add_parser("dataset", help="dataset utilities")
    dataset_sub = p_dataset.add_subparsers(dest="dataset_command", required=True)
    p_inspect = dataset_sub.add_parser("inspect", help="per-split class histogram")
    p_inspect.add_argument("--data-dir")

    p_extract = sub.add_parser("extract", help="compute features from images")
    extract_sub = p_extract.add_subparsers(dest="extractor", required=True)
    for name in ("hog", "pixel"):
        p = extract_sub.add_parser(name)
        p.add_argument("--data-dir")
        p.add_argument("--split", choices=("train", "test"), required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--augment", action="store_true",
                       help="append horizontally flipped copies")
        p.add_argument("--per-class", type=int,
                       help="subset to this many images per class")
        p.add_argument("--subset-seed", type=int, default=0)
        if name == "hog":
            p.add_argument("--orientations", type=int)
            p.add_argument("--cell", type=int)
            p.add_argument("--block", type=int)
            p.add_argument("--stride", type=int)
            p.add_argument("--clip", type=float)

    p_import = sub.add_parser("import", help="validate a feature file")
    p_import.add_argument("--in", dest="input", required=True)

    p_pca = sub.add_parser("pca", help="principal component analysis")
    pca_sub = p_pca.add_subparsers(dest="pca_command", required=True)
    p_fit = pca_sub.add_parser("fit")
    p_fit.add_argument("--in", dest="input", required=True)
    p_fit.add_argument("--k", type=int, required=True)
    p_fit.add_argument("--model", required=True)
    p_transform = pca_sub.add_parser("transform")
    p_transform.add_argument("--model", required=True)
    p_transform.add_argument("--in", dest="input", required=True)
    p_transform.add_argument("--out", required=True)

    p_train = sub.add_parser("train", help="train the classifier head")
    p_train.add_argument("--train", dest="train_features", required=True)
    p_train.add_argument("--val", dest="val_features", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--lr", type=float)
    p_train.add_argument("--batch", type=int)
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--patience", type=int)
    p_train.add_argument("--min-delta", type=float)
    p_train.add_argument("--dropout", type=float)
    p_train.add_argument("--hidden", help="comma-separated widths, e.g. 300,100")
    p_train.add_argument("--seed", type=int)

    p_eval = sub.add_parser("evaluate", help="score a model on features")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--features", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--format", choices=("text", "csv"), default="csv")

    p_ens = sub.add_parser("ensemble", help="run an ensemble experiment")
    ens_sub = p_ens.add_subparsers(dest="ensemble_command", required=True)
    p_run = ens_sub.add_parser("run")
    p_run.add_argument("--spec", required=True)
    p_run.add_argument("--out-dir", default=".")

    p_repro = sub.add_parser("reproduce", help="canned ensemble experiments")
    p_repro.add_argument("--experiment", choices=tuple(EXPERIMENTS), required=True)
    p_repro.add_argument("--scale", choices=("desk", "full"), required=True)
    p_repro.add_argument("--data-dir")
    p_repro.add_argument("--features-dir",
                         help="directory holding <member>.train/.test.fset files")
    p_repro.add_argument("--out-dir", default=".")
    p_repro.add_argument("--seed", type=int)
    p_repro.add_argument("--per-class", type=int)
    p_repro.add_argument("--test-per-class", type=int)
    p_repro.add_argument("--no-augment", action="store_true")
    return parser


def _load_config(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        return kv_to_dict(parse_kv(fh.read()))


def _setting(flag_value, config: dict, key: str, default, cast):
    """flags > config file > default (environment handled by callers)."""
    if flag_value is not None:
        return flag_value
    if key in config:
        return cast(config[key])
    return default


def _data_dir(args, config: dict, env) -> str:
    from_config = config.get("data_dir")
    return dataset.resolve_data_dir(args.data_dir or from_config, env)


def _limit_threads(count: int | None) -> None:
    if count is None:
        return
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(count)
        return
    threadpool_limits(limits=count)


def _print_history(outcome: fcnn.TrainOutcome) -> None:
    for epoch, stats in enumerate(outcome.model.history, start=1):
        print(
            f"epoch {epoch:3d}  loss {stats.train_loss:.4f}  "
            f"val_acc {stats.val_accuracy:.4f}",
            file=sys.stderr,
        )


def _load_images(
    args, config: dict, env, manifest: RunManifest, split: str
) -> dataset.LabeledImageSet:
    data_dir = _data_dir(args, config, env)
    manifest.param("data_dir", data_dir)
    names = dataset.TRAIN_FILES if split == "train" else (dataset.TEST_FILE,)
    for name in names:
        manifest.input_file(os.path.join(data_dir, name))
    return dataset.load_split(data_dir, split)


def cmd_dataset_inspect(args, config, env) -> int:
    manifest = RunManifest("dataset inspect")
    for split in ("train", "test"):
        images = _load_images(args, config, env, manifest, split)
        counts = images.class_counts()
        print(f"{split}: {len(images)} images")
        for idx, name in enumerate(dataset.CLASS_NAMES):
            print(f"  {name:<12} {counts[idx]}")
    manifest_path = manifest.write_next_to("dataset-inspect")
    print(f"manifest: {manifest_path}")
    return EXIT_OK


def _apply_subset_and_augment(images, args, manifest):
    if args.per_class is not None:
        images = dataset.subset_per_class(images, args.per_class, args.subset_seed)
        manifest.param("per_class", args.per_class)
        manifest.param("subset_seed", args.subset_seed)
    if args.augment:
        images = dataset.augment_with_hflip(images)
        manifest.param("augment", True)
    return images


def cmd_extract(args, config, env) -> int:
    manifest = RunManifest(f"extract {args.extractor}")
    manifest.param("split", args.split)
    images = _load_images(args, config, env, manifest, args.split)
    images = _apply_subset_and_augment(images, args, manifest)
    if args.extractor == "hog":
        cfg = HogConfig(
            orientations=_setting(args.orientations, config, "orientations", 9, int),
            cell_size=_setting(args.cell, config, "cell", 8, int),
            block_size=_setting(args.block, config, "block", 2, int),
            block_stride=_setting(args.stride, config, "stride", 1, int),
            clip=_setting(args.clip, config, "clip", 0.2, float),
        )
        for key, value in (
            ("orientations", cfg.orientations),
            ("cell", cfg.cell_size),
            ("block", cfg.block_size),
            ("stride", cfg.block_stride),
            ("clip", cfg.clip),
        ):
            manifest.param(key, value)
        from .hog import hog_feature_set

        features = hog_feature_set(images, cfg)
    else:
        from .pixel import pixel_feature_set

        features = pixel_feature_set(images)
    n_bytes = save_fset(features, args.out)
    manifest.param("out", args.out)
    manifest.write_next_to(args.out)
    print(f"wrote {features.name}: n={features.n} d={features.d} ({n_bytes} bytes)")
    return EXIT_OK


def cmd_import(args, config, env) -> int:
    manifest = RunManifest("import")
    manifest.input_file(args.input)
    features = load_fset(args.input)
    print(
        f"{args.input}: valid FSET name={features.name!r} "
        f"n={features.n} d={features.d}"
    )
    counts = np.bincount(features.labels, minlength=dataset.NUM_CLASSES)
    for idx, name in enumerate(dataset.CLASS_NAMES):
        if counts[idx]:
            print(f"  {name:<12} {counts[idx]}")
    manifest.write_next_to("import")
    return EXIT_OK


def cmd_pca(args, config, env) -> int:
    if args.pca_command == "fit":
        manifest = RunManifest("pca fit")
        manifest.input_file(args.input)
        manifest.param("k", args.k)
        features = load_fset(args.input)
        model = pca.pca_fit(features.values64(), args.k)
        pca.save_pcam(model, args.model)
        manifest.param("model", args.model)
        manifest.write_next_to(args.model)
        ratio = pca.explained_variance_ratio(model)
        print(
            f"fit k={model.k} on n={features.n} d={features.d}; "
            f"explained variance {ratio.sum():.4f}"
        )
        return EXIT_OK
    manifest = RunManifest("pca transform")
    manifest.input_file(args.model)
    manifest.input_file(args.input)
    model = pca.load_pcam(args.model)
    features = load_fset(args.input)
    projected = pca.pca_transform(model, features.values64())
    out_set = type(features)(
        f"pca{model.k}({features.name})",
        projected.astype(np.float32),
        features.labels,
    )
    save_fset(out_set, args.out)
    manifest.param("out", args.out)
    manifest.write_next_to(args.out)
    print(f"transformed n={out_set.n} to d={out_set.d}")
    return EXIT_OK


def cmd_train(args, config, env) -> int:
    manifest = RunManifest("train")
    manifest.input_file(args.train_features)
    manifest.input_file(args.val_features)
    train_set = load_fset(args.train_features)
    val_set = load_fset(args.val_features)
    hidden_text = _setting(args.hidden, config, "hidden", "300,100", str)
    cfg = fcnn.FcnnConfig(
        input_dim=train_set.d,
        hidden=tuple(int(w) for w in hidden_text.split(",")),
        dropout_rate=_setting(args.dropout, config, "dropout_rate", 0.5, float),
        learning_rate=_setting(args.lr, config, "learning_rate", 1e-3, float),
        batch_size=_setting(args.batch, config, "batch_size", 128, int),
        max_epochs=_setting(args.epochs, config, "max_epochs", 200, int),
        patience=_setting(args.patience, config, "patience", 10, int),
        min_delta=_setting(args.min_delta, config, "min_delta", 0.0, float),
        seed=_setting(args.seed, config, "seed", 0, int),
    )
    for key in ("hidden", "dropout_rate", "learning_rate", "batch_size",
                "max_epochs", "patience", "min_delta", "seed"):
        manifest.param(key, getattr(cfg, key))
    outcome = fcnn.train(cfg, train_set, val_set)
    if args.verbose:
        _print_history(outcome)
    fcnn.save_model(outcome.model, args.out)
    manifest.param("out", args.out)
    manifest.write_next_to(args.out)
    print(
        f"best val accuracy {outcome.best_val_accuracy:.4f} "
        f"(stopped at epoch {outcome.stop_epoch}, "
        f"early={outcome.stopped_early})"
    )
    return EXIT_OK


def cmd_evaluate(args, config, env) -> int:
    manifest = RunManifest("evaluate")
    manifest.input_file(args.model)
    manifest.input_file(args.features)
    model = fcnn.load_model(args.model)
    features = load_fset(args.features)
    probabilities = fcnn.forward(model, features.values64())
    report = evaluation.evaluate(probabilities, features.labels)
    rendered = evaluation.render_report(report, format=args.format)
    with open(args.out, "wb") as fh:
        fh.write(rendered)
    manifest.param("format", args.format)
    manifest.param("out", args.out)
    manifest.write_next_to(args.out)
    print(f"accuracy {report.accuracy:.4f} top3 {report.top3_accuracy:.4f}")
    return EXIT_OK


def _parse_ensemble_spec_file(path: str) -> tuple[ensemble.EnsembleSpec, dict]:
    """Spec file: repeated `member =`, pipeline keys, and data-handling keys
    (data_dir, per_class, test_per_class, subset_seed, augment)."""
    with open(path, encoding="utf-8") as fh:
        pairs = parse_kv(fh.read())
    members = tuple(v for k, v in pairs if k == "member")
    scalars = {k: v for k, v in pairs if k != "member"}
    if not members:
        raise ConfigError(f"{path}: no 'member =' lines")

    def scalar(key, default, cast):
        return cast(scalars[key]) if key in scalars else default

    fcnn_cfg = fcnn.FcnnConfig(
        input_dim=1,
        hidden=tuple(
            int(w) for w in scalar("hidden", "300,100", str).split(",")
        ),
        dropout_rate=scalar("dropout_rate", 0.5, float),
        learning_rate=scalar("learning_rate", 1e-3, float),
        batch_size=scalar("batch_size", 128, int),
        max_epochs=scalar("max_epochs", 200, int),
        patience=scalar("patience", 10, int),
        min_delta=scalar("min_delta", 0.0, float),
        seed=scalar("seed", 0, int),
    )
    hog_cfg = HogConfig(
        orientations=scalar("hog_orientations", 9, int),
        cell_size=scalar("hog_cell", 8, int),
        block_size=scalar("hog_block", 2, int),
        block_stride=scalar("hog_stride", 1, int),
        clip=scalar("hog_clip", 0.2, float),
    )
    spec = ensemble.EnsembleSpec(
        members=members,
        pca_k=scalar("pca_k", None, int),
        standardize=scalar("standardize", True, parse_bool),
        fcnn=fcnn_cfg,
        hog=hog_cfg,
    )
    data_options = {
        "data_dir": scalars.get("data_dir"),
        "per_class": scalar("per_class", None, int),
        "test_per_class": scalar("test_per_class", None, int),
        "subset_seed": scalar("subset_seed", 0, int),
        "augment": scalar("augment", False, parse_bool),
    }
    return spec, data_options


def _write_ensemble_outputs(
    result: ensemble.EnsembleResult, out_dir: str, manifest: RunManifest, tag: str
) -> None:
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, f"{tag}.report.csv")
    with open(report_path, "wb") as fh:
        fh.write(evaluation.render_report(result.report, format="csv"))
    text_path = os.path.join(out_dir, f"{tag}.report.txt")
    with open(text_path, "wb") as fh:
        fh.write(evaluation.render_report(result.report, format="text"))
    model_path = os.path.join(out_dir, f"{tag}.model.bin")
    fcnn.save_model(result.outcome.model, model_path)
    if result.pca_model is not None:
        pca.save_pcam(result.pca_model, os.path.join(out_dir, f"{tag}.pca.bin"))
    manifest.param("report", report_path)
    manifest.write_next_to(report_path)
    print(
        f"test accuracy {result.report.accuracy:.4f} "
        f"top3 {result.report.top3_accuracy:.4f} -> {report_path}"
    )


def _needs_images(members) -> bool:
    return any(m in ensemble.BUILTIN_MEMBERS for m in members)


def cmd_ensemble_run(args, config, env) -> int:
    manifest = RunManifest("ensemble run")
    manifest.input_file(args.spec)
    spec, data_options = _parse_ensemble_spec_file(args.spec)
    for key, value in data_options.items():
        if value is not None:
            manifest.param(key, value)
    manifest.param("members", "+".join(spec.members))
    manifest.param("pca_k", spec.pca_k)
    manifest.param("standardize", spec.standardize)
    manifest.param("seed", spec.fcnn.seed)

    train_images = test_images = None
    if _needs_images(spec.members):
        data_dir = dataset.resolve_data_dir(data_options["data_dir"], env)
        train_images = dataset.load_split(data_dir, "train")
        test_images = dataset.load_split(data_dir, "test")
        if data_options["per_class"]:
            train_images = dataset.subset_per_class(
                train_images, data_options["per_class"], data_options["subset_seed"]
            )
        if data_options["test_per_class"]:
            # Same seed per split as `extract --subset-seed`, so feature
            # files extracted separately stay row-aligned with builtins.
            test_images = dataset.subset_per_class(
                test_images,
                data_options["test_per_class"],
                data_options["subset_seed"],
            )
        if data_options["augment"]:
            if not all(m in ensemble.BUILTIN_MEMBERS for m in spec.members):
                raise ArgError(
                    "augment requires builtin members only: stored feature "
                    "files carry the raw split and would fall out of row "
                    "alignment with flipped copies"
                )
            train_images = dataset.augment_with_hflip(train_images)
    result = ensemble.run_ensemble(spec, train_images, test_images)
    if args.verbose:
        _print_history(result.outcome)
    _write_ensemble_outputs(result, args.out_dir, manifest, "ensemble")
    return EXIT_OK


def cmd_reproduce(args, config, env) -> int:
    manifest = RunManifest("reproduce")
    manifest.param("experiment", args.experiment)
    manifest.param("scale", args.scale)
    members, pca_k = EXPERIMENTS[args.experiment]
    seed = _setting(args.seed, config, "seed", 7, int)
    manifest.param("seed", seed)

    if args.scale == "desk":
        members = DESK_MEMBERS
        per_class = _setting(args.per_class, config, "per_class",
                             DESK_TRAIN_PER_CLASS, int)
        test_per_class = _setting(args.test_per_class, config, "test_per_class",
                                  DESK_TEST_PER_CLASS, int)
    else:
        members = tuple(
            m if m in ensemble.BUILTIN_MEMBERS
            else os.path.join(args.features_dir or ".", m)
            for m in members
        )
        per_class = args.per_class
        test_per_class = args.test_per_class

    train_images = test_images = None
    if _needs_images(members):
        data_dir = _data_dir(args, config, env)
        manifest.param("data_dir", data_dir)
        train_images = dataset.load_split(data_dir, "train")
        test_images = dataset.load_split(data_dir, "test")
        if per_class:
            train_images = dataset.subset_per_class(train_images, per_class, seed)
            manifest.param("per_class", per_class)
        if test_per_class:
            test_images = dataset.subset_per_class(test_images, test_per_class, seed)
            manifest.param("test_per_class", test_per_class)
        # Stored feature files carry the raw split, so flipped copies would
        # break row alignment; only all-builtin member lists get augmented.
        augment = not args.no_augment and all(
            m in ensemble.BUILTIN_MEMBERS for m in members
        )
        if augment:
            train_images = dataset.augment_with_hflip(train_images)
        manifest.param("augment", augment)

    if (
        args.scale == "desk"
        and pca_k is not None
        and train_images is not None
        and pca_k >= len(train_images)
    ):
        # Desk runs are scaled-down stand-ins; shrink the truncation to fit
        # the sample count (centered rank is at most n - 1) instead of
        # refusing tiny --per-class overrides.
        pca_k = len(train_images) - 1
        print(f"note: pca_k reduced to {pca_k} for this subset", file=sys.stderr)

    spec = ensemble.EnsembleSpec(
        members=members,
        pca_k=pca_k,
        fcnn=fcnn.FcnnConfig(input_dim=1, seed=seed),
    )
    manifest.param("members", "+".join(members))
    manifest.param("pca_k", pca_k)
    result = ensemble.run_ensemble(spec, train_images, test_images)
    if args.verbose:
        _print_history(result.outcome)
    tag = f"{args.experiment}-{args.scale}"
    _write_ensemble_outputs(result, args.out_dir, manifest, tag)
    return EXIT_OK


def dispatch(argv: list[str], env: dict | None = None) -> int:
    """Route argv to a subcommand; returns the process exit code."""
    env = dict(os.environ if env is None else env)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        config = _load_config(args.config)
        _limit_threads(args.threads)
        if args.command == "dataset":
            return cmd_dataset_inspect(args, config, env)
        if args.command == "extract":
            return cmd_extract(args, config, env)
        if args.command == "import":
            return cmd_import(args, config, env)
        if args.command == "pca":
            return cmd_pca(args, config, env)
        if args.command == "train":
            return cmd_train(args, config, env)
        if args.command == "evaluate":
            return cmd_evaluate(args, config, env)
        if args.command == "ensemble":
            return cmd_ensemble_run(args, config, env)
        if args.command == "reproduce":
            return cmd_reproduce(args, config, env)
        parser.error(f"unknown command {args.command!r}")
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_USAGE


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
