"""Command-line entry point.

Exit codes match the toolkit's convention: 0 success, 1 usage error,
2 data error (missing files, missing weights, malformed input).
"""

from __future__ import annotations

import argparse
import os
import sys

from .models import BACKBONES

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fset-export",
        description="export CNN penultimate activations of CIFAR-10 "
        "as .fset feature files",
    )
    parser.add_argument("--backbone", required=True, choices=sorted(BACKBONES))
    parser.add_argument(
        "--data-dir",
        help="directory with the CIFAR-10 binary batches "
        "(default: $ENSEMBLEKIT_DATA)",
    )
    parser.add_argument("--train-out", required=True)
    parser.add_argument("--test-out", required=True)
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--weights-file",
                       help="Keras weights checkpoint for the classifier")
    group.add_argument(
        "--random-init",
        action="store_true",
        help="skip pretrained weights (offline smoke runs)",
    )
    parser.add_argument("--epochs", type=int, default=100,
                        help="fine-tuning budget; 0 skips fine-tuning")
    parser.add_argument("--patience", type=int, default=10)
    parser.add_argument("--min-delta", type=float, default=0.0)
    parser.add_argument("--batch", type=int, default=128)
    parser.add_argument("--no-augment", action="store_true",
                        help="fine-tune without the mirrored copies")
    parser.add_argument("--seed", type=int, default=0)
    return parser


def dispatch(argv=None, env=None) -> int:
    env = os.environ if env is None else env
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE

    data_dir = args.data_dir or env.get("ENSEMBLEKIT_DATA")
    if not data_dir:
        print(
            "error: no data directory; pass --data-dir or set "
            "ENSEMBLEKIT_DATA",
            file=sys.stderr,
        )
        return EXIT_DATA

    if args.random_init:
        weights = None
    elif args.weights_file:
        weights = args.weights_file
    else:
        weights = BACKBONES[args.backbone].default_weights
        if weights is None:
            print(
                f"error: {args.backbone} ships no default weights; pass "
                "--weights-file (published checkpoint) or --random-init",
                file=sys.stderr,
            )
            return EXIT_USAGE

    from . import export

    spec = export.ExportSpec(
        backbone=args.backbone,
        data_dir=data_dir,
        train_out=args.train_out,
        test_out=args.test_out,
        weights=weights,
        epochs=args.epochs,
        patience=args.patience,
        min_delta=args.min_delta,
        batch_size=args.batch,
        augment=not args.no_augment,
        seed=args.seed,
    )
    try:
        result = export.export_features(spec)
    except (export.ExportError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(
        f"{result.backbone}: {result.feature_dim}-dim features, "
        f"{result.train_rows} train rows -> {spec.train_out}, "
        f"{result.test_rows} test rows -> {spec.test_out} "
        f"({result.epochs_run} fine-tune epochs, "
        f"{result.duration_seconds:.1f}s)"
    )
    return EXIT_OK


def main() -> None:
    raise SystemExit(dispatch())
