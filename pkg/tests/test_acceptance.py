"""Release acceptance checks.

One test per release criterion, each asserting its stated tolerance and
printing a single `ACCEPT pass:` line with the measured quantities. The
dataset-dependent checks use the official binaries when ENSEMBLEKIT_DATA
points at them and otherwise fall back to the synthetic corpus from
helpers.py; the code paths under test are identical either way, and the
printed line names the source used.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

import helpers
from ensemblekit import dataset, ensemble, evaluation, fcnn, hog, pca, pixel
from ensemblekit.feature_core import FeatureSet


@pytest.fixture(scope="module")
def announce(request):
    """One checklist line per criterion, visible despite output capture."""
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def _announce(name: str, detail: str) -> None:
        line = f"ACCEPT pass: {name} ({detail})"
        if reporter is not None:
            reporter.write_line(line)
        else:
            print(line)

    return _announce


def test_parser_correctness(announce):
    started = time.monotonic()
    root = helpers.real_data_dir()
    if root:
        with open(f"{root}/{dataset.TEST_FILE}", "rb") as fh:
            parsed = dataset.parse_cifar10_batch(fh.read())
        source = "official test batch"
    else:
        labels = helpers.balanced_labels(1000, seed=31)
        original = helpers.synthetic_image_set(labels, seed=32)
        parsed = dataset.parse_cifar10_batch(dataset.serialize_batch(original))
        source = "synthetic batch (no ENSEMBLEKIT_DATA)"
    assert len(parsed) == 10000
    assert parsed.class_counts().tolist() == [1000] * 10

    blob = dataset.serialize_batch(parsed)
    round_tripped = dataset.parse_cifar10_batch(blob)
    assert np.array_equal(round_tripped.images, parsed.images)
    assert np.array_equal(round_tripped.labels, parsed.labels)
    assert dataset.serialize_batch(round_tripped) == blob

    elapsed = time.monotonic() - started
    assert elapsed < 5.0
    announce(
        "parser correctness",
        f"{source}: 10000 records, 1000 per class, bit-exact round trip, "
        f"{elapsed:.2f}s < 5s",
    )


def test_hog_oracle_equivalence(announce):
    started = time.monotonic()
    configs = [(9, 8, 2, 1, 0.2), (6, 4, 2, 2, 0.3), (12, 16, 1, 1, 0.2)]
    rng = np.random.default_rng(2718)
    worst = 0.0
    images_checked = 0
    for orientations, cell, block, stride, clip in configs:
        cfg = hog.HogConfig(orientations, cell, block, stride, clip)
        for _ in range(34):
            pixels = rng.integers(0, 256, size=3072, dtype=np.uint8)
            ours = hog.hog_features(pixels, cfg)
            reference = helpers.reference_hog(
                pixels, orientations, cell, block, stride, clip
            )
            worst = max(worst, float(np.max(np.abs(ours - reference))))
            images_checked += 1
    assert images_checked >= 100
    assert worst < 1e-10
    assert hog.HogConfig().feature_dim == 324

    elapsed = time.monotonic() - started
    assert elapsed < 30.0
    announce(
        "hog oracle equivalence",
        f"{images_checked} images x 3 configs, max abs diff {worst:.2e} "
        f"< 1e-10, default dim 324, {elapsed:.1f}s < 30s",
    )


def test_pca_oracle_equivalence(announce):
    started = time.monotonic()
    rng = np.random.default_rng(1618)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(8, 51))
        d = int(rng.integers(3, 21))
        k = int(rng.integers(1, min(n, d)))
        X = rng.normal(size=(n, d))
        model = pca.pca_fit(X, k)
        cov = np.cov(X, rowvar=False, ddof=1)
        eigenvalues, eigenvectors = np.linalg.eigh(cov)
        top = eigenvectors[:, np.argsort(eigenvalues)[::-1][:k]]
        ours = model.components.T @ model.components
        oracle = top @ top.T
        worst = max(worst, float(np.max(np.abs(ours - oracle))))
    assert worst < 1e-6

    r = np.sqrt(6.0)
    flat = np.array([[r, 0.0], [-r, 0.0], [0.0, r / 2], [0.0, -r / 2]])
    ratio = pca.explained_variance_ratio(pca.pca_fit(flat, 2))
    assert abs(ratio[0] - 0.8) < 1e-9
    assert abs(ratio[1] - 0.2) < 1e-9

    elapsed = time.monotonic() - started
    assert elapsed < 10.0
    announce(
        "pca oracle equivalence",
        f"50 matrices, max projector diff {worst:.2e} < 1e-6; diag(4,1) "
        f"ratios within 1e-9, {elapsed:.1f}s < 10s",
    )


def test_gradient_check(announce):
    started = time.monotonic()
    configurations = [
        (5, (7,), 10, 9),
        (4, (6, 5), 10, 8),
        (3, (5, 4, 3), 4, 6),
        (6, (8,), 3, 12),
        (2, (4, 4), 5, 7),
    ]
    rng = np.random.default_rng(977)
    worst = 0.0
    for seed, (input_dim, hidden, classes, m) in enumerate(configurations):
        cfg = fcnn.FcnnConfig(
            input_dim=input_dim,
            hidden=hidden,
            dropout_rate=0.0,
            classes=classes,
            seed=seed,
        )
        X = rng.normal(size=(m, input_dim))
        y = rng.integers(0, classes, size=m)
        worst = max(worst, fcnn.gradient_check(cfg, X, y))
    assert worst < 1e-4

    elapsed = time.monotonic() - started
    assert elapsed < 30.0
    announce(
        "gradient check",
        f"{len(configurations)} configurations, max relative error "
        f"{worst:.2e} < 1e-4, {elapsed:.1f}s < 30s",
    )


def test_early_stopping_semantics(announce):
    sequence = [0.5, 0.6] + [0.6] * 10
    captured = {}

    def stub(model, epoch):
        if epoch == 2:
            captured["weights"] = [w.copy() for w in model.weights]
        return sequence[epoch - 1]

    rng = np.random.default_rng(55)
    train_set = FeatureSet(
        "t",
        rng.normal(size=(40, 6)).astype(np.float32),
        rng.integers(0, 10, size=40),
    )
    cfg = fcnn.FcnnConfig(
        input_dim=6, hidden=(8, 6), dropout_rate=0.0, max_epochs=50,
        patience=10, seed=0,
    )
    outcome = fcnn.train(cfg, train_set, train_set, val_metric=stub)
    assert outcome.stop_epoch == 12
    assert outcome.stopped_early is True
    assert outcome.best_val_accuracy == pytest.approx(0.6)
    for got, expected in zip(outcome.model.weights, captured["weights"]):
        assert np.array_equal(got, expected)
    announce(
        "early stopping semantics",
        "improvement at epoch 2 + 10 flat epochs: stopped at epoch 12, "
        "best 0.6, epoch-2 snapshot returned",
    )


@pytest.fixture(scope="module")
def desk_results():
    """Shared 500/100-per-class runs: both single-feature baselines and the
    standardized hog+pixel concat with PCA k=200."""
    timings: dict[str, float] = {}
    started = time.monotonic()
    root = helpers.real_data_dir()
    if root:
        train_full = dataset.load_split(root, "train")
        test_full = dataset.load_split(root, "test")
        source = "official dataset"
    else:
        train_full = helpers.synthetic_image_set(
            helpers.balanced_labels(600, seed=61), seed=62
        )
        test_full = helpers.synthetic_image_set(
            helpers.balanced_labels(120, seed=63), seed=64
        )
        source = "synthetic corpus (no ENSEMBLEKIT_DATA)"
    train = dataset.subset_per_class(train_full, 500, seed=7)
    test = dataset.subset_per_class(test_full, 100, seed=7)
    timings["subset"] = time.monotonic() - started

    started = time.monotonic()
    features = {
        "hog": (
            hog.hog_feature_set(train),
            hog.hog_feature_set(test),
        ),
        "pixel": (
            pixel.pixel_feature_set(train),
            pixel.pixel_feature_set(test),
        ),
    }
    timings["extract"] = time.monotonic() - started

    accuracies: dict[str, float] = {}
    for name, (train_set, test_set) in features.items():
        started = time.monotonic()
        spec = ensemble.EnsembleSpec(
            members=(name,), fcnn=fcnn.FcnnConfig(input_dim=1)
        )
        result = ensemble.run_on_feature_sets(spec, [train_set], [test_set])
        accuracies[name] = result.report.accuracy
        timings[name] = time.monotonic() - started

    started = time.monotonic()
    spec = ensemble.EnsembleSpec(
        members=("hog", "pixel"), pca_k=200, fcnn=fcnn.FcnnConfig(input_dim=1)
    )
    result = ensemble.run_on_feature_sets(
        spec,
        [features["hog"][0], features["pixel"][0]],
        [features["hog"][1], features["pixel"][1]],
    )
    accuracies["ensemble"] = result.report.accuracy
    timings["ensemble"] = time.monotonic() - started
    return {"accuracies": accuracies, "timings": timings, "source": source}


def test_desk_scale_individual_baselines(desk_results, announce):
    accuracies = desk_results["accuracies"]
    timings = desk_results["timings"]
    elapsed = (
        timings["subset"] + timings["extract"] + timings["hog"] + timings["pixel"]
    )
    assert accuracies["hog"] >= 0.30
    assert accuracies["pixel"] >= 0.30
    assert elapsed < 600.0
    announce(
        "desk-scale individual baselines",
        f"{desk_results['source']}: hog {accuracies['hog']:.3f} >= 0.30, "
        f"pixel {accuracies['pixel']:.3f} >= 0.30, {elapsed:.0f}s < 600s",
    )


def test_synthetic_complementarity(announce):
    # Classes are the product of two latent binary factors; feature set A
    # sees only factor 1, set B only factor 2. Alone each supports at most
    # one factor (50% on 4 balanced classes); together they determine the
    # class exactly.
    started = time.monotonic()
    rng = np.random.default_rng(4242)

    def make_sets(n, seed_offset):
        f1 = rng.integers(0, 2, size=n)
        f2 = rng.integers(0, 2, size=n)
        labels = (2 * f1 + f2).astype(np.int64)
        a = rng.normal(0, 0.3, size=(n, 6))
        a[:, 0] += np.where(f1 == 1, 1.0, -1.0)
        b = rng.normal(0, 0.3, size=(n, 6))
        b[:, 0] += np.where(f2 == 1, 1.0, -1.0)
        return (
            FeatureSet("a", a.astype(np.float32), labels),
            FeatureSet("b", b.astype(np.float32), labels),
        )

    train_a, train_b = make_sets(800, 0)
    test_a, test_b = make_sets(400, 1)

    cfg = fcnn.FcnnConfig(
        input_dim=1,
        hidden=(32, 16),
        dropout_rate=0.0,
        classes=4,
        learning_rate=3e-3,
        batch_size=64,
        max_epochs=40,
        patience=10,
        seed=0,
    )

    def run(train_sets, test_sets, members):
        spec = ensemble.EnsembleSpec(members=members, fcnn=cfg)
        return ensemble.run_on_feature_sets(spec, train_sets, test_sets)

    acc_a = run([train_a], [test_a], ("a",)).report.accuracy
    acc_b = run([train_b], [test_b], ("b",)).report.accuracy
    acc_ab = run(
        [train_a, train_b], [test_a, test_b], ("a", "b")
    ).report.accuracy

    assert acc_a <= 0.60
    assert acc_b <= 0.60
    assert acc_ab >= 0.95

    elapsed = time.monotonic() - started
    assert elapsed < 120.0
    announce(
        "synthetic complementarity",
        f"single sets {acc_a:.3f}/{acc_b:.3f} <= 0.60, concatenated "
        f"{acc_ab:.3f} >= 0.95, {elapsed:.0f}s < 120s",
    )


def test_desk_scale_ensemble_non_degradation(desk_results, announce):
    accuracies = desk_results["accuracies"]
    best_single = max(accuracies["hog"], accuracies["pixel"])
    assert accuracies["ensemble"] >= best_single - 0.02
    announce(
        "desk-scale ensemble non-degradation",
        f"{desk_results['source']}: hog+pixel+pca200 "
        f"{accuracies['ensemble']:.3f} >= best single {best_single:.3f} - 0.02 "
        f"({desk_results['timings']['ensemble']:.0f}s)",
    )


def test_evaluation_identities(announce):
    rng = np.random.default_rng(123)
    m, classes = 400, 10
    logits = rng.normal(size=(m, classes))
    probabilities = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
    labels = rng.integers(0, classes, size=m)
    report = evaluation.evaluate(probabilities, labels)

    assert np.trace(report.confusion) / m == report.accuracy
    assert report.top3_accuracy >= report.accuracy
    parsed = evaluation.parse_report_csv(
        evaluation.render_report(report, format="csv")
    )
    assert np.array_equal(parsed["confusion"], report.confusion)
    assert parsed["accuracy"] == float(f"{report.accuracy:.4f}")
    assert parsed["top3_accuracy"] == float(f"{report.top3_accuracy:.4f}")
    announce(
        "evaluation identities",
        f"trace/n == accuracy ({report.accuracy:.4f}), top3 "
        f"{report.top3_accuracy:.4f} >= top1, csv round trip exact",
    )
