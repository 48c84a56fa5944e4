"""End-to-end interchange with the ensemblekit toolkit.

The exporter and the toolkit share no code, so these tests prove the
files themselves interoperate: the toolkit's own `import` validator must
accept every exported file, and the label sequence must equal its
`extract pixel` output for the same data directory. Networks run with
random weights; the contract is about dimensions, format, and row order,
none of which depend on training.
"""

import subprocess
import sys

import numpy as np
import pytest

import helpers

pytest.importorskip("tensorflow")
pytest.importorskip("ensemblekit",
                    reason="install the toolkit to check interchange")

from fsetexport import cli


def toolkit(*argv, cwd):
    # cwd is the scratch dir: print-only toolkit commands drop their run
    # manifest in the working directory, which must not be the repo.
    return subprocess.run(
        [sys.executable, "-m", "ensemblekit.cli", *argv],
        capture_output=True,
        text=True,
        cwd=cwd,
    )


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    """Tiny dataset plus the toolkit's own pixel labels per split."""
    root = tmp_path_factory.mktemp("contract")
    data = root / "data"
    data.mkdir()
    helpers.write_cifar_dir(data, per_batch_per_class=1, seed=11)
    reference = {}
    for split in ("train", "test"):
        out = root / f"pixel.{split}.fset"
        proc = toolkit("extract", "pixel", "--data-dir", str(data),
                       "--split", split, "--out", str(out), cwd=root)
        assert proc.returncode == 0, proc.stderr
        _, labels, _ = helpers.read_fset(out)
        reference[split] = labels
    return root, data, reference


CASES = [
    # vgg16 runs one fine-tune epoch to cover the training path; the
    # others skip it (inception for speed, cifar-vgg never fine-tunes).
    ("vgg16", 512, "tl_vgg", ["--epochs", "1"],
     1, "adam(lr=1e-3)"),
    ("inception-resnet-v2", 1024, "tl_inception", ["--epochs", "0"],
     0, "adam(lr=1e-3)"),
    ("cifar-vgg", 512, "cifar_vgg", [],
     0, "none (no fine-tune)"),
]


@pytest.mark.parametrize(
    "backbone,dim,set_name,extra,epochs_run,optimizer", CASES
)
def test_exported_files_satisfy_the_toolkit(corpus, backbone, dim, set_name,
                                            extra, epochs_run, optimizer):
    root, data, reference = corpus
    train_out = root / f"{set_name}.train.fset"
    test_out = root / f"{set_name}.test.fset"
    code = cli.dispatch([
        "--backbone", backbone,
        "--data-dir", str(data),
        "--train-out", str(train_out),
        "--test-out", str(test_out),
        "--random-init",
        "--batch", "16",
        *extra,
    ])
    assert code == 0
    for split, out in (("train", train_out), ("test", test_out)):
        proc = toolkit("import", "--in", str(out), cwd=root)
        assert proc.returncode == 0, proc.stderr
        assert "valid FSET" in proc.stdout
        name, labels, values = helpers.read_fset(out)
        assert name == set_name
        assert values.shape[1] == dim
        assert np.isfinite(values).all()
        assert np.array_equal(labels, reference[split])
    manifest = (root / f"{set_name}.train.fset.manifest").read_text()
    assert f"backbone = {backbone}" in manifest
    assert f"feature_dim = {dim}" in manifest
    assert "weights = random-init" in manifest
    assert f"epochs_run = {epochs_run}" in manifest
    assert f"optimizer = {optimizer}" in manifest
