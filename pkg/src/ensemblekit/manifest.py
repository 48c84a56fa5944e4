"""Run manifests: the reproducibility record written next to every output.

A manifest holds the subcommand, every resolved parameter (seeds included),
SHA-256 digests of the input files, the toolkit version, and the wall-clock
duration. Identical inputs and seeds produce identical manifests except for
the duration line, which is always last.
"""

from __future__ import annotations

import hashlib
import os
import time

from . import __version__
from .config import format_kv

MANIFEST_SUFFIX = ".manifest"


def file_digest(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class RunManifest:
    """Collects parameters and input digests during a command run."""

    def __init__(self, subcommand: str):
        self.subcommand = subcommand
        self._params: list[tuple[str, str]] = []
        self._inputs: list[tuple[str, str]] = []
        self._started = time.monotonic()

    def param(self, key: str, value) -> None:
        self._params.append((f"param.{key}", str(value)))

    def input_file(self, path: str) -> None:
        self._inputs.append((f"input.{os.path.basename(path)}", file_digest(path)))

    def render(self) -> str:
        pairs = [
            ("subcommand", self.subcommand),
            ("toolkit_version", __version__),
            *self._params,
            *self._inputs,
            ("duration_seconds", f"{time.monotonic() - self._started:.3f}"),
        ]
        return format_kv(pairs)

    def write_next_to(self, output_path: str) -> str:
        """Write `<output_path>.manifest`; returns the manifest path."""
        path = output_path + MANIFEST_SUFFIX
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.render())
        return path
