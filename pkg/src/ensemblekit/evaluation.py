"""Accuracy, confusion matrices, and top-3 error analysis.

The confusion matrix is counts with true classes as rows and predicted
classes as columns, so trace(confusion)/n equals overall accuracy and row r
sums to the number of true class-r samples. Predictions are argmax with the
lowest class index winning exact ties.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import CLASS_NAMES
from .errors import DimensionError, NormalizationError

ROW_SUM_TOLERANCE = 1e-4
DEFAULT_ERROR_CAP = 1000


@dataclass(frozen=True)
class ErrorRecord:
    """One misclassified sample with its top-3 (label, probability) pairs."""

    index: int
    true_label: int
    top3: tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    per_class_accuracy: np.ndarray
    confusion: np.ndarray
    top3_accuracy: float
    errors: list[ErrorRecord]
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.confusion.sum())


def _top_k_indices(probabilities: np.ndarray, k: int) -> np.ndarray:
    # Stable sort on negated probabilities: ties resolve to the lowest index.
    return np.argsort(-probabilities, axis=1, kind="stable")[:, :k]


def evaluate(
    probabilities: np.ndarray,
    labels: np.ndarray,
    max_errors: int = DEFAULT_ERROR_CAP,
    metadata: dict | None = None,
) -> EvalReport:
    """Score an (m, classes) probability matrix against true labels.

    Every probability row must sum to 1 within 1e-4 (NormalizationError
    otherwise). The errors list holds every misclassified sample up to
    max_errors; the cap is echoed in metadata.
    """
    probabilities = np.asarray(probabilities, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probabilities.ndim != 2:
        raise DimensionError(
            f"probabilities must be 2-D, got shape {probabilities.shape}"
        )
    m, classes = probabilities.shape
    if classes < 3:
        raise DimensionError(f"need >= 3 classes for top-3 analysis, got {classes}")
    if labels.shape != (m,):
        raise DimensionError(
            f"labels shape {labels.shape} does not match {m} probability rows"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise DimensionError("labels outside the probability matrix's class range")
    row_sums = probabilities.sum(axis=1)
    off = np.abs(row_sums - 1.0)
    if m and off.max() > ROW_SUM_TOLERANCE:
        bad = int(np.argmax(off))
        raise NormalizationError(
            f"probability row {bad} sums to {row_sums[bad]:.6f}, not 1"
        )

    predictions = np.argmax(probabilities, axis=1)
    confusion = np.zeros((classes, classes), dtype=np.int64)
    np.add.at(confusion, (labels, predictions), 1)

    accuracy = float(np.trace(confusion) / m) if m else 0.0
    row_totals = confusion.sum(axis=1)
    with np.errstate(invalid="ignore"):
        per_class = np.where(
            row_totals > 0, np.diag(confusion) / np.maximum(row_totals, 1), np.nan
        )

    top3 = _top_k_indices(probabilities, 3)
    top3_hit = (top3 == labels[:, None]).any(axis=1)
    top3_accuracy = float(top3_hit.mean()) if m else 0.0

    errors: list[ErrorRecord] = []
    for i in np.nonzero(predictions != labels)[0]:
        if len(errors) >= max_errors:
            break
        ranked = tuple(
            (int(c), float(probabilities[i, c])) for c in top3[i]
        )
        errors.append(ErrorRecord(int(i), int(labels[i]), ranked))

    meta = dict(metadata or {})
    meta["error_cap"] = max_errors
    confusion.setflags(write=False)
    return EvalReport(
        accuracy=accuracy,
        per_class_accuracy=per_class,
        confusion=confusion,
        top3_accuracy=top3_accuracy,
        errors=errors,
        metadata=meta,
    )


def _class_names(classes: int) -> list[str]:
    if classes == len(CLASS_NAMES):
        return list(CLASS_NAMES)
    return [f"class{i}" for i in range(classes)]


def render_report(report: EvalReport, format: str = "text") -> bytes:
    """Render as aligned text tables or as CSV.

    CSV: a header row of class names, the confusion matrix as integer rows,
    then `accuracy,<value>` and `top3_accuracy,<value>` at 4 decimal places.
    """
    if format == "csv":
        return _render_csv(report)
    if format == "text":
        return _render_text(report)
    raise ValueError(f"format must be 'text' or 'csv', got {format!r}")


def _render_csv(report: EvalReport) -> bytes:
    names = _class_names(report.confusion.shape[0])
    lines = [",".join(names)]
    for row in report.confusion:
        lines.append(",".join(str(int(v)) for v in row))
    lines.append(f"accuracy,{report.accuracy:.4f}")
    lines.append(f"top3_accuracy,{report.top3_accuracy:.4f}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _render_text(report: EvalReport) -> bytes:
    names = _class_names(report.confusion.shape[0])
    width = max(len(n) for n in names) + 1
    cell = max(6, max(len(str(int(v))) for v in report.confusion.ravel()) + 1)
    lines = [
        f"samples: {report.n}",
        f"accuracy: {report.accuracy:.4f}",
        f"top3_accuracy: {report.top3_accuracy:.4f}",
        "",
        "confusion (rows = true, columns = predicted):",
        " " * width + "".join(f"{n[:cell - 1]:>{cell}}" for n in names),
    ]
    for name, row in zip(names, report.confusion):
        lines.append(
            f"{name:<{width}}" + "".join(f"{int(v):>{cell}}" for v in row)
        )
    lines.append("")
    lines.append("per-class accuracy:")
    for name, value in zip(names, report.per_class_accuracy):
        shown = "-" if np.isnan(value) else f"{value:.4f}"
        lines.append(f"  {name:<{width}} {shown}")
    if report.errors:
        lines.append("")
        shown = len(report.errors)
        lines.append(f"misclassified samples (showing {shown}):")
        for record in report.errors:
            ranked = ", ".join(
                f"{names[label]}={p:.3f}" for label, p in record.top3
            )
            lines.append(
                f"  #{record.index} true={names[record.true_label]} top3: {ranked}"
            )
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_report_csv(data: bytes) -> dict:
    """Parse _render_csv output back into its parts (round-trip check)."""
    lines = data.decode("utf-8").strip().splitlines()
    names = lines[0].split(",")
    classes = len(names)
    confusion = np.array(
        [[int(v) for v in line.split(",")] for line in lines[1 : 1 + classes]],
        dtype=np.int64,
    )
    if confusion.shape != (classes, classes):
        raise DimensionError(f"confusion block has shape {confusion.shape}")
    summary = dict(line.split(",", 1) for line in lines[1 + classes :])
    return {
        "class_names": names,
        "confusion": confusion,
        "accuracy": float(summary["accuracy"]),
        "top3_accuracy": float(summary["top3_accuracy"]),
    }
