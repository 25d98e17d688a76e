"""Error rates, confusion matrices, second guesses and rejection curves."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ensemble import ranked

DEFAULT_THRESHOLDS = tuple(round(0.1 * i, 1) for i in range(11))


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows true label, columns predicted

    @classmethod
    def from_labels(cls, true, predicted, class_count: int) -> "ConfusionMatrix":
        counts = np.zeros((class_count, class_count), dtype=np.int64)
        np.add.at(counts, (np.asarray(true), np.asarray(predicted)), 1)
        return cls(counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def errors(self) -> int:
        return self.total - int(np.trace(self.counts))

    def error_share(self) -> np.ndarray:
        """Percent of all errors in each cell; the diagonal is zero."""
        off = self.counts.astype(np.float64).copy()
        np.fill_diagonal(off, 0.0)
        if self.errors == 0:
            return off
        return 100.0 * off / self.errors


@dataclass(frozen=True)
class RejectionPoint:
    threshold: float
    reject_fraction: float
    error_on_accepted: float
    accepted_empty: bool


@dataclass(frozen=True)
class Misclassified:
    index: int
    true: int
    first: int
    second: int
    confidence: float


@dataclass
class EvaluationReport:
    error_rate: float
    confusion: ConfusionMatrix
    second_guess_error: float  # fraction of all samples wrong on both first and second guess
    second_guess_recovered: float  # fraction of errors whose second guess is right
    rejection_curve: list = field(default_factory=list)
    misclassified: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return self.confusion.total


def _check(predictions, labels):
    predictions = np.asarray(predictions, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.ndim != 2 or len(predictions) != len(labels):
        raise ValueError(f"{len(predictions)} predictions for {len(labels)} labels")
    return predictions, labels


def rejection_curve(predictions, labels, thresholds=DEFAULT_THRESHOLDS) -> list[RejectionPoint]:
    """Reject items whose top probability is below each threshold.

    The error over an empty accepted set is reported as 0 with
    ``accepted_empty`` set.
    """
    predictions, labels = _check(predictions, labels)
    thresholds = list(thresholds)
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be sorted ascending")
    conf = predictions.max(axis=1)
    wrong = predictions.argmax(axis=1) != labels
    n = len(labels)
    curve = []
    for t in thresholds:
        accepted = conf >= t
        n_acc = int(accepted.sum())
        err = float(wrong[accepted].sum() / n_acc) if n_acc else 0.0
        curve.append(RejectionPoint(float(t), (n - n_acc) / n if n else 0.0, err, n_acc == 0))
    return curve


def evaluate(predictions, labels, thresholds=DEFAULT_THRESHOLDS) -> EvaluationReport:
    predictions, labels = _check(predictions, labels)
    c = predictions.shape[1]
    order = np.array([ranked(p)[:2] for p in predictions]).reshape(-1, 2)
    first, second = order[:, 0], order[:, 1]
    wrong = first != labels
    n = len(labels)
    cm = ConfusionMatrix.from_labels(labels, first, c)
    both_wrong = wrong & (second != labels)
    n_wrong = int(wrong.sum())
    mis = [Misclassified(int(i), int(labels[i]), int(first[i]), int(second[i]),
                         float(predictions[i, first[i]])) for i in np.flatnonzero(wrong)]
    return EvaluationReport(
        error_rate=n_wrong / n if n else 0.0,
        confusion=cm,
        second_guess_error=float(both_wrong.sum()) / n if n else 0.0,
        second_guess_recovered=float((wrong & (second == labels)).sum()) / n_wrong if n_wrong else 0.0,
        rejection_curve=rejection_curve(predictions, labels, thresholds),
        misclassified=mis,
    )


def render_confusion(cm: ConfusionMatrix) -> str:
    """Aligned table of counts, followed by each cell's share of all errors in percent."""
    c = cm.counts.shape[0]
    share = cm.error_share()
    head = ["true\\pred"] + [str(j) for j in range(c)]
    rows = [head] + [[str(i)] + [str(v) for v in cm.counts[i]] for i in range(c)]
    rows += [["% errors"] + [""] * c]
    rows += [[str(i)] + [f"{share[i, j]:.2f}" if i != j else "-" for j in range(c)] for i in range(c)]
    width = max(len(x) for r in rows for x in r)
    return "\n".join(" ".join(x.rjust(width) for x in r).rstrip() for r in rows)


def confusion_to_csv(cm: ConfusionMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    c = cm.counts.shape[0]
    w.writerow(["true"] + [f"pred_{j}" for j in range(c)])
    for i in range(c):
        w.writerow([i] + [int(v) for v in cm.counts[i]])
    return buf.getvalue()


def confusion_from_csv(text: str) -> ConfusionMatrix:
    rows = list(csv.reader(io.StringIO(text)))
    return ConfusionMatrix(np.array([[int(v) for v in r[1:]] for r in rows[1:]], dtype=np.int64))


def rejection_to_csv(curve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["threshold", "reject_fraction", "error_on_accepted", "accepted_empty"])
    for p in curve:
        w.writerow([f"{p.threshold:.6f}", f"{p.reject_fraction:.6f}", f"{p.error_on_accepted:.6f}",
                    int(p.accepted_empty)])
    return buf.getvalue()


def errors_to_csv(mis) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "true", "first", "second", "confidence"])
    for m in mis:
        w.writerow([m.index, m.true, m.first, m.second, f"{m.confidence:.6f}"])
    return buf.getvalue()


def summary(report: EvaluationReport) -> str:
    lines = [
        f"samples: {report.count}",
        f"error rate: {100 * report.error_rate:.2f}% ({report.confusion.errors} errors)",
        f"top-2 error: {100 * report.second_guess_error:.2f}%",
        f"errors with correct second guess: {100 * report.second_guess_recovered:.1f}%",
        "rejection (threshold, rejected %, error on accepted %):",
    ]
    for p in report.rejection_curve:
        lines.append(f"  {p.threshold:.2f}  {100 * p.reject_fraction:6.2f}  {100 * p.error_on_accepted:6.2f}"
                     + ("  (none accepted)" if p.accepted_empty else ""))
    lines += ["confusion matrix:", render_confusion(report.confusion)]
    return "\n".join(lines)


def write_report(report: EvaluationReport, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "error").write_text(f"{report.error_rate:.6f}\n")
    (out / "confusion.csv").write_text(confusion_to_csv(report.confusion))
    (out / "rejection.csv").write_text(rejection_to_csv(report.rejection_curve))
    (out / "errors.csv").write_text(errors_to_csv(report.misclassified))
    (out / "report.txt").write_text(summary(report) + "\n")
    return out
