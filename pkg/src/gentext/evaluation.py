"""Prediction containers, accuracy/confusion scoring and comparison tables."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Dataset, LabelSpace
from .errors import DuplicateId, IdMismatch, InputError, MissingColumn, ShapeMismatch, UnknownLabel


@dataclass(frozen=True)
class PredictionSet:
    ids: tuple[str, ...]
    probs: np.ndarray  # N x C, rows on the simplex
    space: LabelSpace
    labels: np.ndarray = field(init=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float).reshape(len(self.ids), len(self.space))
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "probs", probs)
        if len(set(self.ids)) != len(self.ids):
            raise InputError("prediction ids must be unique")
        # np.argmax returns the first maximum, i.e. the earlier label wins ties
        object.__setattr__(self, "labels", probs.argmax(axis=1) if len(probs) else np.zeros(0, int))

    @classmethod
    def from_labels(cls, ids: Sequence[str], labels: Sequence[int], space: LabelSpace):
        probs = np.zeros((len(ids), len(space)))
        probs[np.arange(len(ids)), np.asarray(labels, dtype=int)] = 1.0
        return cls(tuple(ids), probs, space)

    def __len__(self) -> int:
        return len(self.ids)

    def label_names(self) -> list[str]:
        return [self.space.names[i] for i in self.labels]

    def classes_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["Id", "Class"])
        for doc_id, name in zip(self.ids, self.label_names()):
            writer.writerow([doc_id, name])
        return buf.getvalue()

    def probabilities_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["Id", *self.space.names])
        for doc_id, row in zip(self.ids, self.probs):
            writer.writerow([doc_id, *(repr(float(p)) for p in row)])
        return buf.getvalue()

    def write(self, classes_path: str | Path, probabilities_path: str | Path | None = None):
        Path(classes_path).write_text(self.classes_csv(), encoding="utf-8")
        if probabilities_path is not None:
            Path(probabilities_path).write_text(self.probabilities_csv(), encoding="utf-8")


def read_predictions(path: str | Path, space: LabelSpace) -> PredictionSet:
    """Read an ``Id,Class`` file; probabilities become one-hot rows."""
    rows = list(csv.reader(io.StringIO(Path(path).read_text(encoding="utf-8"))))
    if not rows or rows[0] != ["Id", "Class"]:
        raise MissingColumn(f"{path}: header must be 'Id,Class'")
    ids, labels = [], []
    seen = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise MissingColumn(f"{path}: row {lineno} must have 2 fields")
        if row[0] in seen:
            raise DuplicateId(row[0], row=lineno)
        seen.add(row[0])
        if row[1] not in space.names:
            raise UnknownLabel(row[1], row=lineno)
        ids.append(row[0])
        labels.append(space.names.index(row[1]))
    return PredictionSet.from_labels(ids, labels, space)


def read_probabilities(path: str | Path, space: LabelSpace) -> PredictionSet:
    rows = list(csv.reader(io.StringIO(Path(path).read_text(encoding="utf-8"))))
    if not rows or rows[0] != ["Id", *space.names]:
        raise MissingColumn(f"{path}: header must be 'Id' followed by the class names")
    ids = [r[0] for r in rows[1:]]
    probs = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float)
    return PredictionSet(tuple(ids), probs.reshape(len(ids), len(space)), space)


def _aligned(preds: PredictionSet, gold: Dataset) -> tuple[np.ndarray, np.ndarray]:
    if gold.labels is None:
        raise InputError("gold dataset has no labels")
    if preds.space != gold.space:
        raise ShapeMismatch("predictions and gold use different label spaces")
    pred_ids, gold_ids = set(preds.ids), set(gold.ids)
    if pred_ids != gold_ids:
        missing = [i for i in gold.ids if i not in pred_ids]
        extra = [i for i in preds.ids if i not in gold_ids]
        raise IdMismatch(missing, extra)
    position = {doc_id: i for i, doc_id in enumerate(preds.ids)}
    predicted = np.array([preds.labels[position[i]] for i in gold.ids], dtype=int)
    return np.asarray(gold.labels, dtype=int), predicted


def confusion_matrix(preds: PredictionSet, gold: Dataset) -> np.ndarray:
    """Entry (i, j) counts gold-class-i documents predicted as class j."""
    actual, predicted = _aligned(preds, gold)
    C = len(gold.space)
    out = np.zeros((C, C), dtype=int)
    np.add.at(out, (actual, predicted), 1)
    return out


def accuracy(preds: PredictionSet, gold: Dataset) -> float:
    actual, predicted = _aligned(preds, gold)
    if actual.size == 0:
        return 0.0
    return int(np.sum(actual == predicted)) / actual.size


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    n: int
    space: LabelSpace
    # classes whose precision/recall had a zero denominator and were reported as 0
    undefined_precision: tuple[int, ...] = ()
    undefined_recall: tuple[int, ...] = ()

    @property
    def f1(self) -> np.ndarray:
        denom = self.precision + self.recall
        safe = np.where(denom > 0, denom, 1.0)
        return np.where(denom > 0, 2 * self.precision * self.recall / safe, 0.0)

    @property
    def macro_f1(self) -> float:
        return float(self.f1.mean())


def report_from_confusion(confusion: np.ndarray, space: LabelSpace) -> EvalReport:
    confusion = np.asarray(confusion, dtype=int)
    n = int(confusion.sum())
    tp = np.diag(confusion).astype(float)
    predicted = confusion.sum(axis=0)
    support = confusion.sum(axis=1)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    return EvalReport(
        accuracy=int(np.trace(confusion)) / n if n else 0.0,
        confusion=confusion,
        precision=precision,
        recall=recall,
        n=n,
        space=space,
        undefined_precision=tuple(int(i) for i in np.flatnonzero(predicted == 0)),
        undefined_recall=tuple(int(i) for i in np.flatnonzero(support == 0)),
    )


def evaluate(preds: PredictionSet, gold: Dataset) -> EvalReport:
    return report_from_confusion(confusion_matrix(preds, gold), gold.space)


def format_evaluation(report: EvalReport) -> str:
    names = report.space.names
    width = max(len(n) for n in names + ("gold\\pred",))
    cell = max(max(len(n) for n in names), len(str(int(report.confusion.max(initial=0)))))
    lines = [
        f"n {report.n}",
        f"accuracy {report.accuracy:.5f}",
        f"macro_f1 {report.macro_f1:.5f}",
        "confusion (rows: gold, columns: predicted)",
        "gold\\pred".ljust(width) + "".join(" " + n.rjust(cell) for n in names),
    ]
    for name, row in zip(names, report.confusion):
        lines.append(name.ljust(width) + "".join(" " + str(v).rjust(cell) for v in row))
    lines.append("class".ljust(width) + " precision recall support")
    for c, name in enumerate(names):
        flag = "*" if c in report.undefined_precision or c in report.undefined_recall else ""
        lines.append(
            f"{name.ljust(width)} {report.precision[c]:9.5f} {report.recall[c]:6.5f}"
            f" {int(report.confusion[c].sum())}{flag}"
        )
    if report.undefined_precision or report.undefined_recall:
        lines.append("* zero denominator, reported as 0")
    return "\n".join(lines) + "\n"


def compare_report(
    runs: Sequence[tuple[str, EvalReport]],
    fmt: str = "text",
    fold_std: Mapping[str, float] | None = None,
) -> str:
    """Table of run accuracies, in the order given, at 5 decimal places."""
    if not runs:
        raise InputError("compare_report needs at least one run")
    fold_std = fold_std or {}
    with_std = any(name in fold_std for name, _ in runs)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["model", "accuracy", "n"] + (["fold_stddev"] if with_std else []))
        for name, rep in runs:
            row = [name, f"{rep.accuracy:.5f}", rep.n]
            if with_std:
                row.append(f"{fold_std[name]:.5f}" if name in fold_std else "")
            writer.writerow(row)
        return buf.getvalue()
    if fmt != "text":
        raise InputError(f"unknown report format {fmt!r}")
    width = max(len(name) for name, _ in runs + [("model", None)])
    header = "model".ljust(width) + " accuracy"
    if with_std:
        header += " fold stddev"
    lines = [header]
    for name, rep in runs:
        line = f"{name.ljust(width)} {rep.accuracy:.5f}"
        if name in fold_std:
            line += f"  ±{fold_std[name]:.5f}"
        lines.append(line.rstrip())
    return "\n".join(lines) + "\n"


def load_report_csv(content: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(content)))
    out = []
    for row in rows:
        entry = {"model": row["model"], "accuracy": float(row["accuracy"]), "n": int(row["n"])}
        if row.get("fold_stddev"):
            entry["fold_stddev"] = float(row["fold_stddev"])
        out.append(entry)
    return out
