"""Shared-task datasets: loading, writing, concatenation and fold assignment.

Datasets are headered, tab-separated UTF-8 files with columns ``id``,
``text`` and optionally ``label``. Text is kept byte-for-byte as read.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateId,
    EmptyText,
    FoldMismatch,
    InputError,
    MissingColumn,
    SpaceMismatch,
    TooFewDocuments,
    UnknownLabel,
)


class SpaceKind(str, enum.Enum):
    BINARY = "binary"
    MULTICLASS = "multiclass"


BINARY_NAMES = ("H", "M")
MULTICLASS_NAMES = (
    "M2M-100",
    "Human",
    "OPUS-MT",
    "M-BART50",
    "ruGPT3-Medium",
    "ruGPT3-Small",
    "mT5-Large",
    "ruGPT3-Large",
    "ruT5-Base-Multitask",
    "mT5-Small",
    "ruT5-Base",
    "ruGPT2-Large",
    "M-BART",
    "ruT5-Large",
)


@dataclass(frozen=True)
class LabelSpace:
    kind: SpaceKind
    names: tuple[str, ...]

    def __post_init__(self):
        expected = BINARY_NAMES if self.kind is SpaceKind.BINARY else MULTICLASS_NAMES
        if tuple(self.names) != expected:
            raise InputError(f"{self.kind.value} label space must be {list(expected)}")

    @classmethod
    def binary(cls) -> "LabelSpace":
        return cls(SpaceKind.BINARY, BINARY_NAMES)

    @classmethod
    def multiclass(cls) -> "LabelSpace":
        return cls(SpaceKind.MULTICLASS, MULTICLASS_NAMES)

    @classmethod
    def for_task(cls, task: str) -> "LabelSpace":
        try:
            kind = SpaceKind(task)
        except ValueError:
            raise InputError(f"unknown task {task!r}; expected 'binary' or 'multiclass'")
        return cls.binary() if kind is SpaceKind.BINARY else cls.multiclass()

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownLabel(name)

    @property
    def human_index(self) -> int:
        """Index of the human-written class ("H" or "Human")."""
        return 0 if self.kind is SpaceKind.BINARY else self.names.index("Human")

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "names": list(self.names)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "LabelSpace":
        return cls(SpaceKind(data["kind"]), tuple(data["names"]))


@dataclass(frozen=True)
class Document:
    id: str
    text: str


@dataclass(frozen=True)
class Dataset:
    documents: tuple[Document, ...]
    space: LabelSpace
    labels: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(int(y) for y in self.labels))
            if len(self.labels) != len(self.documents):
                raise InputError("labels and documents differ in length")
            for y in self.labels:
                if not 0 <= y < len(self.space):
                    raise InputError(f"label index {y} out of range")
        seen = set()
        for doc in self.documents:
            if not doc.id:
                raise InputError("document id must be non-empty")
            if doc.id in seen:
                raise DuplicateId(doc.id)
            seen.add(doc.id)
            if not doc.text.strip():
                raise EmptyText(doc.id)

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def is_labeled(self) -> bool:
        return self.labels is not None

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(d.id for d in self.documents)

    def subset(self, indices: Sequence[int]) -> "Dataset":
        docs = tuple(self.documents[i] for i in indices)
        labels = None if self.labels is None else tuple(self.labels[i] for i in indices)
        return Dataset(docs, self.space, labels)

    def label_names(self) -> list[str]:
        if self.labels is None:
            raise InputError("dataset is unlabeled")
        return [self.space.names[y] for y in self.labels]


def load_dataset(path: str | Path, space: LabelSpace, has_labels: bool = True) -> Dataset:
    """Parse a headered TSV file of ``id<TAB>text[<TAB>label]`` rows.

    Errors name the 1-based line number of the offending row.
    """
    raw = Path(path).read_bytes()
    try:
        content = raw.decode("utf-8")
    except UnicodeDecodeError as err:
        raise InputError(f"{path}: not valid UTF-8 ({err})")
    return parse_dataset(content, space, has_labels)


def parse_dataset(content: str, space: LabelSpace, has_labels: bool = True) -> Dataset:
    lines = content.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MissingColumn("missing header line")
    header = [h.strip() for h in lines[0].rstrip("\r").split("\t")]
    required = ["id", "text"] + (["label"] if has_labels else [])
    for name in required:
        if name not in header:
            raise MissingColumn(f"missing column {name!r} in header")
    col = {name: header.index(name) for name in header}

    docs: list[Document] = []
    labels: list[int] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.rstrip("\r").split("\t")
        if len(fields) != len(header):
            raise MissingColumn(
                f"row {lineno}: expected {len(header)} tab-separated fields, got {len(fields)}"
            )
        doc_id = fields[col["id"]].strip()
        text = fields[col["text"]]
        if not doc_id:
            raise InputError(f"row {lineno}: empty id")
        if doc_id in seen:
            raise DuplicateId(doc_id, row=lineno)
        if not text.strip():
            raise EmptyText(doc_id, row=lineno)
        seen.add(doc_id)
        docs.append(Document(doc_id, text))
        if has_labels:
            name = fields[col["label"]].strip()
            if name not in space.names:
                raise UnknownLabel(name, row=lineno)
            labels.append(space.names.index(name))
    return Dataset(tuple(docs), space, tuple(labels) if has_labels else None)


def dumps_dataset(d: Dataset) -> str:
    header = ["id", "text"] + (["label"] if d.is_labeled else [])
    out = ["\t".join(header)]
    for i, doc in enumerate(d.documents):
        if any(ch in doc.text for ch in "\t\n\r"):
            raise InputError(f"id {doc.id!r}: tabs and line breaks cannot be written to TSV")
        row = [doc.id, doc.text]
        if d.labels is not None:
            row.append(d.space.names[d.labels[i]])
        out.append("\t".join(row))
    return "\n".join(out) + "\n"


def write_dataset(d: Dataset, path: str | Path) -> None:
    Path(path).write_text(dumps_dataset(d), encoding="utf-8")


def concat(a: Dataset, b: Dataset) -> Dataset:
    if a.space != b.space:
        raise SpaceMismatch("datasets use different label spaces")
    if a.is_labeled != b.is_labeled:
        raise SpaceMismatch("cannot concatenate labeled with unlabeled data")
    labels = None if a.labels is None else a.labels + b.labels
    return Dataset(a.documents + b.documents, a.space, labels)


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    seed: int
    fold_of: Mapping[str, int]

    def members(self, fold: int) -> list[str]:
        return [i for i, f in self.fold_of.items() if f == fold]

    def folds_for(self, d: Dataset) -> np.ndarray:
        if set(self.fold_of) != set(d.ids) or len(self.fold_of) != len(d):
            raise FoldMismatch("fold assignment does not cover the dataset exactly")
        return np.array([self.fold_of[i] for i in d.ids], dtype=int)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["id", "fold"])
        for doc_id, fold in self.fold_of.items():
            writer.writerow([doc_id, fold])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, content: str, k: int | None = None, seed: int = -1) -> "FoldAssignment":
        reader = csv.reader(io.StringIO(content))
        header = next(reader, None)
        if header != ["id", "fold"]:
            raise MissingColumn("fold file header must be 'id,fold'")
        fold_of: dict[str, int] = {}
        for row in reader:
            if row[0] in fold_of:
                raise DuplicateId(row[0])
            fold_of[row[0]] = int(row[1])
        if k is None:
            k = max(fold_of.values(), default=-1) + 1
        if any(not 0 <= f < k for f in fold_of.values()):
            raise InputError(f"fold index outside [0, {k})")
        return cls(k, seed, fold_of)


def assign_folds(d: Dataset, k: int = 5, seed: int = 0) -> FoldAssignment:
    """Stratified, seeded fold assignment.

    Each class is shuffled independently, then classes are dealt round-robin
    into folds with one cursor shared across classes, so both overall fold
    sizes and per-class counts differ by at most one.
    """
    if d.labels is None:
        raise InputError("fold assignment requires labels")
    if k < 2:
        raise InputError("k must be at least 2")
    if len(d) < k:
        raise TooFewDocuments(f"{len(d)} documents cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    labels = np.asarray(d.labels)
    fold = np.empty(len(d), dtype=int)
    cursor = 0
    for c in range(len(d.space)):
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(len(members))]
        for idx in members:
            fold[idx] = cursor % k
            cursor += 1
    fold_of = {doc.id: int(fold[i]) for i, doc in enumerate(d.documents)}
    return FoldAssignment(k, seed, fold_of)


def fold_class_counts(d: Dataset, folds: FoldAssignment) -> np.ndarray:
    """k × C table of class counts per fold."""
    table = np.zeros((folds.k, len(d.space)), dtype=int)
    for doc, y in zip(d.documents, d.labels or ()):
        table[folds.fold_of[doc.id], y] += 1
    return table
