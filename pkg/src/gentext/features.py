"""Document feature extraction: surface statistics and LM detector features."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Dataset, Document
from .errors import EmptyClass, InputError, ShapeMismatch
from .ngram_lm import (
    DEFAULT_BIN_EDGES,
    NGramModel,
    is_punctuation,
    text_statistics,
    tokenize,
    train_lm,
)

FEATURE_SET_VERSION = 1

SURFACE_NAMES = (
    "char_count",
    "token_count",
    "mean_token_len",
    "punctuation_ratio",
    "digit_ratio",
    "uppercase_ratio",
    "type_token_ratio",
)

FEATURE_KINDS = ("surface", "lm", "both")


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.names) != len(self.values):
            raise ShapeMismatch("names and values differ in length")
        if not all(math.isfinite(v) for v in self.values):
            raise InputError("feature values must be finite")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))


@dataclass(frozen=True)
class FeatureMatrix:
    ids: tuple[str, ...]
    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(len(self.ids), len(self.names))
        object.__setattr__(self, "values", values)
        if len(set(self.ids)) != len(self.ids):
            raise InputError("feature matrix row ids must be unique")

    @classmethod
    def from_vectors(cls, ids: Sequence[str], vectors: Sequence[FeatureVector], names=None):
        if names is None:
            names = vectors[0].names if vectors else ()
        for v in vectors:
            if v.names != tuple(names):
                raise ShapeMismatch("feature vectors disagree on names")
        values = np.array([v.values for v in vectors], dtype=float)
        return cls(tuple(ids), tuple(names), values)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["id", *self.names])
        for doc_id, row in zip(self.ids, self.values):
            writer.writerow([doc_id, *(repr(float(v)) for v in row)])
        return buf.getvalue()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    @classmethod
    def from_csv(cls, content: str) -> "FeatureMatrix":
        rows = list(csv.reader(io.StringIO(content)))
        if not rows or rows[0][:1] != ["id"]:
            raise InputError("feature CSV must start with an 'id' column")
        names = tuple(rows[0][1:])
        ids = tuple(r[0] for r in rows[1:])
        values = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float)
        return cls(ids, names, values.reshape(len(ids), len(names)))


def surface_features(d: Document) -> FeatureVector:
    text = d.text
    tokens = tokenize(text)
    n_chars = len(text)
    n_tokens = len(tokens)
    punct = sum(1 for t in tokens if is_punctuation(t))
    values = (
        float(n_chars),
        float(n_tokens),
        sum(len(t) for t in tokens) / n_tokens if n_tokens else 0.0,
        punct / n_tokens if n_tokens else 0.0,
        sum(ch.isdigit() for ch in text) / n_chars if n_chars else 0.0,
        sum(ch.isupper() for ch in text) / n_chars if n_chars else 0.0,
        len(set(tokens)) / n_tokens if n_tokens else 0.0,
    )
    return FeatureVector(SURFACE_NAMES, values)


def lm_feature_names(bin_edges: Sequence[int] = DEFAULT_BIN_EDGES) -> tuple[str, ...]:
    bins = [f"rank_le{e}" for e in bin_edges] + [f"rank_gt{bin_edges[-1]}"]
    return (
        "mean_ll_human",
        "mean_ll_machine",
        "ll_diff",
        *(f"human_{b}" for b in bins),
        *(f"machine_{b}" for b in bins),
    )


def lm_features(
    d: Document,
    human_lm: NGramModel,
    machine_lm: NGramModel,
    bin_edges: Sequence[int] = DEFAULT_BIN_EDGES,
) -> FeatureVector:
    ll_h, hist_h = text_statistics(human_lm, d.text, bin_edges)
    ll_m, hist_m = text_statistics(machine_lm, d.text, bin_edges)
    values = (ll_h, ll_m, ll_h - ll_m, *hist_h, *hist_m)
    return FeatureVector(lm_feature_names(bin_edges), tuple(float(v) for v in values))


@dataclass(frozen=True)
class Standardizer:
    names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self) -> dict:
        return {"names": list(self.names), "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Standardizer":
        return cls(tuple(data["names"]), np.array(data["mean"], float), np.array(data["std"], float))


def fit_standardizer(m: FeatureMatrix) -> Standardizer:
    if len(m.ids) == 0:
        raise InputError("cannot fit a standardizer on zero rows")
    mean = m.values.mean(axis=0)
    std = m.values.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return Standardizer(m.names, mean, std)


def apply_standardizer(s: Standardizer, m: FeatureMatrix) -> FeatureMatrix:
    if s.names != m.names:
        raise ShapeMismatch("feature names differ from the fitted standardizer")
    return FeatureMatrix(m.ids, m.names, (m.values - s.mean) / s.std)


def train_class_lms(
    train: Dataset, order: int = 3, add_k: float = 0.1, min_count: int = 1
) -> tuple[NGramModel, NGramModel]:
    """Human LM from human-labelled documents, machine LM from all others."""
    if train.labels is None:
        raise InputError("class-conditional language models need labels")
    human = train.space.human_index
    human_docs = [d.text for d, y in zip(train.documents, train.labels) if y == human]
    machine_docs = [d.text for d, y in zip(train.documents, train.labels) if y != human]
    if not human_docs:
        raise EmptyClass(train.space.names[human])
    if not machine_docs:
        raise EmptyClass("machine")
    return (
        train_lm(human_docs, order=order, add_k=add_k, min_count=min_count),
        train_lm(machine_docs, order=order, add_k=add_k, min_count=min_count),
    )


@dataclass(frozen=True)
class FeatureConfig:
    kind: str = "both"
    bin_edges: tuple[int, ...] = DEFAULT_BIN_EDGES
    lm_order: int = 3
    lm_add_k: float = 0.1
    lm_min_count: int = 1

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise InputError(f"unknown feature kind {self.kind!r}")
        object.__setattr__(self, "bin_edges", tuple(int(e) for e in self.bin_edges))

    @property
    def uses_lm(self) -> bool:
        return self.kind in ("lm", "both")

    def names(self) -> tuple[str, ...]:
        names: tuple[str, ...] = ()
        if self.kind in ("surface", "both"):
            names += SURFACE_NAMES
        if self.uses_lm:
            names += lm_feature_names(self.bin_edges)
        return names

    def to_dict(self) -> dict:
        return {
            "version": FEATURE_SET_VERSION,
            "kind": self.kind,
            "bin_edges": list(self.bin_edges),
            "lm_order": self.lm_order,
            "lm_add_k": self.lm_add_k,
            "lm_min_count": self.lm_min_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureConfig":
        data = {k: v for k, v in data.items() if k != "version"}
        return cls(**{**data, "bin_edges": tuple(data["bin_edges"])})


def extract(
    docs: Sequence[Document],
    config: FeatureConfig,
    human_lm: NGramModel | None = None,
    machine_lm: NGramModel | None = None,
) -> FeatureMatrix:
    names = config.names()
    rows = []
    for doc in docs:
        values: tuple[float, ...] = ()
        if config.kind in ("surface", "both"):
            values += surface_features(doc).values
        if config.uses_lm:
            if human_lm is None or machine_lm is None:
                raise InputError("LM features need both human and machine models")
            values += lm_features(doc, human_lm, machine_lm, config.bin_edges).values
        rows.append(values)
    values = np.array(rows, dtype=float).reshape(len(docs), len(names))
    return FeatureMatrix(tuple(d.id for d in docs), names, values)


@dataclass
class FeaturePipeline:
    """Feature extraction fitted on one training split: LMs plus standardizer."""

    config: FeatureConfig
    standardizer: Standardizer
    human_lm: NGramModel | None = None
    machine_lm: NGramModel | None = None

    @classmethod
    def fit(cls, config: FeatureConfig, train: Dataset) -> "FeaturePipeline":
        return cls.fit_transform(config, train)[0]

    @classmethod
    def fit_transform(
        cls, config: FeatureConfig, train: Dataset
    ) -> tuple["FeaturePipeline", FeatureMatrix]:
        """Fit on ``train`` and return its standardized features without a second pass."""
        human_lm = machine_lm = None
        if config.uses_lm:
            human_lm, machine_lm = train_class_lms(
                train, config.lm_order, config.lm_add_k, config.lm_min_count
            )
        raw = extract(train.documents, config, human_lm, machine_lm)
        standardizer = fit_standardizer(raw)
        pipeline = cls(config, standardizer, human_lm, machine_lm)
        return pipeline, apply_standardizer(standardizer, raw)

    @property
    def names(self) -> tuple[str, ...]:
        return self.config.names()

    def transform(self, docs: Sequence[Document]) -> FeatureMatrix:
        raw = extract(docs, self.config, self.human_lm, self.machine_lm)
        return apply_standardizer(self.standardizer, raw)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "standardizer": self.standardizer.to_dict(),
            "human_lm": None if self.human_lm is None else self.human_lm.to_dict(),
            "machine_lm": None if self.machine_lm is None else self.machine_lm.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeaturePipeline":
        lm = lambda d: None if d is None else NGramModel.from_dict(d)  # noqa: E731
        return cls(
            FeatureConfig.from_dict(data["config"]),
            Standardizer.from_dict(data["standardizer"]),
            lm(data["human_lm"]),
            lm(data["machine_lm"]),
        )
