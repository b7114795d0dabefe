"""Out-of-fold stacking: k-fold base learners feeding a logistic-regression meta-model.

For every base learner and every fold f, a fold model is fitted on the
documents outside f (language models and standardizers included) and
predicts the documents inside f. The assembled out-of-fold probabilities
train the meta-model; at test time each learner's k fold models are
averaged before the meta-model combines them.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .classifiers import (
    LinearModel,
    MeanLikelihoodDetector,
    NaiveBayesModel,
    TrainConfig,
    fit_mean_likelihood,
    train_logreg,
    train_naive_bayes,
)
from .corpus import Dataset, Document, FoldAssignment, LabelSpace
from .errors import (
    EmptyClass,
    FoldMismatch,
    GentextError,
    InputError,
    MissingColumn,
    ShapeMismatch,
    UnknownLearner,
    VersionMismatch,
)
from .evaluation import PredictionSet
from .features import FeatureConfig, FeatureMatrix, FeaturePipeline
from .ngram_lm import DEFAULT_BIN_EDGES, train_lm

LEARNER_VERSION = 1

# hyperparameters every learner understands; unused ones are ignored
DEFAULT_PARAMS: dict[str, Any] = {
    "lm_order": 3,
    "lm_add_k": 0.1,
    "lm_min_count": 1,
    "bin_edges": DEFAULT_BIN_EDGES,
    "nb_add_k": 1.0,
    "lm_source": "machine",
    "learning_rate": 0.1,
    "l2_strength": 1e-3,
    "max_epochs": 2000,
    "batch_size": 0,
    "tolerance": 1e-8,
    "seed": 0,
}


@dataclass(frozen=True)
class BaseLearnerSpec:
    name: str
    kind: str
    features: str = "both"
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.name or "." in self.name or "," in self.name:
            raise InputError(f"learner name {self.name!r} must be non-empty without '.' or ','")
        unknown = set(self.params) - set(DEFAULT_PARAMS)
        if unknown:
            raise InputError(f"unknown learner parameters: {sorted(unknown)}")

    def param(self, key: str):
        return self.params.get(key, DEFAULT_PARAMS[key])

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=float(self.param("learning_rate")),
            l2_strength=float(self.param("l2_strength")),
            max_epochs=int(self.param("max_epochs")),
            batch_size=int(self.param("batch_size")),
            tolerance=float(self.param("tolerance")),
            seed=int(self.param("seed")),
        )

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(
            kind=self.features,
            bin_edges=tuple(self.param("bin_edges")),
            lm_order=int(self.param("lm_order")),
            lm_add_k=float(self.param("lm_add_k")),
            lm_min_count=int(self.param("lm_min_count")),
        )

    def to_dict(self) -> dict:
        params = {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(self.params.items())}
        return {"name": self.name, "kind": self.kind, "features": self.features, "params": params}

    @classmethod
    def from_dict(cls, data: Mapping) -> "BaseLearnerSpec":
        params = {k: (tuple(v) if isinstance(v, list) else v) for k, v in data["params"].items()}
        return cls(data["name"], data["kind"], data["features"], params)


class FittedLearner:
    """A trained base learner: maps documents to an N x C probability matrix."""

    spec: BaseLearnerSpec
    space: LabelSpace

    def predict_proba(self, docs: Sequence[Document]) -> np.ndarray:
        raise NotImplementedError

    def parameters(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "version": LEARNER_VERSION,
            "learner": self.spec.to_dict(),
            "label_space": self.space.to_dict(),
            **self.parameters(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, separators=(",", ":"))


@dataclass
class LogregLearner(FittedLearner):
    spec: BaseLearnerSpec
    pipeline: FeaturePipeline
    model: LinearModel

    @property
    def space(self) -> LabelSpace:
        return self.model.space

    def predict_proba(self, docs):
        return self.model.predict_proba(self.pipeline.transform(list(docs)))

    def parameters(self):
        return {"model": self.model.to_dict(), "features": self.pipeline.to_dict()}


@dataclass
class NaiveBayesLearner(FittedLearner):
    spec: BaseLearnerSpec
    model: NaiveBayesModel

    @property
    def space(self) -> LabelSpace:
        return self.model.space

    def predict_proba(self, docs):
        return self.model.predict_proba(list(docs))

    def parameters(self):
        return {"model": self.model.to_dict()}


@dataclass
class MeanLikelihoodLearner(FittedLearner):
    spec: BaseLearnerSpec
    model: MeanLikelihoodDetector

    @property
    def space(self) -> LabelSpace:
        return self.model.space

    def predict_proba(self, docs):
        return self.model.predict_proba(list(docs))

    def parameters(self):
        return {"model": self.model.to_dict()}


def _fit_logreg(spec: BaseLearnerSpec, train: Dataset) -> LogregLearner:
    if spec.features == "tokens":
        raise InputError("logreg learners need surface, lm or both features")
    pipeline, X = FeaturePipeline.fit_transform(spec.feature_config(), train)
    model = train_logreg(X, train.labels, spec.train_config(), train.space)
    return LogregLearner(spec, pipeline, model)


def _fit_naive_bayes(spec: BaseLearnerSpec, train: Dataset) -> NaiveBayesLearner:
    return NaiveBayesLearner(spec, train_naive_bayes(train, float(spec.param("nb_add_k"))))


def _fit_mean_likelihood(spec: BaseLearnerSpec, train: Dataset) -> MeanLikelihoodLearner:
    source = spec.param("lm_source")
    human = train.space.human_index
    labels = train.labels or ()
    if source == "machine":
        texts = [d.text for d, y in zip(train.documents, labels) if y != human]
    elif source == "human":
        texts = [d.text for d, y in zip(train.documents, labels) if y == human]
    elif source == "all":
        texts = [d.text for d in train.documents]
    else:
        raise InputError(f"lm_source must be machine, human or all, not {source!r}")
    if not texts:
        raise EmptyClass(source)
    lm = train_lm(
        texts,
        order=int(spec.param("lm_order")),
        add_k=float(spec.param("lm_add_k")),
        min_count=int(spec.param("lm_min_count")),
    )
    return MeanLikelihoodLearner(spec, fit_mean_likelihood(train, lm))


def _load_logreg(spec, data):
    return LogregLearner(
        spec, FeaturePipeline.from_dict(data["features"]), LinearModel.from_dict(data["model"])
    )


_REGISTRY: dict[str, tuple[Callable, Callable | None]] = {
    "logreg": (_fit_logreg, _load_logreg),
    "naive_bayes": (
        _fit_naive_bayes,
        lambda spec, data: NaiveBayesLearner(spec, NaiveBayesModel.from_dict(data["model"])),
    ),
    "mean_likelihood": (
        _fit_mean_likelihood,
        lambda spec, data: MeanLikelihoodLearner(
            spec, MeanLikelihoodDetector.from_dict(data["model"])
        ),
    ),
}


def register_learner(kind: str, fit: Callable, load: Callable | None = None) -> None:
    """Make a new learner kind available to specs; ``fit(spec, train)`` returns a FittedLearner."""
    _REGISTRY[kind] = (fit, load)


def learner_kinds() -> list[str]:
    return sorted(_REGISTRY)


def fit_learner(spec: BaseLearnerSpec, train: Dataset) -> FittedLearner:
    try:
        fit, _ = _REGISTRY[spec.kind]
    except KeyError:
        raise UnknownLearner(f"unknown learner kind {spec.kind!r}")
    if train.labels is None:
        raise InputError("training data must be labelled")
    return fit(spec, train)


def learner_from_dict(data: dict) -> FittedLearner:
    if data.get("version") != LEARNER_VERSION:
        raise VersionMismatch(
            f"learner file version {data.get('version')!r}, expected {LEARNER_VERSION}"
        )
    spec = BaseLearnerSpec.from_dict(data["learner"])
    try:
        _, load = _REGISTRY[spec.kind]
    except KeyError:
        raise UnknownLearner(f"unknown learner kind {spec.kind!r}")
    if load is None:
        raise UnknownLearner(f"learner kind {spec.kind!r} cannot be loaded from disk")
    return load(spec, data)


@dataclass(frozen=True)
class OofBlock:
    learner: str
    probs: np.ndarray  # N x C, row i predicted by the fold model that excluded row i


@dataclass(frozen=True)
class OofMatrix:
    ids: tuple[str, ...]
    space: LabelSpace
    blocks: tuple[OofBlock, ...]
    k: int | None = None
    seed: int | None = None

    @property
    def learners(self) -> tuple[str, ...]:
        return tuple(b.learner for b in self.blocks)

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(f"{b.learner}.{c}" for b in self.blocks for c in self.space.names)

    @property
    def values(self) -> np.ndarray:
        if not self.blocks:
            return np.zeros((len(self.ids), 0))
        return np.hstack([b.probs for b in self.blocks])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["id", *self.columns])
        for doc_id, row in zip(self.ids, self.values):
            writer.writerow([doc_id, *(repr(float(v)) for v in row)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, content: str, space: LabelSpace) -> "OofMatrix":
        rows = list(csv.reader(io.StringIO(content)))
        if not rows or rows[0][:1] != ["id"]:
            raise MissingColumn("OOF CSV must start with an 'id' column")
        columns = rows[0][1:]
        C = len(space)
        if len(columns) % C:
            raise ShapeMismatch("OOF column count is not a multiple of the class count")
        ids = tuple(r[0] for r in rows[1:])
        values = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float)
        values = values.reshape(len(ids), len(columns))
        blocks = []
        for start in range(0, len(columns), C):
            learner = columns[start].rsplit(".", 1)[0]
            expected = [f"{learner}.{c}" for c in space.names]
            if columns[start:start + C] != expected:
                raise ShapeMismatch(f"OOF columns for {learner!r} are not {expected}")
            blocks.append(OofBlock(learner, values[:, start:start + C]))
        return cls(ids, space, tuple(blocks))


def _fit_fold(spec: BaseLearnerSpec, train: Dataset, fold_idx: np.ndarray, f: int):
    train_rows = np.flatnonzero(fold_idx != f)
    held_rows = np.flatnonzero(fold_idx == f)
    try:
        model = fit_learner(spec, train.subset(train_rows))
        probs = model.predict_proba([train.documents[i] for i in held_rows])
    except GentextError as err:
        err.fold = f
        raise
    return model, held_rows, probs


def run_cv(
    spec: BaseLearnerSpec, train: Dataset, folds: FoldAssignment, threads: int = 1
) -> tuple[OofBlock, list[FittedLearner]]:
    fold_idx = folds.folds_for(train)
    for f in range(folds.k):
        if not np.any(fold_idx == f):
            raise FoldMismatch(f"fold {f} is empty")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda f: _fit_fold(spec, train, fold_idx, f), range(folds.k)))
    else:
        results = [_fit_fold(spec, train, fold_idx, f) for f in range(folds.k)]

    probs = np.full((len(train), len(train.space)), np.nan)
    models = []
    for model, rows, fold_probs in results:
        probs[rows] = fold_probs
        models.append(model)
    return OofBlock(spec.name, probs), models


def average_test_predictions(fold_models: Sequence[FittedLearner], docs: Sequence[Document]):
    if not fold_models:
        raise InputError("need at least one fold model")
    space = fold_models[0].space
    if any(m.space != space for m in fold_models):
        raise ShapeMismatch("fold models disagree on the label space")
    docs = list(docs)
    total = np.zeros((len(docs), len(space)))
    for model in fold_models:
        probs = model.predict_proba(docs)
        if probs.shape != total.shape:
            raise ShapeMismatch(f"fold model returned shape {probs.shape}, expected {total.shape}")
        total += probs
    return total / len(fold_models)


def train_meta(oof: OofMatrix, y: Sequence[int], cfg: TrainConfig | None = None) -> LinearModel:
    if len(y) != len(oof.ids):
        raise ShapeMismatch("OOF rows and labels differ in length")
    X = FeatureMatrix(oof.ids, oof.columns, oof.values)
    return train_logreg(X, y, cfg or TrainConfig(), oof.space)


@dataclass
class EnsembleModel:
    specs: tuple[BaseLearnerSpec, ...]
    fold_models: dict[str, list[FittedLearner]]
    meta: LinearModel
    space: LabelSpace
    folds: FoldAssignment

    def __post_init__(self):
        if self.meta.weights.shape[1] != len(self.specs) * len(self.space):
            raise ShapeMismatch("meta-model width must be learners x classes")


def fit_ensemble(
    specs: Sequence[BaseLearnerSpec],
    train: Dataset,
    folds: FoldAssignment,
    meta_cfg: TrainConfig | None = None,
    threads: int = 1,
) -> tuple[EnsembleModel, OofMatrix]:
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise InputError("learner names must be unique within an ensemble")
    if not specs:
        raise InputError("ensemble needs at least one base learner")
    blocks, fold_models = [], {}
    for spec in specs:
        block, models = run_cv(spec, train, folds, threads=threads)
        blocks.append(block)
        fold_models[spec.name] = models
    oof = OofMatrix(train.ids, train.space, tuple(blocks), folds.k, folds.seed)
    meta = train_meta(oof, train.labels, meta_cfg)
    return EnsembleModel(tuple(specs), fold_models, meta, train.space, folds), oof


def stacked_test_features(e: EnsembleModel, docs: Sequence[Document]) -> np.ndarray:
    blocks = []
    for spec in e.specs:
        if spec.name not in e.fold_models:
            raise UnknownLearner(f"ensemble has no fold models for {spec.name!r}")
        blocks.append(average_test_predictions(e.fold_models[spec.name], docs))
    return np.hstack(blocks) if blocks else np.zeros((len(docs), 0))


def ensemble_predict(e: EnsembleModel, test: Dataset) -> PredictionSet:
    if not len(test):
        return PredictionSet((), np.zeros((0, len(e.space))), e.space)
    stacked = stacked_test_features(e, test.documents)
    return PredictionSet(test.ids, e.meta.predict_proba(stacked), e.space)


def train_single(spec: BaseLearnerSpec, train: Dataset) -> FittedLearner:
    """Fit one learner on the whole training set, without folds."""
    return fit_learner(spec, train)


def predict_single(model: FittedLearner, test: Dataset) -> PredictionSet:
    probs = model.predict_proba(test.documents) if len(test) else np.zeros((0, len(model.space)))
    return PredictionSet(test.ids, probs, model.space)
