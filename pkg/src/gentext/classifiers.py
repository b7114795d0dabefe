"""Probabilistic classifiers sharing a ``predict_proba`` interface.

* ``LinearModel``: multinomial logistic regression, full-batch gradient descent.
* ``NaiveBayesModel``: multinomial naive Bayes over tokens.
* ``MeanLikelihoodDetector``: assigns a text to the class whose mean
  LM log-likelihood is closest to the text's own score.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Dataset, Document, LabelSpace
from .errors import (
    EmptyClass,
    InputError,
    NonFiniteLoss,
    ShapeMismatch,
    SingleClassData,
    VersionMismatch,
)
from .features import FeatureMatrix, FeatureVector
from .ngram_lm import UNK, NGramModel, mean_log_likelihood, tokenize

MODEL_VERSION = 1


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    l2_strength: float = 1e-3
    max_epochs: int = 2000
    batch_size: int = 0
    tolerance: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InputError("learning_rate must be > 0")
        if self.l2_strength < 0:
            raise InputError("l2_strength must be >= 0")
        if self.max_epochs < 1:
            raise InputError("max_epochs must be >= 1")
        if self.batch_size < 0:
            raise InputError("batch_size must be >= 0")


def _model_header(kind: str, space: LabelSpace, feature_names: Sequence[str]) -> dict:
    return {
        "version": MODEL_VERSION,
        "kind": kind,
        "label_space": space.to_dict(),
        "feature_names": list(feature_names),
    }


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray  # C x D
    bias: np.ndarray  # C
    feature_names: tuple[str, ...]
    space: LabelSpace
    epochs_run: int = 0

    def logits(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights.T + self.bias

    def predict_proba(self, x) -> np.ndarray:
        if isinstance(x, FeatureVector):
            if x.names != self.feature_names:
                raise ShapeMismatch("feature names differ from the model")
            return softmax(self.logits(np.asarray(x.values, float)[None, :]))[0]
        if isinstance(x, FeatureMatrix):
            if x.names != self.feature_names:
                raise ShapeMismatch("feature names differ from the model")
            x = x.values
        X = np.asarray(x, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ShapeMismatch(
                f"expected {len(self.feature_names)} features, got shape {X.shape}"
            )
        return softmax(self.logits(X))

    def to_dict(self) -> dict:
        out = _model_header("logreg", self.space, self.feature_names)
        out["parameters"] = {"weights": self.weights.tolist(), "bias": self.bias.tolist()}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "LinearModel":
        p = data["parameters"]
        names = tuple(data["feature_names"])
        weights = np.array(p["weights"], dtype=float).reshape(-1, len(names))
        return cls(weights, np.array(p["bias"], dtype=float), names,
                   LabelSpace.from_dict(data["label_space"]))


def logreg_objective(
    W: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy + (l2/2)·‖W‖² and its gradients w.r.t. W and b."""
    n = X.shape[0]
    logits = X @ W.T + b
    logp = log_softmax(logits)
    loss = -logp[np.arange(n), y].mean() + 0.5 * l2 * float(np.sum(W * W))
    G = np.exp(logp)
    G[np.arange(n), y] -= 1.0
    G /= n
    return float(loss), G.T @ X + l2 * W, G.sum(axis=0)


def train_logreg(
    X: FeatureMatrix, y: Sequence[int], cfg: TrainConfig, space: LabelSpace
) -> LinearModel:
    values = np.asarray(X.values, dtype=float)
    y = np.asarray(y, dtype=int)
    C, (N, D) = len(space), values.shape
    if len(y) != N:
        raise ShapeMismatch("labels and feature rows differ in length")
    if N and (y.min() < 0 or y.max() >= C):
        raise InputError("label index out of range")
    if len(np.unique(y)) < 2:
        raise SingleClassData("logistic regression needs at least two classes present")

    W = np.zeros((C, D))
    b = np.zeros(C)
    rng = np.random.default_rng(cfg.seed)
    # overflow surfaces as NonFiniteLoss, not as numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        W, b, epochs = _descend(W, b, values, y, cfg, rng)
    return LinearModel(W, b, tuple(X.names), space, epochs)


def _descend(W, b, values, y, cfg, rng):
    N = len(y)
    lr, l2 = cfg.learning_rate, cfg.l2_strength
    prev = None
    epochs = 0
    for epoch in range(cfg.max_epochs):
        epochs = epoch + 1
        if cfg.batch_size == 0 or cfg.batch_size >= N:
            loss, gW, gb = logreg_objective(W, b, values, y, l2)
            if not np.isfinite(loss) or not np.all(np.isfinite(gW)):
                raise NonFiniteLoss(f"loss diverged at epoch {epoch} (learning rate {lr})")
            if prev is not None and abs(prev - loss) < cfg.tolerance:
                break
            W -= lr * gW
            b -= lr * gb
        else:
            order = rng.permutation(N)
            for start in range(0, N, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                _, gW, gb = logreg_objective(W, b, values[idx], y[idx], l2)
                W -= lr * gW
                b -= lr * gb
            loss, _, _ = logreg_objective(W, b, values, y, l2)
            if not np.isfinite(loss) or not np.all(np.isfinite(W)):
                raise NonFiniteLoss(f"loss diverged at epoch {epoch} (learning rate {lr})")
            if prev is not None and abs(prev - loss) < cfg.tolerance:
                break
        prev = loss
    return W, b, epochs


@dataclass(frozen=True)
class NaiveBayesModel:
    vocab: tuple[str, ...]  # vocab[0] is <unk>
    log_priors: np.ndarray  # C
    log_likelihoods: np.ndarray  # C x V
    space: LabelSpace
    add_k: float

    def log_joint(self, docs: Sequence[Document]) -> np.ndarray:
        index = {t: i for i, t in enumerate(self.vocab)}
        counts = np.zeros((len(docs), len(self.vocab)))
        for r, doc in enumerate(docs):
            for tok in tokenize(doc.text):
                counts[r, index.get(tok, 0)] += 1
        return counts @ self.log_likelihoods.T + self.log_priors

    def predict_proba(self, x) -> np.ndarray:
        if isinstance(x, Document):
            return softmax(self.log_joint([x]))[0]
        docs = x.documents if isinstance(x, Dataset) else list(x)
        return softmax(self.log_joint(docs)).reshape(len(docs), len(self.space))

    def to_dict(self) -> dict:
        out = _model_header("naive_bayes", self.space, self.vocab)
        out["parameters"] = {
            "add_k": self.add_k,
            "log_priors": self.log_priors.tolist(),
            "log_likelihoods": self.log_likelihoods.tolist(),
        }
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "NaiveBayesModel":
        p = data["parameters"]
        vocab = tuple(data["feature_names"])
        return cls(
            vocab,
            np.array(p["log_priors"], float),
            np.array(p["log_likelihoods"], float).reshape(-1, len(vocab)),
            LabelSpace.from_dict(data["label_space"]),
            float(p["add_k"]),
        )


def train_naive_bayes(train: Dataset, add_k: float = 1.0) -> NaiveBayesModel:
    if train.labels is None:
        raise InputError("naive Bayes needs labelled data")
    if not add_k > 0:
        raise InputError("add_k must be > 0")
    C = len(train.space)
    token_lists = [tokenize(d.text) for d in train.documents]
    vocab = (UNK,) + tuple(sorted({t for toks in token_lists for t in toks} - {UNK}))
    index = {t: i for i, t in enumerate(vocab)}
    labels = np.asarray(train.labels)
    class_docs = np.bincount(labels, minlength=C)
    for c in range(C):
        if class_docs[c] == 0:
            raise EmptyClass(train.space.names[c])
    counts = np.zeros((C, len(vocab)))
    for toks, y in zip(token_lists, labels):
        for t in toks:
            counts[y, index[t]] += 1
    smoothed = counts + add_k
    log_lik = np.log(smoothed) - np.log(smoothed.sum(axis=1, keepdims=True))
    log_priors = np.log(class_docs) - np.log(len(labels))
    return NaiveBayesModel(vocab, log_priors, log_lik, train.space, float(add_k))


@dataclass(frozen=True)
class MeanLikelihoodDetector:
    class_means: np.ndarray  # one mean log-likelihood per class
    temperature: float
    lm: NGramModel
    space: LabelSpace

    def proba_from_score(self, score: float) -> np.ndarray:
        """Softmax over negative distances to each class mean, scaled by temperature.

        For two classes this is P(M) = sigmoid((d_H - d_M) / tau).
        """
        dist = np.abs(score - self.class_means)
        return softmax(-dist / self.temperature)

    def score(self, doc: Document) -> float:
        return mean_log_likelihood(self.lm, doc.text)

    def predict_proba(self, x) -> np.ndarray:
        if isinstance(x, Document):
            return self.proba_from_score(self.score(x))
        docs = x.documents if isinstance(x, Dataset) else list(x)
        out = np.array([self.proba_from_score(self.score(d)) for d in docs])
        return out.reshape(len(docs), len(self.space))

    def to_dict(self) -> dict:
        out = _model_header("mean_likelihood", self.space, ["mean_log_likelihood"])
        out["parameters"] = {
            "class_means": self.class_means.tolist(),
            "temperature": self.temperature,
            "lm": self.lm.to_dict(),
        }
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MeanLikelihoodDetector":
        p = data["parameters"]
        return cls(
            np.array(p["class_means"], float),
            float(p["temperature"]),
            NGramModel.from_dict(p["lm"]),
            LabelSpace.from_dict(data["label_space"]),
        )


def fit_mean_likelihood(train: Dataset, lm: NGramModel) -> MeanLikelihoodDetector:
    if train.labels is None:
        raise InputError("mean-likelihood detector needs labelled data")
    scores = np.array([mean_log_likelihood(lm, d.text) for d in train.documents])
    labels = np.asarray(train.labels)
    means = np.empty(len(train.space))
    for c, name in enumerate(train.space.names):
        members = scores[labels == c]
        if members.size == 0:
            raise EmptyClass(name)
        means[c] = members.mean()
    temperature = max(float(scores.std()), 1e-6)
    return MeanLikelihoodDetector(means, temperature, lm, train.space)


Model = LinearModel | NaiveBayesModel | MeanLikelihoodDetector

_KINDS = {
    "logreg": LinearModel,
    "naive_bayes": NaiveBayesModel,
    "mean_likelihood": MeanLikelihoodDetector,
}


def predict_proba(model: Model, x) -> np.ndarray:
    return model.predict_proba(x)


def model_from_dict(data: dict, expected_feature_names: Sequence[str] | None = None) -> Model:
    if data.get("version") != MODEL_VERSION:
        raise VersionMismatch(f"model version {data.get('version')!r}, expected {MODEL_VERSION}")
    try:
        cls = _KINDS[data["kind"]]
    except KeyError:
        raise InputError(f"unknown model kind {data.get('kind')!r}")
    if expected_feature_names is not None and tuple(data["feature_names"]) != tuple(
        expected_feature_names
    ):
        raise ShapeMismatch("model feature_names do not match the expected features")
    return cls.from_dict(data)


def save_model(model: Model, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(model.to_dict(), ensure_ascii=False, separators=(",", ":")), encoding="utf-8"
    )


def load_model(path: str | Path, expected_feature_names: Sequence[str] | None = None) -> Model:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")),
                           expected_feature_names)
