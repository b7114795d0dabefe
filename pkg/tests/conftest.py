from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
import pytest

from gentext.classifiers import LinearModel, TrainConfig, train_logreg
from gentext.corpus import Dataset, Document, LabelSpace
from gentext.features import FeatureMatrix
from gentext.stacking import BaseLearnerSpec, FittedLearner, register_learner


@pytest.fixture
def binary():
    return LabelSpace.binary()


@pytest.fixture
def multiclass():
    return LabelSpace.multiclass()


def make_dataset(texts, labels=None, space=None, prefix="d"):
    space = space or LabelSpace.binary()
    docs = tuple(Document(f"{prefix}{i}", t) for i, t in enumerate(texts))
    return Dataset(docs, space, None if labels is None else tuple(labels))


# ---- test-only learners -----------------------------------------------------
# The stacking machinery is exercised with learners whose behaviour is known
# exactly. Gold labels are embedded in the text as "gold=<index>" where needed.

_GOLD = re.compile(r"gold=(\d+)")
_COLUMN = re.compile(r"(\w+)=(-?[0-9.eE+-]+)")


@dataclass
class OracleLearner(FittedLearner):
    spec: BaseLearnerSpec
    space: LabelSpace

    def predict_proba(self, docs):
        out = np.zeros((len(docs), len(self.space)))
        for i, d in enumerate(docs):
            out[i, int(_GOLD.search(d.text).group(1))] = 1.0
        return out

    def parameters(self):
        return {}


@dataclass
class UniformLearner(FittedLearner):
    spec: BaseLearnerSpec
    space: LabelSpace

    def predict_proba(self, docs):
        return np.full((len(docs), len(self.space)), 1.0 / len(self.space))

    def parameters(self):
        return {}


def column_value(doc: Document, column: str) -> float:
    return float(dict(_COLUMN.findall(doc.text))[column])


@dataclass
class ColumnLearner(FittedLearner):
    """Logistic regression on one numeric field parsed from the text."""

    spec: BaseLearnerSpec
    column: str
    model: LinearModel

    @property
    def space(self):
        return self.model.space

    def predict_proba(self, docs):
        x = np.array([[column_value(d, self.column)] for d in docs]).reshape(len(docs), 1)
        return self.model.predict_proba(x)

    def parameters(self):
        return {"model": self.model.to_dict()}


def _fit_column(column):
    def fit(spec, train):
        X = FeatureMatrix(train.ids, (column,),
                          np.array([[column_value(d, column)] for d in train.documents]))
        return ColumnLearner(spec, column, train_logreg(X, train.labels, TrainConfig(), train.space))
    return fit


register_learner("oracle", lambda spec, train: OracleLearner(spec, train.space))
register_learner("uniform", lambda spec, train: UniformLearner(spec, train.space))
register_learner("column_a", _fit_column("a"))
register_learner("column_b", _fit_column("b"))


def complementary_datasets(seed: int = 7, n_train: int = 400, n_test: int = 200):
    """Labels recoverable from field a on group A rows and from field b on group B rows.

    Outside its own group each field is pure noise, so each single learner is
    right on about half of the other group.
    """
    rng = np.random.default_rng(seed)

    def build(n, prefix):
        y = rng.permutation(np.array([0, 1] * (n // 2)))
        group = rng.permutation(np.array([0, 1] * (n // 2)))
        texts = []
        for yi, gi in zip(y, group):
            signal = (2 * yi - 1) * 2.0
            a = signal + rng.normal(0, 0.5) if gi == 0 else rng.normal(0, 0.5)
            b = signal + rng.normal(0, 0.5) if gi == 1 else rng.normal(0, 0.5)
            texts.append(f"a={a:.6f} b={b:.6f} gold={yi}")
        return make_dataset(texts, y, prefix=prefix)

    return build(n_train, "tr"), build(n_test, "te")


# ---- acceptance summary -----------------------------------------------------

ACCEPTANCE: list[tuple[str, bool, str]] = []


def record(criterion: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE.append((criterion, bool(ok), detail))
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}")
