import math

import numpy as np
import pytest

from gentext.classifiers import (
    LinearModel,
    MeanLikelihoodDetector,
    TrainConfig,
    fit_mean_likelihood,
    load_model,
    logreg_objective,
    predict_proba,
    save_model,
    softmax,
    train_logreg,
    train_naive_bayes,
)
from gentext.corpus import Document, LabelSpace
from gentext.errors import EmptyClass, NonFiniteLoss, ShapeMismatch, SingleClassData
from gentext.features import FeatureMatrix, FeatureVector
from gentext.ngram_lm import mean_log_likelihood, tokenize, train_lm
from gentext.synthetic import detection_corpus

from conftest import make_dataset


def matrix(rows, names=None):
    rows = np.asarray(rows, dtype=float)
    names = names or tuple(f"f{j}" for j in range(rows.shape[1]))
    return FeatureMatrix(tuple(f"r{i}" for i in range(len(rows))), names, rows)


def test_symmetric_points_boundary_at_zero(binary):
    model = train_logreg(matrix([[-1.0], [1.0]]), [0, 1], TrainConfig(l2_strength=0.0), binary)
    p = model.predict_proba(np.array([[0.0]]))[0]
    assert p == pytest.approx([0.5, 0.5], abs=1e-9)
    assert model.predict_proba(np.array([[1.0]]))[0, 1] > 0.5


def test_separable_toy_accuracy(binary):
    X = matrix([[0, 0], [0, 1], [3, 3], [3, 4]])
    y = [0, 0, 1, 1]
    model = train_logreg(X, y, TrainConfig(), binary)
    assert (model.predict_proba(X).argmax(axis=1) == y).all()


def _numeric_grad(f, x, eps=1e-5):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + eps
        hi = f()
        x[idx] = old - eps
        lo = f()
        x[idx] = old
        g[idx] = (hi - lo) / (2 * eps)
    return g


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(20):
        n, d, c = rng.integers(3, 12), rng.integers(1, 6), rng.integers(2, 5)
        X = rng.normal(size=(n, d))
        y = rng.integers(0, c, size=n)
        W = rng.normal(size=(c, d))
        b = rng.normal(size=c)
        l2 = float(rng.uniform(0, 0.5))
        _, gW, gb = logreg_objective(W, b, X, y, l2)
        nW = _numeric_grad(lambda: logreg_objective(W, b, X, y, l2)[0], W)
        nb = _numeric_grad(lambda: logreg_objective(W, b, X, y, l2)[0], b)
        for analytic, numeric in ((gW, nW), (gb, nb)):
            rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12)
            worst = max(worst, rel)
    assert worst < 1e-5


def test_l2_shrinks_weights(binary):
    rng = np.random.default_rng(1)
    X = matrix(np.vstack([rng.normal(-1, 1, (30, 2)), rng.normal(1, 1, (30, 2))]))
    y = [0] * 30 + [1] * 30
    norms = [np.linalg.norm(train_logreg(X, y, TrainConfig(l2_strength=l2, max_epochs=5000,
                                                           tolerance=1e-12), binary).weights)
             for l2 in (0.01, 0.1, 1.0)]
    assert norms[0] >= norms[1] >= norms[2]


def test_single_class_rejected(binary):
    with pytest.raises(SingleClassData):
        train_logreg(matrix([[1.0], [2.0]]), [1, 1], TrainConfig(), binary)


def test_divergence_detected(binary):
    X = matrix([[1e150, -1e150], [-1e150, 1e150]])
    with pytest.raises(NonFiniteLoss):
        train_logreg(X, [0, 1], TrainConfig(learning_rate=1e200), binary)


def test_minibatch_deterministic(binary):
    rng = np.random.default_rng(2)
    X = matrix(rng.normal(size=(40, 3)))
    y = rng.integers(0, 2, 40)
    cfg = TrainConfig(batch_size=8, seed=9, max_epochs=50)
    a, b = train_logreg(X, y, cfg, binary), train_logreg(X, y, cfg, binary)
    assert np.array_equal(a.weights, b.weights)


def test_zero_weights_uniform(multiclass):
    model = LinearModel(np.zeros((14, 3)), np.zeros(14), ("a", "b", "c"), multiclass)
    p = predict_proba(model, FeatureVector(("a", "b", "c"), (1.0, -2.0, 3.0)))
    assert p == pytest.approx([1 / 14] * 14, abs=1e-12)
    with pytest.raises(ShapeMismatch):
        model.predict_proba(FeatureVector(("a", "c", "b"), (1.0, -2.0, 3.0)))


def test_softmax_shift_invariance():
    rng = np.random.default_rng(4)
    for _ in range(20):
        z = rng.normal(size=(3, 5)) * 5
        c = float(rng.normal() * 100)
        assert np.allclose(softmax(z), softmax(z + c), atol=1e-12, rtol=0)
        assert np.allclose(softmax(z).sum(axis=1), 1.0, atol=1e-9)


def test_naive_bayes_two_doc_golden(binary):
    nb = train_naive_bayes(make_dataset(["a a", "b b"], [0, 1]), add_k=1.0)
    # vocab {<unk>, a, b}: P(a|0) = 3/5, P(a|1) = 1/5, equal priors
    assert nb.predict_proba(Document("q", "a")) == pytest.approx([0.75, 0.25], abs=1e-12)
    assert nb.log_priors == pytest.approx([math.log(0.5)] * 2)
    assert np.exp(nb.log_likelihoods).sum(axis=1) == pytest.approx([1, 1], abs=1e-9)


def test_naive_bayes_matches_bayes_rule_enumeration(binary):
    texts = ["кот спит", "кот ест рыбу", "пёс лает"]
    labels = [0, 1, 1]
    nb = train_naive_bayes(make_dataset(texts, labels), add_k=0.5)
    vocab = {"<unk>"} | {t for x in texts for t in tokenize(x)}
    query = "кот лает громко"
    joint = []
    for c in (0, 1):
        docs = [tokenize(t) for t, y in zip(texts, labels) if y == c]
        total = sum(len(d) for d in docs)
        prior = len(docs) / len(texts)
        like = 1.0
        for tok in tokenize(query):
            tok = tok if tok in vocab else "<unk>"
            count = sum(d.count(tok) for d in docs)
            like *= (count + 0.5) / (total + 0.5 * len(vocab))
        joint.append(prior * like)
    expected = np.array(joint) / sum(joint)
    assert nb.predict_proba(Document("q", query)) == pytest.approx(expected, abs=1e-12)


def test_naive_bayes_empty_class(multiclass):
    with pytest.raises(EmptyClass):
        train_naive_bayes(make_dataset(["a", "b"], [0, 1], space=multiclass))


def _detector(means, temperature=1.0):
    lm = train_lm(["x y"])
    return MeanLikelihoodDetector(np.array(means, float), temperature, lm, LabelSpace.binary())


def test_detector_nearest_mean():
    det = _detector([-2.0, -4.0])
    assert det.proba_from_score(-3.9).argmax() == 1
    assert det.proba_from_score(-2.1).argmax() == 0
    assert det.proba_from_score(-3.0) == pytest.approx([0.5, 0.5], abs=0)
    # P(M) = sigmoid((d_H - d_M) / tau)
    d_h, d_m = 1.9, 0.1
    assert det.proba_from_score(-3.9)[1] == pytest.approx(1 / (1 + math.exp(-(d_h - d_m))))


def test_detector_identical_docs_uniform(binary):
    train = make_dataset(["один и тот же текст"] * 4, [0, 1, 0, 1])
    det = fit_mean_likelihood(train, train_lm([d.text for d in train.documents]))
    assert det.class_means[0] == det.class_means[1]
    assert det.predict_proba(Document("q", "что-то иное")) == pytest.approx([0.5, 0.5], abs=0)


def test_detector_matches_brute_force_rule():
    train, test = detection_corpus(n_train=200, n_test=80, seed=3)
    lm = train_lm([d.text for d, y in zip(train.documents, train.labels) if y == 1])
    det = fit_mean_likelihood(train, lm)
    scores = [mean_log_likelihood(lm, d.text) for d in train.documents]
    mu = [np.mean([s for s, y in zip(scores, train.labels) if y == c]) for c in (0, 1)]
    for doc in test.documents:
        s = mean_log_likelihood(lm, doc.text)
        brute = 0 if abs(s - mu[0]) <= abs(s - mu[1]) else 1
        assert int(det.predict_proba(doc).argmax()) == brute


def test_detector_accuracy_on_distinct_sources():
    rng = np.random.default_rng(21)
    words = [f"w{i}" for i in range(60)]

    def chain(start_step, n):
        out = []
        for _ in range(n):
            s = int(rng.integers(0, 60))
            out.append(" ".join(words[(s + start_step * j) % 60] for j in range(10)))
        return out

    texts = chain(1, 500) + [" ".join(rng.choice(words, 10)) for _ in range(500)]
    labels = [1] * 500 + [0] * 500
    order = rng.permutation(1000)
    texts = [texts[i] for i in order]
    labels = [labels[i] for i in order]
    train = make_dataset(texts[:800], labels[:800], prefix="tr")
    test = make_dataset(texts[800:], labels[800:], prefix="te")
    lm = train_lm([t for t, y in zip(texts[:800], labels[:800]) if y == 1])
    det = fit_mean_likelihood(train, lm)
    acc = np.mean(det.predict_proba(test).argmax(axis=1) == np.array(test.labels))
    assert acc >= 0.9


def test_detector_empty_class():
    train = make_dataset(["a b", "b a"], [1, 1])
    with pytest.raises(EmptyClass):
        fit_mean_likelihood(train, train_lm(["a b"]))


def test_model_files(tmp_path, binary):
    X = matrix([[0, 1], [1, 0], [2, 2], [3, 1]], names=("u", "v"))
    model = train_logreg(X, [0, 0, 1, 1], TrainConfig(max_epochs=20), binary)
    save_model(model, tmp_path / "m.json")
    again = load_model(tmp_path / "m.json", expected_feature_names=("u", "v"))
    assert np.array_equal(again.weights, model.weights)
    with pytest.raises(ShapeMismatch):
        load_model(tmp_path / "m.json", expected_feature_names=("v", "u"))
    nb = train_naive_bayes(make_dataset(["a", "b"], [0, 1]))
    save_model(nb, tmp_path / "nb.json")
    assert np.array_equal(load_model(tmp_path / "nb.json").log_likelihoods, nb.log_likelihoods)
