import math

import numpy as np
import pytest

from gentext.errors import EmptyCorpus, EmptyText, InputError, VersionMismatch
from gentext.ngram_lm import (
    NGramModel,
    histogram_from_ranks,
    mean_log_likelihood,
    rank_histogram,
    score_tokens,
    tokenize,
    train_lm,
)

from lm_oracle import brute_prob, brute_ranks, unk_map


def test_tokenize():
    assert tokenize("Вы не можете") == ["вы", "не", "можете"]
    assert tokenize("Одесса, 1905.") == ["одесса", ",", "1905", "."]
    assert tokenize("") == []
    assert tokenize("a...b") == ["a", ".", ".", ".", "b"]


@pytest.fixture
def abab():
    return train_lm(["a b a b"], order=2, add_k=1.0, min_count=1, interpolation_weights=[0, 1])


def test_abab_counts(abab):
    assert set(abab.vocab) == {"a", "b", "<unk>", "<bos>", "<eos>"}
    a, b = abab.token_id("a"), abab.token_id("b")
    assert abab.counts[(a,)][b] == 2
    assert abab.counts[(b,)][a] == 1


def test_abab_golden_probability(abab):
    # context "a" is followed by b twice; add-1 over the 4 predictable tokens
    assert abab.prob("b", ["a"]) == pytest.approx((2 + 1) / (2 + 4), abs=1e-15)
    assert abab.prob("b", ["a"]) == pytest.approx(0.5, abs=1e-15)
    assert abab.prob("<bos>", ["a"]) == 0.0


def test_abab_rank_of_b_after_a(abab):
    scores = score_tokens(abab, "a b a b")
    assert [s.token for s in scores] == ["a", "b", "a", "b", "<eos>"]
    assert scores[1].rank == 1 and scores[3].rank == 1
    mapped = [["a", "b", "a", "b"]]
    vocab = ["<unk>", "<bos>", "<eos>", "a", "b"]
    assert [s.rank for s in scores] == brute_ranks(mapped, vocab, 2, 1.0, [0, 1], "a b a b")


def test_unigram_ignores_context():
    m = train_lm(["x y y z", "y z"], order=1, add_k=0.5)
    assert m.prob("y", ["x"]) == m.prob("y", ["z", "z"]) == m.prob("y")


def test_oov_maps_to_unk(abab):
    scores = score_tokens(abab, "qq rr")
    assert [s.token for s in scores] == ["<unk>", "<unk>", "<eos>"]
    assert all(1 <= s.rank <= len(abab.vocab) and s.log_prob <= 0 for s in scores)


def test_uniform_distribution_ranks_by_vocab_order():
    m = train_lm(["x"], order=2, add_k=1.0, interpolation_weights=[0, 1])
    # context <unk> was never seen, so the bigram estimate is exactly uniform
    scores = score_tokens(m, "qq zz")
    assert [s.rank for s in scores[1:]] == [1, 2]  # <unk> (index 0) then <eos> (index 2)


def test_min_count_builds_unk():
    m = train_lm(["a a b"], order=1, add_k=1.0, min_count=2)
    assert m.vocab == ("<unk>", "<bos>", "<eos>", "a")
    assert m.counts[()][0] == 1  # the single "b"


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        train_lm([])


def test_bad_weights():
    with pytest.raises(InputError):
        train_lm(["a"], order=2, interpolation_weights=[0.5, 0.6])


def test_mean_log_likelihood_single_token():
    m = train_lm(["a b", "a"], order=1, add_k=1.0)
    expected = (math.log(m.prob("a")) + math.log(m.prob("<eos>"))) / 2
    assert mean_log_likelihood(m, "a") == pytest.approx(expected, abs=1e-12)
    assert mean_log_likelihood(m, "zzz") <= 0
    with pytest.raises(EmptyText):
        mean_log_likelihood(m, "   ")


def test_training_text_beats_random_tokens():
    rng = np.random.default_rng(11)
    words = [f"w{i}" for i in range(40)]
    corpus = []
    for _ in range(200):
        start = int(rng.integers(0, 40))
        corpus.append(" ".join(words[(start + 3 * j) % 40] for j in range(8)))
    m = train_lm(corpus, order=3, add_k=0.1)
    wins = 0
    for _ in range(100):
        text = corpus[int(rng.integers(0, len(corpus)))]
        noise = " ".join(rng.choice(words, size=8))
        wins += mean_log_likelihood(m, text) > mean_log_likelihood(m, noise)
    assert wins >= 95


def test_histogram_examples():
    assert histogram_from_ranks([1, 1, 1], [10, 100, 1000]) == [1.0, 0.0, 0.0, 0.0]
    assert histogram_from_ranks([5, 50, 500, 5000], [10, 100, 1000]) == [0.25] * 4
    assert histogram_from_ranks([10, 11, 100, 1001], [10, 100, 1000]) == [0.25, 0.5, 0.0, 0.25]
    with pytest.raises(InputError):
        histogram_from_ranks([1], [10, 10])


def test_rank_histogram_sums_to_one(abab):
    hist = rank_histogram(abab, "a b b a x", [1, 2, 3])
    assert len(hist) == 4
    assert sum(hist) == pytest.approx(1.0, abs=1e-9)


def test_probabilities_match_brute_force():
    texts = ["the cat sat", "the cat ran off", "a dog sat , then ran", "the dog"]
    sentences = [tokenize(t) for t in texts]
    m = train_lm(sentences, order=3, add_k=0.3, min_count=1)
    vocab, mapped = unk_map(sentences)
    assert list(m.vocab) == vocab
    w = m.interpolation_weights
    for history in ([], ["the"], ["the", "cat"], ["dog", "sat"], ["zebra", "the"]):
        for target in vocab:
            mine = m.prob(target, history)
            ref = brute_prob(mapped, vocab, 3, 0.3, w, [h if h in vocab else "<unk>" for h in history], target)
            assert mine == pytest.approx(ref, abs=1e-12)


def test_add_k_moves_toward_uniform():
    texts = ["a b c a b", "b c d", "a a a b"]
    models = [train_lm(texts, order=2, add_k=k) for k in (0.01, 0.1, 1.0, 10.0)]
    rng = np.random.default_rng(3)
    for _ in range(20):
        history = models[0].encode(rng.choice(["a", "b", "c", "d"], size=1))
        peaks = [m.distribution(history).max() for m in models]
        assert all(x >= y for x, y in zip(peaks, peaks[1:]))


def test_serialization_round_trip_and_determinism(tmp_path):
    texts = ["Прочла автобиографию Каутского, Одесса, 1905.", "Вы не можете быть в печи."]
    m1, m2 = train_lm(texts), train_lm(texts)
    assert m1.dumps() == m2.dumps()
    path = tmp_path / "lm.json"
    m1.save(path)
    loaded = NGramModel.load(path)
    assert loaded.dumps() == m1.dumps()
    assert score_tokens(loaded, texts[0]) == score_tokens(m1, texts[0])


def test_version_mismatch():
    data = train_lm(["a b"]).to_dict()
    data["version"] = 99
    with pytest.raises(VersionMismatch):
        NGramModel.from_dict(data)
