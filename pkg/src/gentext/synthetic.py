"""Seeded synthetic corpora for desk-scale detection experiments.

The "human" source is a Zipf-weighted bigram Markov chain over invented
Cyrillic words. The "machine" source is a 3-gram LM trained on a sample of
that chain and decoded at a temperature below 1, which mimics a generator
that over-selects high-probability continuations.

Run ``python -m gentext.synthetic OUT_DIR`` to write train/test TSV files.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Dataset, Document, LabelSpace, write_dataset
from .ngram_lm import BOS_ID, EOS_ID, UNK_ID, NGramModel, is_punctuation, train_lm

_SYLLABLES = (
    "ка ро ми на ле то ва ри су по де ль ст ны гра вет мо ско бо жи "
    "ра ну пе хо за ки ло сы тя ме чу да"
).split()


def invent_words(n: int, rng: np.random.Generator) -> list[str]:
    words: set[str] = set()
    while len(words) < n:
        k = int(rng.integers(1, 4))
        words.add("".join(rng.choice(_SYLLABLES, size=k)))
    return sorted(words)


def detokenize(tokens: list[str]) -> str:
    out = ""
    for tok in tokens:
        if out and not is_punctuation(tok):
            out += " "
        out += tok
    return out[:1].upper() + out[1:]


@dataclass
class BigramSource:
    """Markov chain with sparse, Zipf-tilted successor distributions."""

    words: list[str]
    start: np.ndarray
    transitions: np.ndarray  # V x V row-stochastic
    comma_rate: float = 0.08
    min_len: int = 6
    max_len: int = 22

    @classmethod
    def build(cls, seed: int, n_words: int = 300, fanout: int = 25) -> "BigramSource":
        rng = np.random.default_rng(seed)
        words = invent_words(n_words, rng)
        zipf = 1.0 / np.arange(1, n_words + 1)
        zipf = zipf[rng.permutation(n_words)]
        zipf /= zipf.sum()
        trans = np.zeros((n_words, n_words))
        for i in range(n_words):
            succ = rng.choice(n_words, size=fanout, replace=False)
            trans[i, succ] = rng.dirichlet(np.full(fanout, 0.5))
            trans[i] = 0.7 * trans[i] + 0.3 * zipf
        return cls(words, zipf, trans)

    def sample_tokens(self, rng: np.random.Generator) -> list[str]:
        length = int(rng.integers(self.min_len, self.max_len + 1))
        w = int(rng.choice(len(self.words), p=self.start))
        tokens = [self.words[w]]
        for _ in range(length - 1):
            if rng.random() < self.comma_rate:
                tokens.append(",")
            w = int(rng.choice(len(self.words), p=self.transitions[w]))
            tokens.append(self.words[w])
        tokens.append(".")
        return tokens


def sample_from_lm(
    lm: NGramModel, rng: np.random.Generator, temperature: float = 1.0, max_len: int = 40
) -> list[str]:
    history = [BOS_ID] * (lm.order - 1)
    tokens: list[str] = []
    for _ in range(max_len):
        probs = lm.distribution(history)
        probs[UNK_ID] = 0.0
        if len(tokens) < 2:
            probs[EOS_ID] = 0.0
        probs = probs ** (1.0 / temperature)
        probs /= probs.sum()
        nxt = int(rng.choice(len(probs), p=probs))
        if nxt == EOS_ID:
            break
        tokens.append(lm.vocab[nxt])
        if lm.order > 1:
            history = (history + [nxt])[-(lm.order - 1):]
    return tokens


def machine_lm(source: BigramSource, seed: int, n_docs: int = 150, order: int = 3) -> NGramModel:
    rng = np.random.default_rng(seed)
    corpus = [source.sample_tokens(rng) for _ in range(n_docs)]
    return train_lm(corpus, order=order, add_k=0.01)


def detection_corpus(
    n_train: int = 1000,
    n_test: int = 400,
    seed: int = 0,
    temperature: float = 0.5,
) -> tuple[Dataset, Dataset]:
    """Balanced binary train/test datasets of human-proxy vs LM-sampled text."""
    source = BigramSource.build(seed)
    lm = machine_lm(source, seed + 1)
    human_rng = np.random.default_rng(seed + 2)
    machine_rng = np.random.default_rng(seed + 3)
    order_rng = np.random.default_rng(seed + 4)
    space = LabelSpace.binary()

    def build(n: int, prefix: str) -> Dataset:
        labels = np.array([0] * (n // 2) + [1] * (n - n // 2))
        labels = labels[order_rng.permutation(n)]
        docs = []
        for i, y in enumerate(labels):
            if y == 0:
                tokens = source.sample_tokens(human_rng)
            else:
                tokens = sample_from_lm(lm, machine_rng, temperature)
            docs.append(Document(f"{prefix}{i}", detokenize(tokens)))
        return Dataset(tuple(docs), space, tuple(int(y) for y in labels))

    return build(n_train, "tr"), build(n_test, "te")


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--train", type=int, default=1000)
    parser.add_argument("--test", type=int, default=400)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    train, test = detection_corpus(args.train, args.test, args.seed)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_dataset(train, args.out_dir / "train.tsv")
    write_dataset(test, args.out_dir / "test.tsv")
    unlabeled = Dataset(test.documents, test.space)
    write_dataset(unlabeled, args.out_dir / "test_unlabeled.tsv")


if __name__ == "__main__":
    main()
