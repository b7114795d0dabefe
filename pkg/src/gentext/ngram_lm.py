"""Interpolated add-k n-gram language model with per-token ranks.

Every order j in 1..n contributes an add-k estimate conditioned on the last
j-1 tokens; the estimates are mixed with fixed interpolation weights. The
``<bos>`` token only ever appears as context, so it carries zero probability
as a prediction and each conditional distribution is spread over the rest
of the vocabulary.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Dataset
from .errors import EmptyCorpus, EmptyText, InputError, VersionMismatch

FORMAT_VERSION = 1

UNK, BOS, EOS = "<unk>", "<bos>", "<eos>"
RESERVED = (UNK, BOS, EOS)
UNK_ID, BOS_ID, EOS_ID = 0, 1, 2

DEFAULT_BIN_EDGES = (10, 100, 1000)

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")
_WORD_RE = re.compile(r"\w")


def tokenize(text: str) -> list[str]:
    """Split on whitespace, isolate each punctuation character, lowercase."""
    return [tok.lower() for tok in _TOKEN_RE.findall(text)]


def is_punctuation(token: str) -> bool:
    return len(token) == 1 and _WORD_RE.match(token) is None


@dataclass(frozen=True)
class TokenScore:
    token: str
    log_prob: float
    rank: int


@dataclass
class NGramModel:
    order: int
    add_k: float
    interpolation_weights: tuple[float, ...]
    vocab: tuple[str, ...]
    counts: dict[tuple[int, ...], dict[int, int]]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)
    _rows: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.order < 1:
            raise InputError("order must be >= 1")
        if not self.add_k > 0:
            raise InputError("add_k must be > 0")
        weights = tuple(float(w) for w in self.interpolation_weights)
        if len(weights) != self.order or any(w < 0 for w in weights):
            raise InputError("need one non-negative interpolation weight per order")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise InputError("interpolation weights must sum to 1")
        self.interpolation_weights = weights
        if tuple(self.vocab[:3]) != RESERVED:
            raise InputError("vocabulary must start with the reserved tokens")
        self.vocab = tuple(self.vocab)
        self._index = {tok: i for i, tok in enumerate(self.vocab)}
        self._rows = {}
        for ctx, row in self.counts.items():
            ids = np.fromiter(row.keys(), dtype=np.int64, count=len(row))
            cnt = np.fromiter(row.values(), dtype=np.float64, count=len(row))
            self._rows[ctx] = (ids, cnt, float(cnt.sum()))

    @property
    def support_size(self) -> int:
        return len(self.vocab) - 1

    def token_id(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self._index.get(t, UNK_ID) for t in tokens]

    def distribution(self, history: Sequence[int]) -> np.ndarray:
        """P(. | history) over the full vocabulary; only the last n-1 ids matter."""
        history = tuple(history)
        if len(history) < self.order - 1:
            history = (BOS_ID,) * (self.order - 1 - len(history)) + history
        V = len(self.vocab)
        denom_extra = self.add_k * self.support_size
        probs = np.zeros(V)
        for j, weight in enumerate(self.interpolation_weights, start=1):
            if weight == 0.0:
                continue
            ctx = history[len(history) - (j - 1):] if j > 1 else ()
            comp = np.full(V, self.add_k)
            row = self._rows.get(ctx)
            total = 0.0
            if row is not None:
                ids, cnt, total = row
                comp[ids] += cnt
            probs += weight * comp / (total + denom_extra)
        probs[BOS_ID] = 0.0
        return probs

    def prob(self, token: str, history: Sequence[str] = ()) -> float:
        return float(self.distribution(self.encode(history))[self.token_id(token)])

    def _position_distributions(self, targets: Sequence[int]) -> np.ndarray:
        """Row t is ``distribution(targets[:t])``, built for all positions at once."""
        T, V = len(targets), len(self.vocab)
        padded = [BOS_ID] * (self.order - 1) + list(targets)
        denom_extra = self.add_k * self.support_size
        probs = np.zeros((T, V))
        for j, weight in enumerate(self.interpolation_weights, start=1):
            if weight == 0.0:
                continue
            counts = np.zeros((T, V))
            totals = np.zeros(T)
            for t in range(T):
                end = t + self.order - 1
                row = self._rows.get(tuple(padded[end - (j - 1):end]) if j > 1 else ())
                if row is not None:
                    counts[t, row[0]] = row[1]
                    totals[t] = row[2]
            # same operation order as distribution(), so values agree bit for bit
            probs += weight * (self.add_k + counts) / (totals + denom_extra)[:, None]
        probs[:, BOS_ID] = 0.0
        return probs

    def score_ids(self, ids: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """Log-probabilities and 1-based ranks for ``ids`` followed by <eos>."""
        targets = np.asarray(list(ids) + [EOS_ID], dtype=np.int64)
        probs = self._position_distributions(targets)
        positions = np.arange(len(targets))
        p = probs[positions, targets]
        # ties go to the earlier vocabulary entry
        earlier = np.arange(probs.shape[1])[None, :] < targets[:, None]
        ranks = 1 + np.count_nonzero(probs > p[:, None], axis=1) + np.count_nonzero(
            (probs == p[:, None]) & earlier, axis=1
        )
        return np.log(p), ranks.astype(np.int64)

    def to_dict(self) -> dict:
        rows = sorted(self.counts.items(), key=lambda kv: (len(kv[0]), kv[0]))
        return {
            "version": FORMAT_VERSION,
            "order": self.order,
            "add_k": self.add_k,
            "interpolation_weights": list(self.interpolation_weights),
            "vocab": list(self.vocab),
            "counts": [[list(ctx), sorted([t, c] for t, c in row.items())] for ctx, row in rows],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NGramModel":
        if data.get("version") != FORMAT_VERSION:
            raise VersionMismatch(
                f"language model version {data.get('version')!r}, expected {FORMAT_VERSION}"
            )
        counts = {
            tuple(ctx): {int(t): int(c) for t, c in row} for ctx, row in data["counts"]
        }
        return cls(
            order=int(data["order"]),
            add_k=float(data["add_k"]),
            interpolation_weights=tuple(data["interpolation_weights"]),
            vocab=tuple(data["vocab"]),
            counts=counts,
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "NGramModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _as_token_lists(corpus) -> list[list[str]]:
    if isinstance(corpus, Dataset):
        return [tokenize(doc.text) for doc in corpus.documents]
    out = []
    for item in corpus:
        out.append(tokenize(item) if isinstance(item, str) else list(item))
    return out


def train_lm(
    corpus,
    order: int = 3,
    add_k: float = 0.1,
    min_count: int = 1,
    interpolation_weights: Sequence[float] | None = None,
) -> NGramModel:
    """Count n-grams of every order 1..n over ``corpus``.

    ``corpus`` is a Dataset, a sequence of raw strings, or a sequence of token
    lists. Tokens seen fewer than ``min_count`` times become ``<unk>``.
    """
    sentences = _as_token_lists(corpus)
    if not sentences:
        raise EmptyCorpus("cannot train a language model on an empty corpus")
    if order < 1:
        raise InputError("order must be >= 1")
    if interpolation_weights is None:
        interpolation_weights = [1.0 / order] * order

    freq = Counter(tok for sent in sentences for tok in sent)
    kept = sorted(tok for tok, c in freq.items() if c >= min_count and tok not in RESERVED)
    vocab = RESERVED + tuple(kept)
    index = {tok: i for i, tok in enumerate(vocab)}

    counts: dict[tuple[int, ...], dict[int, int]] = {}
    for sent in sentences:
        history = [BOS_ID] * (order - 1)
        for target in [index.get(t, UNK_ID) for t in sent] + [EOS_ID]:
            for j in range(1, order + 1):
                ctx = tuple(history[len(history) - (j - 1):]) if j > 1 else ()
                row = counts.setdefault(ctx, {})
                row[target] = row.get(target, 0) + 1
            if order > 1:
                history = (history + [target])[-(order - 1):]
    return NGramModel(order, float(add_k), tuple(interpolation_weights), vocab, counts)


def score_tokens(m: NGramModel, text: str) -> list[TokenScore]:
    ids = m.encode(tokenize(text))
    log_probs, ranks = m.score_ids(ids)
    names = [m.vocab[i] for i in ids] + [EOS]
    return [TokenScore(t, float(lp), int(r)) for t, lp, r in zip(names, log_probs, ranks)]


def mean_log_likelihood(m: NGramModel, text: str) -> float:
    """Mean natural-log probability per token, counting the closing <eos>."""
    tokens = tokenize(text)
    if not tokens:
        raise EmptyText()
    log_probs, _ = m.score_ids(m.encode(tokens))
    return float(log_probs.mean())


def histogram_from_ranks(ranks: Sequence[int], bin_edges: Sequence[int]) -> list[float]:
    """Fraction of ranks in (-inf, e0], (e0, e1], ..., (e_last, inf)."""
    edges = np.asarray(bin_edges)
    if len(edges) == 0 or np.any(np.diff(edges) <= 0):
        raise InputError("bin edges must be non-empty and strictly increasing")
    ranks = np.asarray(ranks)
    if ranks.size == 0:
        raise EmptyText()
    bins = np.searchsorted(edges, ranks, side="left")
    hist = np.bincount(bins, minlength=len(edges) + 1)
    return list(hist / ranks.size)


def rank_histogram(
    m: NGramModel, text: str, bin_edges: Sequence[int] = DEFAULT_BIN_EDGES
) -> list[float]:
    tokens = tokenize(text)
    if not tokens:
        raise EmptyText()
    _, ranks = m.score_ids(m.encode(tokens))
    return histogram_from_ranks(ranks, bin_edges)


def text_statistics(m: NGramModel, text: str, bin_edges: Sequence[int]) -> tuple[float, list[float]]:
    """Mean log-likelihood and rank histogram from a single scoring pass."""
    tokens = tokenize(text)
    if not tokens:
        raise EmptyText()
    log_probs, ranks = m.score_ids(m.encode(tokens))
    return float(log_probs.mean()), histogram_from_ranks(ranks, bin_edges)
