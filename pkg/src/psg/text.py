"""Statement text to sparse TF-IDF vectors.

Tokens are maximal runs of Unicode letters and digits, lowercased.
Features are either hashed buckets (FNV-1a 64-bit hash of the UTF-8 token
bytes, masked modulo a power-of-two dimension) or an explicit vocabulary
built at fit time.  Weights use the smoothed idf

    idf(t) = ln((1 + N) / (1 + df(t))) + 1

with raw term counts for tf and L2 normalization of the final vector.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import DataError

_TOKEN_RE = re.compile(r"[^\W_]+")

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    max_tokens: int = 4096


def tokenize(text: str, config: TokenizerConfig = TokenizerConfig()) -> list[str]:
    """Split text into alphanumeric runs, truncated at max_tokens."""
    if config.lowercase:
        text = text.lower()
    return _TOKEN_RE.findall(text)[: config.max_tokens]


def fnv1a64(token: str, seed: int = 0) -> int:
    """FNV-1a 64-bit hash over the UTF-8 bytes; seed XORs the offset basis."""
    h = FNV_OFFSET ^ (seed & _MASK64)
    for b in token.encode("utf-8"):
        h = ((h ^ b) * FNV_PRIME) & _MASK64
    return h


@dataclass
class Vectorizer:
    """Fitted TF-IDF vectorizer; immutable once fitted, safe to share.

    In hashed mode df is a dense per-bucket array of length ``dimension``
    (a power of two, so the hash is reduced with a mask).  In vocabulary
    mode feature indices follow the alphabetically sorted token list.
    """

    mode: str
    dimension: int
    n_docs: int
    df: np.ndarray
    vocabulary: dict[str, int] | None = None
    hash_seed: int = 0
    idf: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.idf is None:
            self.idf = np.log((1.0 + self.n_docs) / (1.0 + self.df)) + 1.0

    def feature_index(self, token: str) -> int | None:
        if self.mode == "hashed":
            return fnv1a64(token, self.hash_seed) & (self.dimension - 1)
        return self.vocabulary.get(token)

    def save(self, path: str | Path) -> None:
        obj = {
            "format_version": 1,
            "mode": self.mode,
            "dimension": self.dimension,
            "n_docs": self.n_docs,
            "hash": {"name": "fnv1a64", "seed": self.hash_seed},
        }
        if self.mode == "hashed":
            obj["df"] = [int(c) for c in self.df]
        else:
            tokens = sorted(self.vocabulary, key=self.vocabulary.get)
            obj["df"] = {t: int(self.df[self.vocabulary[t]]) for t in tokens}
        Path(path).write_text(json.dumps(obj), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vectorizer":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if obj["mode"] == "hashed":
            df = np.asarray(obj["df"], dtype=np.float64)
            vocab = None
        else:
            vocab = {t: i for i, t in enumerate(obj["df"])}
            df = np.asarray(list(obj["df"].values()), dtype=np.float64)
        return cls(
            mode=obj["mode"],
            dimension=obj["dimension"],
            n_docs=obj["n_docs"],
            df=df,
            vocabulary=vocab,
            hash_seed=obj["hash"]["seed"],
        )


def fit(
    corpus: list[list[str]],
    mode: str = "hashed",
    dimension: int = 32768,
    hash_seed: int = 0,
    ngrams: int = 1,
) -> Vectorizer:
    """Compute document frequencies (per token, or per hashed bucket) and
    the derived idf weights over a tokenized corpus.

    ngrams is a config hook; only unigrams are implemented.
    """
    if ngrams != 1:
        raise NotImplementedError("only unigram features are implemented")
    if not corpus:
        raise DataError("cannot fit a vectorizer on an empty corpus")
    if mode == "hashed":
        if dimension <= 0 or dimension & (dimension - 1) != 0:
            raise DataError(f"hashed dimension {dimension} must be a power of two")
        df = np.zeros(dimension, dtype=np.float64)
        for tokens in corpus:
            buckets = {fnv1a64(t, hash_seed) & (dimension - 1) for t in set(tokens)}
            for b in buckets:
                df[b] += 1.0
        return Vectorizer(
            mode="hashed", dimension=dimension, n_docs=len(corpus),
            df=df, hash_seed=hash_seed,
        )
    if mode == "vocabulary":
        seen: set[str] = set()
        for tokens in corpus:
            seen.update(tokens)
        vocab = {t: i for i, t in enumerate(sorted(seen))}
        df = np.zeros(len(vocab), dtype=np.float64)
        for tokens in corpus:
            for t in set(tokens):
                df[vocab[t]] += 1.0
        return Vectorizer(
            mode="vocabulary", dimension=len(vocab), n_docs=len(corpus),
            df=df, vocabulary=vocab,
        )
    raise DataError(f"unknown vectorizer mode {mode!r}")


@dataclass(frozen=True)
class DocumentVector:
    """Sparse L2-normalized feature vector; indices strictly increasing."""

    indices: np.ndarray
    values: np.ndarray
    dimension: int

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dimension, dtype=np.float64)
        out[self.indices] = self.values
        return out

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.values ** 2)))


def vectorize(vectorizer: Vectorizer, tokens: list[str]) -> DocumentVector:
    """tf * idf per feature, then L2 normalization (empty docs stay zero).

    In vocabulary mode tokens unseen at fit time are dropped.  Features
    are accumulated in sorted index order so the float math is identical
    across runs.
    """
    counts: dict[int, int] = {}
    for t in tokens:
        j = vectorizer.feature_index(t)
        if j is not None:
            counts[j] = counts.get(j, 0) + 1
    if not counts:
        return DocumentVector(
            indices=np.empty(0, dtype=np.int64),
            values=np.empty(0, dtype=np.float64),
            dimension=vectorizer.dimension,
        )
    indices = np.asarray(sorted(counts), dtype=np.int64)
    tf = np.asarray([counts[j] for j in indices], dtype=np.float64)
    values = tf * vectorizer.idf[indices]
    values = values / np.sqrt(np.sum(values ** 2))
    return DocumentVector(indices=indices, values=values, dimension=vectorizer.dimension)


def stack_vectors(vectors: list[DocumentVector]) -> sparse.csr_matrix:
    """Stack document vectors into an (N, V) CSR matrix for batched math."""
    if not vectors:
        raise DataError("cannot stack an empty vector list")
    dim = vectors[0].dimension
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        if v.dimension != dim:
            raise DataError("document vectors have mismatched dimensions")
        indptr[i + 1] = indptr[i] + len(v.indices)
    indices = np.concatenate([v.indices for v in vectors]) if indptr[-1] else np.empty(0, np.int64)
    data = np.concatenate([v.values for v in vectors]) if indptr[-1] else np.empty(0, np.float64)
    return sparse.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))
