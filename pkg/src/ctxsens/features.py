"""TF-IDF featurization of target posts for the classical regressors.

Tokenizer: Unicode lowercasing, split on non-alphanumeric runs, tokens of a
configurable minimum length, unigrams plus bigrams by default. Weights use
the smoothed idf ln((1 + N) / (1 + df)) + 1 and are L2-normalized. Only the
target text is featurized; the parent is deliberately ignored.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import sparse

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

VOCABULARY_FORMAT_VERSION = 1


class FeatureError(ValueError):
    pass


class EmptyVocabularyError(FeatureError):
    pass


@dataclass(frozen=True)
class FeatureConfig:
    lowercase: bool = True
    min_token_len: int = 2
    ngram_max: int = 2
    min_df: int = 2
    max_features: int | None = 50_000
    sublinear_tf: bool = False
    stopwords: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.min_token_len < 1:
            raise FeatureError("min_token_len must be >= 1")
        if self.ngram_max < 1:
            raise FeatureError("ngram_max must be >= 1")
        if self.min_df < 1:
            raise FeatureError("min_df must be >= 1")
        if self.max_features is not None and self.max_features < 1:
            raise FeatureError("max_features must be >= 1 or None")
        object.__setattr__(self, "stopwords", tuple(self.stopwords))


def tokenize(text: str, config: FeatureConfig) -> list[str]:
    """Terms for one text: filtered word tokens plus space-joined n-grams."""
    if config.lowercase:
        text = text.lower()
    words = [t for t in _TOKEN_RE.findall(text) if len(t) >= config.min_token_len]
    if config.stopwords:
        stop = set(config.stopwords)
        words = [w for w in words if w not in stop]
    terms = list(words)
    for n in range(2, config.ngram_max + 1):
        terms.extend(" ".join(words[i : i + n]) for i in range(len(words) - n + 1))
    return terms


@dataclass(frozen=True)
class FeatureVector:
    """Sparse L2-normalized vector: strictly increasing indices < dimension."""

    indices: tuple[int, ...]
    weights: tuple[float, ...]
    dimension: int

    def __post_init__(self) -> None:
        if len(self.indices) != len(self.weights):
            raise FeatureError("indices and weights must be parallel")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise FeatureError("indices must be strictly increasing")
        if self.indices and self.indices[-1] >= self.dimension:
            raise FeatureError("index out of range")

    def norm(self) -> float:
        return math.sqrt(sum(w * w for w in self.weights))


class Vocabulary:
    """Term index with document frequencies; immutable once fitted."""

    def __init__(
        self,
        term_index: dict[str, int],
        doc_freq: dict[str, int],
        n_documents: int,
        config: FeatureConfig,
    ):
        self.term_index = dict(term_index)
        self.doc_freq = dict(doc_freq)
        self.n_documents = n_documents
        self.config = config
        self._idf = np.zeros(len(self.term_index))
        for term, idx in self.term_index.items():
            self._idf[idx] = math.log((1.0 + n_documents) / (1.0 + self.doc_freq[term])) + 1.0

    def __len__(self) -> int:
        return len(self.term_index)

    @property
    def dimension(self) -> int:
        return len(self.term_index)

    def idf(self, term: str) -> float:
        return float(self._idf[self.term_index[term]])

    def to_json(self) -> dict:
        terms = sorted(self.term_index.items(), key=lambda kv: kv[1])
        return {
            "format_version": VOCABULARY_FORMAT_VERSION,
            "n_documents": self.n_documents,
            "config": asdict(self.config) | {"stopwords": list(self.config.stopwords)},
            "terms": [[term, idx, self.doc_freq[term]] for term, idx in terms],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Vocabulary":
        if obj.get("format_version") != VOCABULARY_FORMAT_VERSION:
            raise FeatureError(f"unsupported vocabulary format {obj.get('format_version')!r}")
        cfg = dict(obj["config"])
        cfg["stopwords"] = tuple(cfg.get("stopwords", ()))
        config = FeatureConfig(**cfg)
        term_index = {term: idx for term, idx, _ in obj["terms"]}
        doc_freq = {term: df for term, _, df in obj["terms"]}
        return cls(term_index, doc_freq, obj["n_documents"], config)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False, sort_keys=True)

    @classmethod
    def loads(cls, payload: str) -> "Vocabulary":
        return cls.from_json(json.loads(payload))


def fit_vocabulary(texts: Sequence[str], config: FeatureConfig | None = None) -> Vocabulary:
    """Build a vocabulary: df filter, then cap by highest df, then index by term.

    Deterministic given identical inputs and config: ties in the max_features
    cut break lexicographically, and indices follow sorted term order.
    """
    config = config or FeatureConfig()
    if not texts:
        raise FeatureError("texts must be nonempty")
    df: Counter[str] = Counter()
    for text in texts:
        df.update(set(tokenize(text, config)))
    if not df:
        raise EmptyVocabularyError("corpus is empty after tokenization")
    kept = [(term, count) for term, count in df.items() if count >= config.min_df]
    if not kept:
        raise EmptyVocabularyError(f"no term reaches min_df={config.min_df}")
    if config.max_features is not None and len(kept) > config.max_features:
        kept.sort(key=lambda tc: (-tc[1], tc[0]))
        kept = kept[: config.max_features]
    kept.sort(key=lambda tc: tc[0])
    term_index = {term: i for i, (term, _) in enumerate(kept)}
    doc_freq = {term: count for term, count in kept}
    return Vocabulary(term_index, doc_freq, n_documents=len(texts), config=config)


def transform(vocab: Vocabulary, text: str) -> FeatureVector:
    """tf * idf, L2-normalized; out-of-vocabulary terms are ignored.

    A text with no in-vocabulary term yields the zero vector (the norm
    invariant is waived for it).
    """
    counts = Counter(tokenize(text, vocab.config))
    items: list[tuple[int, float]] = []
    for term, tf in counts.items():
        idx = vocab.term_index.get(term)
        if idx is None:
            continue
        tf_value = 1.0 + math.log(tf) if vocab.config.sublinear_tf else float(tf)
        items.append((idx, tf_value * vocab._idf[idx]))
    if not items:
        return FeatureVector(indices=(), weights=(), dimension=vocab.dimension)
    items.sort()
    norm = math.sqrt(sum(w * w for _, w in items))
    return FeatureVector(
        indices=tuple(i for i, _ in items),
        weights=tuple(w / norm for _, w in items),
        dimension=vocab.dimension,
    )


def transform_many(vocab: Vocabulary, texts: Sequence[str]) -> list[FeatureVector]:
    return [transform(vocab, text) for text in texts]


def to_csr(vectors: Sequence[FeatureVector]) -> sparse.csr_matrix:
    """Stack feature vectors into a CSR matrix (rows in input order)."""
    if not vectors:
        raise FeatureError("no vectors")
    dimension = vectors[0].dimension
    if any(v.dimension != dimension for v in vectors):
        raise FeatureError("vectors disagree on dimension")
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        indptr[i + 1] = indptr[i] + len(v.indices)
    indices = np.concatenate([np.asarray(v.indices, dtype=np.int64) for v in vectors]) if indptr[-1] else np.zeros(0, dtype=np.int64)
    data = np.concatenate([np.asarray(v.weights, dtype=np.float64) for v in vectors]) if indptr[-1] else np.zeros(0)
    return sparse.csr_matrix((data, indices, indptr), shape=(len(vectors), dimension))
