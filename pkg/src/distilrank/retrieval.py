"""First-stage retrievers: native BM25, dense dot-product over precomputed
vectors, run-file adapter, and BM25 + external-scorer composition.

BM25 uses the Lucene idf variant with Anserini's MS MARCO defaults
(k1=0.9, b=0.4):

    score = sum over query token occurrences of
            ln(1 + (N - df + 0.5) / (df + 0.5))
            * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))

Ties are broken by ascending doc_id so all searches are reproducible.
"""

from __future__ import annotations

import json
import math
import threading
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError
from .io import run_from_ranked
from .tokenization import TokenizerConfig, tokenize
from .types import Document, Run


@dataclass(frozen=True)
class ScoredDoc:
    doc_id: str
    score: float


@dataclass
class InvertedIndex:
    postings: dict[str, list[tuple[int, int]]]  # token -> [(doc ordinal, tf)], sorted
    doc_lengths: list[int]
    doc_ids: list[str]
    k1: float = 0.9
    b: float = 0.4
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    @property
    def avgdl(self) -> float:
        return sum(self.doc_lengths) / len(self.doc_lengths) if self.doc_lengths else 0.0

    def __post_init__(self) -> None:
        if self.k1 <= 0 or not 0.0 <= self.b <= 1.0:
            raise DataError(f"BM25 parameters out of range: k1={self.k1}, b={self.b}")
        if len(self.doc_lengths) != len(self.doc_ids):
            raise DataError("index doc_lengths and doc_ids disagree in length")


def build_index(
    corpus: Iterable[Document],
    tokenizer: TokenizerConfig = TokenizerConfig(),
    k1: float = 0.9,
    b: float = 0.4,
) -> InvertedIndex:
    """Build an inverted index over the corpus; deterministic for fixed input order."""
    postings: dict[str, list[tuple[int, int]]] = {}
    doc_lengths: list[int] = []
    doc_ids: list[str] = []
    for ordinal, doc in enumerate(corpus):
        tokens = tokenize(doc.text, tokenizer)
        doc_ids.append(doc.doc_id)
        doc_lengths.append(len(tokens))
        counts: dict[str, int] = {}
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
        for token, tf in counts.items():
            postings.setdefault(token, []).append((ordinal, tf))
    return InvertedIndex(postings=postings, doc_lengths=doc_lengths, doc_ids=doc_ids,
                         k1=k1, b=b, tokenizer=tokenizer)


def _idf(index: InvertedIndex, token: str) -> float:
    df = len(index.postings.get(token, ()))
    if df == 0:
        return 0.0
    return math.log(1.0 + (index.n_docs - df + 0.5) / (df + 0.5))


def _tf_weight(index: InvertedIndex, tf: int, doc_len: int) -> float:
    norm = 1.0 - index.b + index.b * doc_len / index.avgdl
    return tf * (index.k1 + 1.0) / (tf + index.k1 * norm)


def bm25_score(index: InvertedIndex, query_tokens: Sequence[str], ordinal: int) -> float:
    """Score one document against query tokens, summing per token occurrence."""
    if not 0 <= ordinal < index.n_docs:
        raise DataError(f"document ordinal {ordinal} out of range 0..{index.n_docs - 1}")
    score = 0.0
    doc_len = index.doc_lengths[ordinal]
    for token in query_tokens:
        plist = index.postings.get(token)
        if not plist:
            continue
        pos = bisect_left(plist, (ordinal,))
        if pos < len(plist) and plist[pos][0] == ordinal:
            score += _idf(index, token) * _tf_weight(index, plist[pos][1], doc_len)
    return score


def search_bm25(index: InvertedIndex, query_text: str, k: int = 30) -> list[ScoredDoc]:
    """Top-k documents by BM25, descending score; only docs scoring > 0 are returned."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    query_tokens = tokenize(query_text, index.tokenizer)
    acc: dict[int, float] = {}
    for token in query_tokens:
        plist = index.postings.get(token)
        if not plist:
            continue
        idf = _idf(index, token)
        for ordinal, tf in plist:
            acc[ordinal] = acc.get(ordinal, 0.0) + idf * _tf_weight(
                index, tf, index.doc_lengths[ordinal]
            )
    scored = [
        ScoredDoc(index.doc_ids[ordinal], score)
        for ordinal, score in acc.items()
        if score > 0.0
    ]
    scored.sort(key=lambda d: (-d.score, d.doc_id))
    return scored[:k]


def save_index(index: InvertedIndex, path: str | Path) -> None:
    obj = {
        "k1": index.k1,
        "b": index.b,
        "lowercase": index.tokenizer.lowercase,
        "min_token_len": index.tokenizer.min_token_len,
        "doc_ids": index.doc_ids,
        "doc_lengths": index.doc_lengths,
        "postings": {t: [list(p) for p in plist] for t, plist in index.postings.items()},
    }
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_index(path: str | Path) -> InvertedIndex:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return InvertedIndex(
            postings={t: [tuple(p) for p in plist] for t, plist in obj["postings"].items()},
            doc_lengths=obj["doc_lengths"],
            doc_ids=obj["doc_ids"],
            k1=obj["k1"],
            b=obj["b"],
            tokenizer=TokenizerConfig(obj["lowercase"], obj["min_token_len"]),
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"cannot load index from {path}: {exc}") from exc


@dataclass
class DenseStore:
    dimension: int
    vectors: dict[str, np.ndarray]


def load_dense_store(lines: Iterable[str]) -> DenseStore:
    """Parse line-delimited JSON {"doc_id": ..., "vector": [...]} into a DenseStore."""
    vectors: dict[str, np.ndarray] = {}
    dimension = -1
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            doc_id = obj["doc_id"]
            vec = np.asarray(obj["vector"], dtype=np.float64)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"dense store line {lineno}: malformed record ({exc})") from exc
        if vec.ndim != 1:
            raise DataError(f"dense store line {lineno}: vector is not one-dimensional")
        if dimension < 0:
            dimension = vec.shape[0]
        elif vec.shape[0] != dimension:
            raise DataError(
                f"dense store line {lineno}: dimension {vec.shape[0]} != {dimension}"
            )
        vectors[doc_id] = vec
    return DenseStore(dimension=max(dimension, 0), vectors=vectors)


def search_dense(store: DenseStore, query_vector: Sequence[float], k: int = 30) -> list[ScoredDoc]:
    """Top-k documents by dot product; returns all docs when k exceeds the store size."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q = np.asarray(query_vector, dtype=np.float64)
    if q.shape != (store.dimension,):
        raise DataError(f"query vector dimension {q.shape} != store dimension {store.dimension}")
    scored = [ScoredDoc(doc_id, float(vec @ q)) for doc_id, vec in store.vectors.items()]
    scored.sort(key=lambda d: (-d.score, d.doc_id))
    return scored[:k]


class RunfileSearcher:
    """Adapter that lets a precomputed run act as a retriever; counts missing queries."""

    def __init__(self, run: Run):
        self.run = run
        self.misses = 0
        self._lock = threading.Lock()

    def search(self, query_id: str, k: int = 30) -> list[ScoredDoc]:
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        entries = self.run.get(query_id)
        if entries is None:
            with self._lock:
                self.misses += 1
            return []
        return [ScoredDoc(e.doc_id, e.score) for e in entries[:k]]


def search_runfile(run: Run, query_id: str, k: int = 30) -> list[ScoredDoc]:
    return RunfileSearcher(run).search(query_id, k)


def load_score_map(lines: Iterable[str]) -> dict[tuple[str, str], float]:
    """Parse a TSV score map qid<TAB>docid<TAB>score for compose_rerank."""
    scores: dict[tuple[str, str], float] = {}
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 3:
            raise DataError(f"score map line {lineno}: expected 3 columns, got {len(parts)}")
        try:
            scores[(parts[0], parts[1])] = float(parts[2])
        except ValueError:
            raise DataError(f"score map line {lineno}: non-numeric score {parts[2]!r}") from None
    return scores


def compose_rerank(
    base_run: Run,
    score_map: Mapping[tuple[str, str], float],
    k_pool: int = 100,
    k_out: int = 30,
    tag: str = "composed",
) -> Run:
    """Reorder the top-k_pool of each query by external scores and keep the top k_out.

    The sort is stable, so documents with equal external scores keep their
    base-run order (a score map equal to the base scores is a no-op).
    """
    if k_out > k_pool:
        raise ValueError(f"k_out={k_out} must not exceed k_pool={k_pool}")
    ranked: dict[str, list[tuple[str, float]]] = {}
    for qid, entries in base_run.items():
        pool = entries[:k_pool]
        rescored: list[tuple[str, float]] = []
        for e in pool:
            key = (qid, e.doc_id)
            if key not in score_map:
                raise DataError(f"score map missing pair ({qid}, {e.doc_id})")
            rescored.append((e.doc_id, score_map[key]))
        rescored.sort(key=lambda d: -d[1])
        ranked[qid] = rescored[:k_out]
    return run_from_ranked(ranked, tag)
