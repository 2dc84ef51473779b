"""Domain data model: documents, queries, runs, qrels, distilled examples."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import DataError


class QueryKind(Enum):
    CROPPED = "cropped"
    GENERATED = "generated"


class Source(Enum):
    """First-stage retrieval system that supplied a query's candidate pool."""

    BM25 = "BM25"
    SPLADE = "SPLADE"
    DRAGON = "DRAGON"
    MONOT5 = "MonoT5"


SOURCES = (Source.BM25, Source.SPLADE, Source.DRAGON, Source.MONOT5)


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str

    def __post_init__(self) -> None:
        if not self.doc_id or any(c.isspace() for c in self.doc_id):
            raise DataError(f"doc_id must be non-empty with no whitespace: {self.doc_id!r}")


@dataclass(frozen=True)
class Query:
    query_id: str
    text: str
    kind: QueryKind


@dataclass(frozen=True)
class RunEntry:
    query_id: str
    doc_id: str
    rank: int
    score: float
    tag: str


# A run maps query_id -> entries sorted by rank; the universal retrieval currency.
Run = dict[str, list[RunEntry]]

# Qrels map (query_id, doc_id) -> non-negative relevance grade.
Qrels = dict[tuple[str, str], int]


@dataclass(frozen=True)
class DistilledExample:
    """One query with its pooled documents and the teacher's permutation ranking.

    ``llm_ranking[i]`` is the rank (1 = most relevant) the teacher assigned to
    ``doc_ids[i]``; it must be a permutation of ``1..len(doc_ids)``.
    """

    query_id: str
    query_text: str
    kind: QueryKind
    source_retriever: Source
    doc_ids: tuple[str, ...]
    llm_ranking: tuple[int, ...]
    raw_response: str = ""
    repaired: bool = False

    def __post_init__(self) -> None:
        m = len(self.doc_ids)
        if len(self.llm_ranking) != m:
            raise DataError(
                f"query {self.query_id}: ranking length {len(self.llm_ranking)} != {m} documents"
            )
        if sorted(self.llm_ranking) != list(range(1, m + 1)):
            raise DataError(f"query {self.query_id}: llm_ranking is not a permutation of 1..{m}")

    @property
    def m(self) -> int:
        return len(self.doc_ids)


def validate_run(run: Run) -> None:
    """Check per-query rank contiguity and non-increasing scores; raise DataError otherwise."""
    for query_id, entries in run.items():
        ranks = [e.rank for e in entries]
        if ranks != list(range(1, len(entries) + 1)):
            raise DataError(f"query {query_id}: ranks are not 1..{len(entries)} without gaps")
        for prev, cur in zip(entries, entries[1:]):
            if cur.score > prev.score:
                raise DataError(
                    f"query {query_id}: score increases from rank {prev.rank} to {cur.rank}"
                )
