"""Codecs for every file format the pipeline exchanges.

Formats:
  corpus.jsonl    one JSON object per line: {"doc_id": ..., "text": ...}
  queries.tsv     query_id<TAB>text<TAB>kind, kind in {cropped, generated}
  run files       TREC 6-column: qid Q0 docid rank score tag
  qrels           TREC 4-column: qid 0 docid rel
  distilled.jsonl one JSON object per line with all DistilledExample fields

Canonical run text uses a single space separator, %.6f scores, and queries
sorted by query_id, so write_run(read_run(x)) == x byte-for-byte.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataError
from .types import DistilledExample, Document, Qrels, Query, QueryKind, Run, RunEntry, Source, validate_run


def parse_corpus(lines: Iterable[str]) -> list[Document]:
    """Parse corpus.jsonl lines; blank lines are skipped, duplicate ids rejected."""
    docs: list[Document] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            doc = Document(doc_id=obj["doc_id"], text=obj["text"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"corpus line {lineno}: malformed record ({exc})") from exc
        if doc.doc_id in seen:
            raise DataError(f"corpus line {lineno}: duplicate doc_id {doc.doc_id!r}")
        seen.add(doc.doc_id)
        docs.append(doc)
    return docs


def write_corpus(docs: Iterable[Document]) -> str:
    return "".join(
        json.dumps({"doc_id": d.doc_id, "text": d.text}, ensure_ascii=False) + "\n" for d in docs
    )


def parse_queries(lines: Iterable[str]) -> list[Query]:
    """Parse queries.tsv lines into Query values."""
    queries: list[Query] = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 3:
            raise DataError(f"queries line {lineno}: expected 3 tab-separated columns, got {len(parts)}")
        query_id, text, kind_str = parts
        try:
            kind = QueryKind(kind_str)
        except ValueError:
            raise DataError(f"queries line {lineno}: unknown kind {kind_str!r}") from None
        queries.append(Query(query_id=query_id, text=text, kind=kind))
    return queries


def write_queries(queries: Iterable[Query]) -> str:
    return "".join(f"{q.query_id}\t{q.text}\t{q.kind.value}\n" for q in queries)


def read_run(lines: Iterable[str]) -> Run:
    """Parse a TREC run file; enforces contiguous ranks and non-increasing scores per query."""
    run: Run = {}
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise DataError(f"run line {lineno}: expected 6 columns, got {len(parts)}")
        qid, _q0, docid, rank_str, score_str, tag = parts
        try:
            rank = int(rank_str)
            score = float(score_str)
        except ValueError:
            raise DataError(f"run line {lineno}: non-numeric rank or score") from None
        run.setdefault(qid, []).append(RunEntry(qid, docid, rank, score, tag))
    for entries in run.values():
        entries.sort(key=lambda e: e.rank)
    validate_run(run)
    return run


def write_run(run: Run, tag: str | None = None) -> str:
    """Serialize a run in canonical form; tag overrides the per-entry tags when given."""
    out: list[str] = []
    for qid in sorted(run):
        for e in sorted(run[qid], key=lambda e: e.rank):
            out.append(f"{e.query_id} Q0 {e.doc_id} {e.rank} {e.score:.6f} {tag or e.tag}\n")
    return "".join(out)


def run_from_ranked(ranked: dict[str, list[tuple[str, float]]], tag: str) -> Run:
    """Build a Run from per-query (doc_id, score) lists already in rank order."""
    run: Run = {}
    for qid, docs in ranked.items():
        run[qid] = [
            RunEntry(qid, doc_id, rank, score, tag)
            for rank, (doc_id, score) in enumerate(docs, 1)
        ]
    validate_run(run)
    return run


def read_qrels(lines: Iterable[str]) -> Qrels:
    """Parse TREC qrels; duplicate pairs and negative grades are rejected."""
    qrels: Qrels = {}
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise DataError(f"qrels line {lineno}: expected 4 columns, got {len(parts)}")
        qid, _iter, docid, rel_str = parts
        try:
            rel = int(rel_str)
        except ValueError:
            raise DataError(f"qrels line {lineno}: non-integer relevance {rel_str!r}") from None
        if rel < 0:
            raise DataError(f"qrels line {lineno}: negative relevance grade {rel}")
        if (qid, docid) in qrels:
            raise DataError(f"qrels line {lineno}: duplicate pair ({qid}, {docid})")
        qrels[(qid, docid)] = rel
    return qrels


def write_qrels(qrels: Qrels) -> str:
    return "".join(f"{qid} 0 {docid} {rel}\n" for (qid, docid), rel in sorted(qrels.items()))


def _example_to_obj(ex: DistilledExample) -> dict:
    return {
        "query_id": ex.query_id,
        "query_text": ex.query_text,
        "kind": ex.kind.value,
        "source_retriever": ex.source_retriever.value,
        "doc_ids": list(ex.doc_ids),
        "llm_ranking": list(ex.llm_ranking),
        "raw_response": ex.raw_response,
        "repaired": ex.repaired,
    }


def _example_from_obj(obj: dict, where: str) -> DistilledExample:
    try:
        return DistilledExample(
            query_id=obj["query_id"],
            query_text=obj["query_text"],
            kind=QueryKind(obj["kind"]),
            source_retriever=Source(obj["source_retriever"]),
            doc_ids=tuple(obj["doc_ids"]),
            llm_ranking=tuple(obj["llm_ranking"]),
            raw_response=obj.get("raw_response", ""),
            repaired=bool(obj.get("repaired", False)),
        )
    except (KeyError, ValueError, TypeError) as exc:
        qid = obj.get("query_id", "?") if isinstance(obj, dict) else "?"
        raise DataError(f"{where}: invalid distilled example for query {qid!r} ({exc})") from exc


def write_distilled(examples: Iterable[DistilledExample]) -> str:
    return "".join(
        json.dumps(_example_to_obj(ex), ensure_ascii=False) + "\n" for ex in examples
    )


def read_distilled(lines: Iterable[str]) -> list[DistilledExample]:
    """Parse distilled.jsonl; rankings that are not permutations are rejected."""
    examples: list[DistilledExample] = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"distilled line {lineno}: malformed JSON ({exc})") from exc
        examples.append(_example_from_obj(obj, f"distilled line {lineno}"))
    return examples


def _iter_lines(path: str | Path) -> Iterator[str]:
    with open(path, encoding="utf-8") as f:
        yield from f


def load_corpus(path: str | Path) -> list[Document]:
    return parse_corpus(_iter_lines(path))


def load_queries(path: str | Path) -> list[Query]:
    return parse_queries(_iter_lines(path))


def load_run(path: str | Path) -> Run:
    return read_run(_iter_lines(path))


def load_qrels(path: str | Path) -> Qrels:
    return read_qrels(_iter_lines(path))


def load_distilled(path: str | Path) -> list[DistilledExample]:
    return read_distilled(_iter_lines(path))


def save_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")
