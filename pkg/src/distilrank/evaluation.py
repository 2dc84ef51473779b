"""Evaluation: nDCG@k with trec_eval conventions, run-level reports, the
pairwise intersection-rate diversity statistic, a paired two-sided t-test,
and model-based reranking of runs.

nDCG uses exponential gains (2^rel - 1) and log2(p + 1) discounts; the ideal
DCG comes from all judged documents of the query, not just retrieved ones.
Queries with no positive grade score 0 and still count toward the mean.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import DataError
from .io import run_from_ranked
from .scorer import LogitPair, ScorerParams, ScoreStrategy, featurize, forward, score
from .types import Qrels, Run

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalReport:
    per_query: dict[str, float]
    mean: float
    k: int
    n_queries: int


def ndcg_at_k(ranked_doc_ids: Sequence[str], query_qrels: Mapping[str, int], k: int) -> float:
    """nDCG@k of one ranking against that query's grades; unjudged docs count 0."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    dcg = 0.0
    for pos, doc_id in enumerate(ranked_doc_ids[:k], 1):
        gain = (1 << query_qrels.get(doc_id, 0)) - 1
        dcg += gain / math.log2(pos + 1)
    ideal_gains = sorted(query_qrels.values(), reverse=True)[:k]
    idcg = sum(((1 << g) - 1) / math.log2(pos + 1) for pos, g in enumerate(ideal_gains, 1))
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


def _qrels_by_query(qrels: Qrels) -> dict[str, dict[str, int]]:
    grouped: dict[str, dict[str, int]] = {}
    for (qid, doc_id), rel in qrels.items():
        grouped.setdefault(qid, {})[doc_id] = rel
    return grouped


def evaluate_run(run: Run, qrels: Qrels, k: int = 10) -> EvalReport:
    """nDCG@k per judged query; queries missing from the run contribute 0."""
    grouped = _qrels_by_query(qrels)
    per_query: dict[str, float] = {}
    for qid, grades in grouped.items():
        entries = run.get(qid, [])
        per_query[qid] = ndcg_at_k([e.doc_id for e in entries], grades, k)
    mean = sum(per_query.values()) / len(per_query) if per_query else 0.0
    return EvalReport(per_query=per_query, mean=mean, k=k, n_queries=len(per_query))


def write_per_query(report: EvalReport) -> str:
    return "".join(f"{qid}\t{v:.6f}\n" for qid, v in sorted(report.per_query.items()))


def intersection_rate(run_a: Run, run_b: Run, n: int = 30) -> float:
    """Mean over shared queries of |top-n(a) set intersect top-n(b) set| / n."""
    shared = sorted(set(run_a) & set(run_b))
    if not shared:
        raise DataError("the two runs share no queries")
    if len(shared) != len(run_a) or len(shared) != len(run_b):
        logger.warning(
            "runs have asymmetric query sets (%d and %d, %d shared); averaging over the shared set",
            len(run_a), len(run_b), len(shared),
        )
    total = 0.0
    for qid in shared:
        set_a = {e.doc_id for e in run_a[qid][:n]}
        set_b = {e.doc_id for e in run_b[qid][:n]}
        total += len(set_a & set_b) / n
    return total / len(shared)


def intersection_matrix(runs: Mapping[str, Run], n: int = 30) -> tuple[list[str], np.ndarray]:
    """Symmetric pairwise intersection-rate matrix; the diagonal is NaN."""
    labels = list(runs)
    if len(labels) < 2:
        raise DataError("need at least two runs for an intersection matrix")
    size = len(labels)
    matrix = np.full((size, size), np.nan)
    for i in range(size):
        for j in range(i + 1, size):
            rate = intersection_rate(runs[labels[i]], runs[labels[j]], n)
            matrix[i, j] = rate
            matrix[j, i] = rate
    return labels, matrix


def format_intersection_tsv(
    labels: Sequence[str],
    upper: np.ndarray,
    lower: np.ndarray | None = None,
) -> str:
    """Render a matrix as TSV; with two matrices, the upper triangle comes from
    ``upper`` and the lower triangle from ``lower`` (the two query kinds)."""
    if lower is None:
        lower = upper
    out = ["\t".join([""] + list(labels)) + "\n"]
    for i, row_label in enumerate(labels):
        cells = [row_label]
        for j in range(len(labels)):
            if i == j:
                cells.append("-")
            elif i < j:
                cells.append(f"{upper[i, j]:.3f}")
            else:
                cells.append(f"{lower[i, j]:.3f}")
        out.append("\t".join(cells) + "\n")
    return "".join(out)


def paired_t_test(per_query_a: Mapping[str, float], per_query_b: Mapping[str, float]) -> float:
    """Two-sided paired t-test p-value over matched per-query scores.

    Degenerate case: all differences zero gives p = 1.0; zero spread with a
    nonzero mean gives p = 0.0.
    """
    if set(per_query_a) != set(per_query_b):
        raise DataError("paired t-test requires identical query keys")
    keys = sorted(per_query_a)
    if len(keys) < 2:
        raise DataError(f"paired t-test needs at least 2 queries, got {len(keys)}")
    d = np.array([per_query_a[k] - per_query_b[k] for k in keys])
    sd = d.std(ddof=1)
    if sd == 0.0:
        return 1.0 if np.all(d == 0.0) else 0.0
    t = d.mean() / (sd / math.sqrt(len(d)))
    return float(2.0 * stats.t.sf(abs(t), df=len(d) - 1))


ScoreFn = Callable[[str, str], float]


def rerank_run(
    run: Run,
    corpus: Mapping[str, str],
    score_fn: ScoreFn,
    k_in: int = 100,
    k_out: int | None = None,
    tag: str = "reranked",
) -> Run:
    """Re-score the top-k_in of each query with ``score_fn(query_id, doc_id)``
    and emit the top-k_out, ties broken by ascending doc_id."""
    if k_out is None:
        k_out = k_in
    if k_out > k_in:
        raise ValueError(f"k_out={k_out} must not exceed k_in={k_in}")
    ranked: dict[str, list[tuple[str, float]]] = {}
    for qid, entries in run.items():
        rescored = [(e.doc_id, score_fn(qid, e.doc_id)) for e in entries[:k_in]]
        rescored.sort(key=lambda d: (-d[1], d[0]))
        ranked[qid] = rescored[:k_out]
    return run_from_ranked(ranked, tag)


def model_score_fn(
    params: ScorerParams,
    strategy: ScoreStrategy,
    queries: Mapping[str, str],
    corpus: Mapping[str, str],
) -> ScoreFn:
    """Score function that featurizes and forwards through the trained scorer."""

    def fn(query_id: str, doc_id: str) -> float:
        if query_id not in queries:
            raise DataError(f"query {query_id!r} has no text available for scoring")
        if doc_id not in corpus:
            raise DataError(f"document {doc_id!r} missing from corpus")
        logits = forward(params, featurize(queries[query_id], corpus[doc_id], params.feature))
        return score(logits, strategy)

    return fn


def external_logit_score_fn(
    logit_map: Mapping[tuple[str, str], LogitPair],
    strategy: ScoreStrategy,
) -> ScoreFn:
    """Score function over externally computed (z_true, z_false) pairs."""

    def fn(query_id: str, doc_id: str) -> float:
        key = (query_id, doc_id)
        if key not in logit_map:
            raise DataError(f"external logits missing pair {key}")
        return score(logit_map[key], strategy)

    return fn
