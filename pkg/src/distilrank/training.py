"""RankNet loss with analytic gradients, a from-scratch AdamW optimizer, and
the training loop over distilled examples, including the ablation knobs
(documents per sample, query-kind filter, leave-one-source-out).

Sign convention: for a pair where document i is ranked better than j
(r_i < r_j), the implemented objective is softplus(s_j - s_i), so minimizing
it pushes s_i above s_j. The mirrored variant softplus(s_i - s_j) is kept
behind ``literal_sign`` for A/B inspection.

Per example the loss is summed over pairs; per batch it is averaged over
queries, so histories are comparable only within one docs-per-query setting.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit

from .errors import DataError
from .scorer import ScorerParams, ScoreStrategy, SparseVector, featurize, score_batch, score_batch_grad
from .types import DistilledExample, QueryKind, Source


class KindFilter(Enum):
    MIXED = "mixed"
    CROPPED_ONLY = "cropped-only"
    GENERATED_ONLY = "generated-only"


@dataclass(frozen=True)
class TrainConfig:
    batch_queries: int = 32
    docs_per_query: int = 30
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    epochs: int = 10
    seed: int = 0
    strategy: ScoreStrategy = ScoreStrategy.LOGIT_DIFFERENCE
    kind_filter: KindFilter = KindFilter.MIXED
    excluded_source: Source | None = None
    literal_sign: bool = False

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not 0 < self.docs_per_query <= 30:
            raise ValueError(f"docs_per_query must be in 1..30, got {self.docs_per_query}")
        if self.batch_queries < 1:
            raise ValueError("batch size must be >= 1")


def _check_ranking(scores: np.ndarray, ranking: np.ndarray) -> None:
    m = scores.shape[0]
    if ranking.shape != (m,) or sorted(ranking.tolist()) != list(range(1, m + 1)):
        raise ValueError(f"ranking is not a permutation of 1..{m}")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores contain non-finite values")


def _pair_diffs(scores: np.ndarray, ranking: np.ndarray, literal_sign: bool):
    # mask[i, j] is True where document i is ranked strictly better than j
    mask = ranking[:, None] < ranking[None, :]
    diff = scores[None, :] - scores[:, None]  # diff[i, j] = s_j - s_i
    if literal_sign:
        diff = -diff
    return mask, diff


def ranknet_loss(
    scores: Sequence[float],
    ranking: Sequence[int],
    literal_sign: bool = False,
) -> float:
    """Sum of softplus pair penalties over all ordered pairs of the ranking."""
    s = np.asarray(scores, dtype=np.float64)
    r = np.asarray(ranking, dtype=np.int64)
    _check_ranking(s, r)
    mask, diff = _pair_diffs(s, r, literal_sign)
    return float(np.logaddexp(0.0, diff[mask]).sum())


def ranknet_grad(
    scores: Sequence[float],
    ranking: Sequence[int],
    literal_sign: bool = False,
) -> np.ndarray:
    """Analytic dL/ds_k; the entries sum to zero since each pair contributes +g and -g."""
    s = np.asarray(scores, dtype=np.float64)
    r = np.asarray(ranking, dtype=np.int64)
    _check_ranking(s, r)
    mask, diff = _pair_diffs(s, r, literal_sign)
    g = expit(diff) * mask
    if literal_sign:
        return g.sum(axis=1) - g.sum(axis=0)
    return g.sum(axis=0) - g.sum(axis=1)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0


def init_adam_state(arrays: Sequence[np.ndarray]) -> AdamState:
    return AdamState(
        m=[np.zeros_like(a) for a in arrays],
        v=[np.zeros_like(a) for a in arrays],
    )


def adamw_step(
    arrays: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> tuple[Sequence[np.ndarray], AdamState]:
    """One decoupled-weight-decay Adam update, in place on ``arrays``.

    Decay scales parameters by (1 - lr * weight_decay) before the
    bias-corrected moment update.
    """
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise DataError("non-finite gradient passed to adamw_step")
    state.t += 1
    bc1 = 1.0 - config.beta1 ** state.t
    bc2 = 1.0 - config.beta2 ** state.t
    for theta, g, m, v in zip(arrays, grads, state.m, state.v):
        if config.weight_decay != 0.0:
            theta *= 1.0 - config.learning_rate * config.weight_decay
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * np.square(g)
        theta -= config.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + config.eps)
    return arrays, state


def subsample_docs(example: DistilledExample, m_prime: int, seed: int) -> DistilledExample:
    """Keep m_prime uniformly sampled documents, re-ranking survivors 1..m_prime
    while preserving their relative order."""
    m = example.m
    if m_prime > m:
        raise ValueError(f"cannot keep {m_prime} documents, example has {m}")
    if m_prime == m:
        return example
    keep = sorted(random.Random(seed).sample(range(m), m_prime))
    surviving = [example.llm_ranking[i] for i in keep]
    order = sorted(range(m_prime), key=lambda j: surviving[j])
    new_ranks = [0] * m_prime
    for rank, j in enumerate(order, 1):
        new_ranks[j] = rank
    return replace(
        example,
        doc_ids=tuple(example.doc_ids[i] for i in keep),
        llm_ranking=tuple(new_ranks),
    )


@dataclass
class PreparedExample:
    """A distilled example resolved to feature vectors, ready for the loop."""

    query_id: str
    features: list[SparseVector]
    ranking: np.ndarray


@dataclass(frozen=True)
class HistoryRow:
    epoch: int
    train_loss: float
    val_loss: float


def write_history(history: Sequence[HistoryRow]) -> str:
    lines = ["epoch\ttrain_loss\tval_loss\n"]
    lines += [f"{h.epoch}\t{h.train_loss:.6f}\t{h.val_loss:.6f}\n" for h in history]
    return "".join(lines)


def prepare_example(
    example: DistilledExample,
    corpus: Mapping[str, str],
    params: ScorerParams,
    cache: dict[tuple[str, str], SparseVector] | None = None,
) -> PreparedExample:
    features = []
    for doc_id in example.doc_ids:
        key = (example.query_id, doc_id)
        vec = cache.get(key) if cache is not None else None
        if vec is None:
            if doc_id not in corpus:
                raise DataError(f"document {doc_id!r} missing from corpus")
            vec = featurize(example.query_text, corpus[doc_id], params.feature)
            if cache is not None:
                cache[key] = vec
        features.append(vec)
    return PreparedExample(example.query_id, features, np.asarray(example.llm_ranking))


def _forward_all(params: ScorerParams, features: list[SparseVector]):
    n = len(features)
    h_pre = np.empty((n, params.hidden))
    for i, vec in enumerate(features):
        if vec.nnz:
            h_pre[i] = params.w1[vec.indices].T @ vec.values + params.b1
        else:
            h_pre[i] = params.b1
    h = np.maximum(h_pre, 0.0)
    z = h @ params.w2 + params.b2
    return h_pre, h, z


def batch_loss(
    params: ScorerParams,
    batch: Sequence[PreparedExample],
    strategy: ScoreStrategy,
    literal_sign: bool = False,
) -> float:
    """Mean over queries of the per-example pair-summed RankNet loss."""
    total = 0.0
    for ex in batch:
        _, _, z = _forward_all(params, ex.features)
        total += ranknet_loss(score_batch(z, strategy), ex.ranking, literal_sign)
    return total / len(batch)


def batch_loss_and_grads(
    params: ScorerParams,
    batch: Sequence[PreparedExample],
    strategy: ScoreStrategy,
    literal_sign: bool = False,
    grad_buffers: list[np.ndarray] | None = None,
) -> tuple[float, list[np.ndarray]]:
    """Loss plus analytic parameter gradients, backpropagated through the scorer."""
    if grad_buffers is None:
        grads = [np.zeros_like(a) for a in params.arrays()]
    else:
        grads = grad_buffers
        for g in grads:
            g.fill(0.0)
    gw1, gb1, gw2, gb2 = grads
    scale = 1.0 / len(batch)
    total = 0.0
    for ex in batch:
        h_pre, h, z = _forward_all(params, ex.features)
        scores = score_batch(z, strategy)
        total += ranknet_loss(scores, ex.ranking, literal_sign)
        ds = ranknet_grad(scores, ex.ranking, literal_sign) * scale
        dz = ds[:, None] * score_batch_grad(z, strategy)  # (n, 2)
        gw2 += h.T @ dz
        gb2 += dz.sum(axis=0)
        dh = dz @ params.w2.T
        dh_pre = dh * (h_pre > 0.0)
        gb1 += dh_pre.sum(axis=0)
        for i, vec in enumerate(ex.features):
            if vec.nnz:
                gw1[vec.indices] += np.outer(vec.values, dh_pre[i])
    return total * scale, grads


def filter_examples(
    examples: Sequence[DistilledExample],
    kind_filter: KindFilter,
    excluded_source: Source | None,
) -> list[DistilledExample]:
    kept = list(examples)
    if kind_filter is KindFilter.CROPPED_ONLY:
        kept = [ex for ex in kept if ex.kind is QueryKind.CROPPED]
    elif kind_filter is KindFilter.GENERATED_ONLY:
        kept = [ex for ex in kept if ex.kind is QueryKind.GENERATED]
    if excluded_source is not None:
        kept = [ex for ex in kept if ex.source_retriever is not excluded_source]
    return kept


def fit(
    config: TrainConfig,
    train_examples: Sequence[DistilledExample],
    val_examples: Sequence[DistilledExample],
    corpus: Mapping[str, str],
    params: ScorerParams,
) -> tuple[ScorerParams, list[HistoryRow]]:
    """Train the scorer with RankNet + AdamW; deterministic given the seed.

    The kind filter and source exclusion apply to the training set only. Each
    example is reduced to ``docs_per_query`` documents once, up front, with a
    seed derived from the config seed. History row 0 holds the pre-training
    losses; row e holds the losses after epoch e, all evaluated on the reduced
    examples.
    """
    train_filtered = filter_examples(train_examples, config.kind_filter, config.excluded_source)
    if not train_filtered:
        raise DataError("no training examples left after kind/source filtering")

    # independent streams so the validation set cannot perturb training
    rng_train = np.random.default_rng([config.seed, 0])
    rng_val = np.random.default_rng([config.seed, 1])
    rng = np.random.default_rng([config.seed, 2])

    def reduce_all(examples, stream) -> list[DistilledExample]:
        return [
            subsample_docs(ex, min(config.docs_per_query, ex.m), int(stream.integers(2**63)))
            for ex in examples
        ]

    train_reduced = reduce_all(train_filtered, rng_train)
    val_reduced = reduce_all(val_examples, rng_val)

    cache: dict[tuple[str, str], SparseVector] = {}
    train_prep = [prepare_example(ex, corpus, params, cache) for ex in train_reduced]
    val_prep = [prepare_example(ex, corpus, params, cache) for ex in val_reduced]

    def eval_losses() -> tuple[float, float]:
        train_loss = batch_loss(params, train_prep, config.strategy, config.literal_sign)
        val_loss = (
            batch_loss(params, val_prep, config.strategy, config.literal_sign)
            if val_prep else float("nan")
        )
        return train_loss, val_loss

    history = [HistoryRow(0, *eval_losses())]
    state = init_adam_state(params.arrays())
    grad_buffers = [np.zeros_like(a) for a in params.arrays()]

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_prep))
        for batch_no, start in enumerate(range(0, len(order), config.batch_queries)):
            batch = [train_prep[i] for i in order[start: start + config.batch_queries]]
            try:
                loss, grads = batch_loss_and_grads(
                    params, batch, config.strategy, config.literal_sign, grad_buffers
                )
            except ValueError as exc:
                raise DataError(f"training diverged at epoch {epoch}, batch {batch_no}: {exc}") from exc
            if not np.isfinite(loss):
                raise DataError(f"training diverged at epoch {epoch}, batch {batch_no}")
            adamw_step(params.arrays(), grads, state, config)
        history.append(HistoryRow(epoch, *eval_losses()))

    return params, history
