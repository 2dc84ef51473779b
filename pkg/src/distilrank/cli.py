"""Command-line interface: every pipeline stage as a subcommand of one binary.

Exit status: 0 success, 1 usage error, 2 data error, 3 transport or budget
error. Stages hand files to each other; all randomness is seeded from --seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io
from .augment import (
    CropConfig,
    assign_sources,
    crop_sentences,
    load_generated,
    parse_assignment,
    split_dataset,
    write_assignment,
)
from .config import CliConfig
from .distill import (
    DEFAULT_TEMPLATE,
    WindowPlan,
    api_llm,
    distill,
    load_template,
    mock_llm,
)
from .errors import BudgetError, DataError, TransportError
from .evaluation import (
    evaluate_run,
    external_logit_score_fn,
    format_intersection_tsv,
    intersection_matrix,
    model_score_fn,
    paired_t_test,
    rerank_run,
    write_per_query,
)
from .llm import LlmClient, LlmConfig, RetryPolicy
from .retrieval import (
    RunfileSearcher,
    build_index,
    compose_rerank,
    load_dense_store,
    load_index,
    load_score_map,
    save_index,
    search_bm25,
    search_dense,
)
from .scorer import (
    FeatureConfig,
    ScoreStrategy,
    init_params,
    load_checkpoint,
    load_external_logits,
    save_checkpoint,
)
from .training import KindFilter, TrainConfig, fit, write_history
from .types import SOURCES, Query, Run, Source
from .synthetic import synth_benchmark


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("formatter_class", argparse.ArgumentDefaultsHelpFormatter)
        super().__init__(*args, **kwargs)

    def error(self, message):  # noqa: D102 - argparse hook
        raise _UsageError(message)


def _read_lines(path: str):
    with open(path, encoding="utf-8") as f:
        return f.readlines()


def _corpus_map(path: str) -> dict[str, str]:
    return {d.doc_id: d.text for d in io.load_corpus(path)}


def _strategy(name: str) -> ScoreStrategy:
    try:
        return ScoreStrategy(name)
    except ValueError:
        raise DataError(
            f"unknown strategy {name!r}; choose from "
            + ", ".join(s.value for s in ScoreStrategy)
        ) from None


def _kind_filter(name: str) -> KindFilter:
    try:
        return KindFilter(name)
    except ValueError:
        raise DataError(f"unknown kind filter {name!r}") from None


def _source_or_none(name: str) -> Source | None:
    if name.lower() == "none":
        return None
    try:
        return Source(name)
    except ValueError:
        raise DataError(
            f"unknown source {name!r}; choose from none, "
            + ", ".join(s.value for s in SOURCES)
        ) from None


def _load_per_query_tsv(path: str) -> dict[str, float]:
    values: dict[str, float] = {}
    for lineno, line in enumerate(_read_lines(path), 1):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 2:
            raise DataError(f"{path} line {lineno}: expected 2 columns")
        values[parts[0]] = float(parts[1])
    return values


# ---------------------------------------------------------------- handlers


def _cmd_synth(args, cfg: CliConfig) -> int:
    bench = synth_benchmark(
        n_topics=args.topics,
        n_docs=args.docs,
        n_train_queries=args.train_queries,
        n_eval_queries=args.eval_queries,
        seed=args.seed,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.save_text(out / "corpus.jsonl", io.write_corpus(bench.corpus))
    io.save_text(out / "queries-train.tsv", io.write_queries(bench.train_queries))
    io.save_text(out / "queries-eval.tsv", io.write_queries(bench.eval_queries))
    io.save_text(out / "qrels.txt", io.write_qrels(bench.qrels))
    io.save_text(out / "qrels-train.txt", io.write_qrels(bench.train_qrels))
    io.save_text(out / "qrels-eval.txt", io.write_qrels(bench.eval_qrels))
    io.save_text(
        out / "genpool.tsv",
        "".join(f"{doc_id}\t{text}\n" for doc_id, text in bench.generated_pool),
    )
    print(
        f"synth: {len(bench.corpus)} docs, {len(bench.train_queries)} train + "
        f"{len(bench.eval_queries)} eval queries, {len(bench.qrels)} qrels -> {out}"
    )
    return 0


def _cmd_index_build(args, cfg: CliConfig) -> int:
    k1 = cfg.pick(args.k1, "bm25.k1", 0.9)
    b = cfg.pick(args.b, "bm25.b", 0.4)
    index = build_index(io.load_corpus(args.corpus), k1=k1, b=b)
    save_index(index, args.out)
    print(f"index: {index.n_docs} docs, {len(index.postings)} terms, k1={k1} b={b} -> {args.out}")
    return 0


def _cmd_retrieve(args, cfg: CliConfig) -> int:
    k = cfg.pick(args.k, "retrieve.k", 30)
    queries = io.load_queries(args.queries)
    ranked: dict[str, list[tuple[str, float]]] = {}
    if args.method == "bm25":
        if not args.index:
            raise _UsageError("--method bm25 requires --index")
        index = load_index(args.index)
        tag = args.tag or "bm25"
        for q in queries:
            hits = search_bm25(index, q.text, k)
            if hits:
                ranked[q.query_id] = [(h.doc_id, h.score) for h in hits]
    elif args.method == "dense":
        if not args.store or not args.query_vectors:
            raise _UsageError("--method dense requires --store and --query-vectors")
        store = load_dense_store(_read_lines(args.store))
        qvecs = load_dense_store(_read_lines(args.query_vectors))
        tag = args.tag or "dense"
        for q in queries:
            if q.query_id not in qvecs.vectors:
                raise DataError(f"no vector for query {q.query_id!r}")
            hits = search_dense(store, qvecs.vectors[q.query_id], k)
            if hits:
                ranked[q.query_id] = [(h.doc_id, h.score) for h in hits]
    else:  # runfile
        if not args.run:
            raise _UsageError("--method runfile requires --run")
        searcher = RunfileSearcher(io.load_run(args.run))
        tag = args.tag or "runfile"
        for q in queries:
            hits = searcher.search(q.query_id, k)
            if hits:
                ranked[q.query_id] = [(h.doc_id, h.score) for h in hits]
        if searcher.misses:
            print(f"warning: {searcher.misses} queries missing from {args.run}", file=sys.stderr)
    run = io.run_from_ranked(ranked, tag)
    io.save_text(args.out, io.write_run(run))
    print(f"retrieve: {len(run)} queries with results -> {args.out}")
    return 0


def _cmd_augment_crop(args, cfg: CliConfig) -> int:
    config = CropConfig(
        n=args.n,
        min_tokens=cfg.pick(args.min_tokens, "crop.min_tokens", 5),
        max_tokens=cfg.pick(args.max_tokens, "crop.max_tokens", 40),
        seed=args.seed,
    )
    queries = crop_sentences(io.load_corpus(args.corpus), config)
    io.save_text(args.out, io.write_queries(queries))
    print(f"augment crop: {len(queries)} queries -> {args.out}")
    return 0


def _cmd_augment_load_generated(args, cfg: CliConfig) -> int:
    queries = load_generated(_read_lines(args.pool), n=args.n, seed=args.seed)
    io.save_text(args.out, io.write_queries(queries))
    print(f"augment load-generated: {len(queries)} queries -> {args.out}")
    return 0


def _cmd_assign_sources(args, cfg: CliConfig) -> int:
    queries = io.load_queries(args.queries)
    assignment = assign_sources(queries, seed=args.seed)
    io.save_text(args.out, write_assignment(assignment))
    counts: dict[str, int] = {}
    for q in queries:
        key = f"{q.kind.value}/{assignment[q.query_id].value}"
        counts[key] = counts.get(key, 0) + 1
    print("assign-sources: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return 0


def _cmd_split(args, cfg: CliConfig) -> int:
    examples = io.load_distilled(args.distilled)
    train, val = split_dataset(examples, n_val=args.n_val, seed=args.seed)
    io.save_text(args.out_train, io.write_distilled(train))
    io.save_text(args.out_val, io.write_distilled(val))
    print(f"split: {len(train)} train / {len(val)} validation")
    return 0


def _cmd_distill(args, cfg: CliConfig) -> int:
    queries = io.load_queries(args.queries)
    corpus = _corpus_map(args.corpus)
    assignment = parse_assignment(_read_lines(args.assignment)) if args.assignment else {}
    k = cfg.pick(args.k, "retrieve.k", 30)

    index = load_index(args.bm25_index) if args.bm25_index else None
    searchers: dict[Source, RunfileSearcher] = {}
    for source, path in [
        (Source.SPLADE, args.run_splade),
        (Source.DRAGON, args.run_dragon),
        (Source.MONOT5, args.run_monot5),
    ]:
        if path:
            searchers[source] = RunfileSearcher(io.load_run(path))
    if args.monot5_scores:
        if index is None:
            raise _UsageError("--monot5-scores needs --bm25-index to build the base run")
        k_pool = cfg.pick(args.k_pool, "compose.k_pool", 100)
        score_map = load_score_map(_read_lines(args.monot5_scores))
        base: dict[str, list[tuple[str, float]]] = {}
        for q in queries:
            if assignment.get(q.query_id, Source.BM25) is Source.MONOT5:
                hits = search_bm25(index, q.text, k_pool)
                if hits:
                    base[q.query_id] = [(h.doc_id, h.score) for h in hits]
        composed = compose_rerank(io.run_from_ranked(base, "bm25"), score_map, k_pool, k)
        searchers[Source.MONOT5] = RunfileSearcher(composed)

    def lookup_texts(doc_ids: list[str]) -> list[tuple[str, str]]:
        docs = []
        for doc_id in doc_ids:
            if doc_id not in corpus:
                raise DataError(f"document {doc_id!r} missing from corpus")
            docs.append((doc_id, corpus[doc_id]))
        return docs

    def retrieve(query: Query) -> tuple[Source, list[tuple[str, str]]]:
        source = assignment.get(query.query_id, Source.BM25)
        if source is Source.BM25:
            if index is None:
                raise DataError("a query is assigned to BM25 but no --bm25-index was given")
            hits = search_bm25(index, query.text, k)
        else:
            searcher = searchers.get(source)
            if searcher is None:
                raise DataError(f"a query is assigned to {source.value} but no run was given")
            hits = searcher.search(query.query_id, k)
        return source, lookup_texts([h.doc_id for h in hits])

    if args.mock_qrels:
        llm = mock_llm(io.load_qrels(args.mock_qrels))
        max_in_flight = cfg.pick(args.max_in_flight, "llm.max_in_flight", 4)
    else:
        endpoint = cfg.pick(args.endpoint, "llm.endpoint", None)
        if not endpoint:
            raise _UsageError("either --mock-qrels or --endpoint is required")
        llm_config = LlmConfig(
            endpoint=endpoint,
            model=cfg.pick(args.model, "llm.model", "gpt-3.5-turbo-16k-0613"),
            temperature=cfg.pick(args.temperature, "llm.temperature", 0.0),
            max_in_flight=cfg.pick(args.max_in_flight, "llm.max_in_flight", 4),
            retry=RetryPolicy(
                max_attempts=cfg.pick(None, "llm.retry_max_attempts", 5),
                backoff_base=cfg.pick(None, "llm.backoff_base", 1.0),
                backoff_factor=cfg.pick(None, "llm.backoff_factor", 2.0),
            ),
            budget_usd=cfg.pick(args.budget_usd, "llm.budget_usd", float("inf")),
            prompt_price_per_1k=cfg.pick(None, "llm.prompt_price_per_1k", 0.003),
            completion_price_per_1k=cfg.pick(None, "llm.completion_price_per_1k", 0.004),
            timeout_s=cfg.pick(None, "llm.timeout_s", 60.0),
        )
        client = LlmClient(llm_config, log_path=args.llm_log)
        template = load_template(args.prompt_template) if args.prompt_template else DEFAULT_TEMPLATE
        budget_word_cap = cfg.pick(args.passage_words, "prompt.passage_word_budget", 120)
        llm = api_llm(client, template, budget_word_cap)
        max_in_flight = llm_config.max_in_flight

    plan = WindowPlan(
        window=cfg.pick(args.window, "window.size", 30),
        step=cfg.pick(args.step, "window.step", 30),
    )
    result = distill(
        queries, retrieve, llm,
        journal_path=args.journal,
        plan=plan,
        max_in_flight=max_in_flight,
    )
    io.save_text(args.out, io.write_distilled(result.examples))
    print(
        f"distill: {len(result.examples)} examples ({result.n_labeled} newly labeled, "
        f"{len(result.failures)} failures) -> {args.out}"
    )
    for query_id, message in result.failures:
        print(f"  failed {query_id}: {message}", file=sys.stderr)
    return 0


def _cmd_train(args, cfg: CliConfig) -> int:
    train_examples = io.load_distilled(args.train)
    val_examples = io.load_distilled(args.val) if args.val else []
    corpus = _corpus_map(args.corpus)
    feature = FeatureConfig(
        hash_dim=cfg.pick(args.hash_dim, "feature.hash_dim", 1 << 18),
        interaction_cap=cfg.pick(args.interaction_cap, "feature.interaction_cap", 16),
    )
    config = TrainConfig(
        batch_queries=cfg.pick(args.batch, "train.batch", 32),
        docs_per_query=cfg.pick(args.docs, "train.docs", 30),
        learning_rate=cfg.pick(args.lr, "train.lr", 1e-3),
        beta1=cfg.pick(None, "train.beta1", 0.9),
        beta2=cfg.pick(None, "train.beta2", 0.999),
        eps=cfg.pick(None, "train.eps", 1e-8),
        weight_decay=cfg.pick(args.weight_decay, "train.weight_decay", 0.01),
        epochs=cfg.pick(args.epochs, "train.epochs", 10),
        seed=args.seed,
        strategy=_strategy(cfg.pick(args.strategy, "train.strategy", "logit-difference")),
        kind_filter=_kind_filter(cfg.pick(args.kind, "train.kind", "mixed")),
        excluded_source=_source_or_none(cfg.pick(args.exclude_source, "train.exclude_source", "none")),
        literal_sign=bool(cfg.pick(args.literal_sign or None, "train.literal_sign", False)),
    )
    params = init_params(feature, hidden=cfg.pick(args.hidden, "feature.hidden", 64),
                         seed=args.init_seed)
    params, history = fit(config, train_examples, val_examples, corpus, params)
    save_checkpoint(params, config.strategy, args.checkpoint)
    if args.history:
        io.save_text(args.history, write_history(history))
    print(
        f"train: loss {history[0].train_loss:.4f} -> {history[-1].train_loss:.4f} "
        f"over {config.epochs} epochs; checkpoint -> {args.checkpoint}"
    )
    return 0


def _cmd_rerank(args, cfg: CliConfig) -> int:
    run = io.load_run(args.run)
    corpus = _corpus_map(args.corpus)
    k_in = cfg.pick(args.k_in, "rerank.k_in", 100)
    k_out = cfg.pick(args.k_out, "rerank.k_out", k_in)
    if args.checkpoint:
        params, ckpt_strategy = load_checkpoint(args.checkpoint)
        strategy = _strategy(args.strategy) if args.strategy else ckpt_strategy
        if not args.queries:
            raise _UsageError("reranking with a checkpoint requires --queries for query texts")
        queries = {q.query_id: q.text for q in io.load_queries(args.queries)}
        score_fn = model_score_fn(params, strategy, queries, corpus)
    elif args.external_logits:
        strategy = _strategy(args.strategy) if args.strategy else ScoreStrategy.LOGIT_DIFFERENCE
        logits = load_external_logits(_read_lines(args.external_logits))
        score_fn = external_logit_score_fn(logits, strategy)
    else:
        raise _UsageError("rerank needs --checkpoint or --external-logits")
    reranked = rerank_run(run, corpus, score_fn, k_in=k_in, k_out=k_out, tag=args.tag)
    io.save_text(args.out, io.write_run(reranked))
    print(f"rerank: {len(reranked)} queries, top {k_in} -> top {k_out} -> {args.out}")
    return 0


def _cmd_eval_ndcg(args, cfg: CliConfig) -> int:
    k = cfg.pick(args.k, "eval.k", 10)
    report = evaluate_run(io.load_run(args.run), io.load_qrels(args.qrels), k)
    if args.per_query:
        io.save_text(args.per_query, write_per_query(report))
    print(f"ndcg@{k}: {report.mean:.6f} over {report.n_queries} queries")
    return 0


def _parse_labeled_runs(pairs: list[str]) -> dict[str, Run]:
    runs: dict[str, Run] = {}
    for pair in pairs:
        label, sep, path = pair.partition("=")
        if not sep:
            raise _UsageError(f"expected label=path, got {pair!r}")
        runs[label] = io.load_run(path)
    return runs


def _cmd_eval_intersection(args, cfg: CliConfig) -> int:
    n = cfg.pick(args.n, "eval.n", 30)
    runs = _parse_labeled_runs(args.run)
    labels, upper = intersection_matrix(runs, n)
    lower = None
    if args.run_lower:
        lower_runs = _parse_labeled_runs(args.run_lower)
        lower_labels, lower = intersection_matrix(lower_runs, n)
        if lower_labels != labels:
            raise DataError("upper and lower run sets must use the same labels in the same order")
    text = format_intersection_tsv(labels, upper, lower)
    if args.out:
        io.save_text(args.out, text)
    print(text, end="")
    return 0


def _cmd_eval_ttest(args, cfg: CliConfig) -> int:
    a = _load_per_query_tsv(args.a)
    b = _load_per_query_tsv(args.b)
    p = paired_t_test(a, b)
    print(f"paired t-test two-sided p = {p:.6g}")
    return 0


_ABLATION_STRATEGIES = (ScoreStrategy.LOGIT_DIFFERENCE, ScoreStrategy.SINGLE_LOGIT)
_ABLATION_DOCS = (10, 20, 30)
_ABLATION_KINDS = (KindFilter.MIXED, KindFilter.CROPPED_ONLY, KindFilter.GENERATED_ONLY)
_ABLATION_SOURCES = (None,) + SOURCES


def _cmd_ablate(args, cfg: CliConfig) -> int:
    train_examples = io.load_distilled(args.train)
    corpus = _corpus_map(args.corpus)
    queries = {q.query_id: q.text for q in io.load_queries(args.queries)}
    qrels = io.load_qrels(args.qrels)
    base_run = io.load_run(args.base_run)
    k = cfg.pick(args.k, "eval.k", 10)
    k_in = cfg.pick(args.k_in, "rerank.k_in", 30)
    feature = FeatureConfig(
        hash_dim=cfg.pick(args.hash_dim, "feature.hash_dim", 1 << 14),
        interaction_cap=cfg.pick(args.interaction_cap, "feature.interaction_cap", 16),
    )
    hidden = cfg.pick(args.hidden, "feature.hidden", 32)

    rows = ["strategy\tdocs\tkind\texcluded_source\tndcg\tfinal_train_loss\n"]
    cells = [
        (strategy, docs, kind, source)
        for strategy in _ABLATION_STRATEGIES
        for docs in _ABLATION_DOCS
        for kind in _ABLATION_KINDS
        for source in _ABLATION_SOURCES
    ]
    for cell_no, (strategy, docs, kind, source) in enumerate(cells, 1):
        config = TrainConfig(
            batch_queries=cfg.pick(args.batch, "train.batch", 8),
            docs_per_query=docs,
            learning_rate=cfg.pick(args.lr, "train.lr", 1e-3),
            epochs=cfg.pick(args.epochs, "train.epochs", 5),
            seed=args.seed,
            strategy=strategy,
            kind_filter=kind,
            excluded_source=source,
        )
        params = init_params(feature, hidden=hidden, seed=args.init_seed)
        params, history = fit(config, train_examples, [], corpus, params)
        score_fn = model_score_fn(params, strategy, queries, corpus)
        reranked = rerank_run(base_run, corpus, score_fn, k_in=k_in, k_out=k_in, tag="ablate")
        report = evaluate_run(reranked, qrels, k)
        rows.append(
            f"{strategy.value}\t{docs}\t{kind.value}\t"
            f"{source.value if source else 'none'}\t"
            f"{report.mean:.6f}\t{history[-1].train_loss:.6f}\n"
        )
        if args.verbose:
            print(f"[{cell_no}/{len(cells)}] {rows[-1]}", end="", file=sys.stderr)
    io.save_text(args.out, "".join(rows))
    print(f"ablate: {len(cells)} cells -> {args.out}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> _Parser:
    parser = _Parser(prog="distilrank", description=__doc__)
    parser.add_argument("--config", help="key = value configuration file", default=None)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("synth", help="generate the seeded synthetic benchmark")
    p.add_argument("--topics", type=int, default=8)
    p.add_argument("--docs", type=int, default=400)
    p.add_argument("--train-queries", type=int, default=64)
    p.add_argument("--eval-queries", type=int, default=16)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_synth)

    p_index = sub.add_parser("index", help="inverted index operations")
    sub_index = p_index.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    p = sub_index.add_parser("build", help="build and save a BM25 index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k1", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.set_defaults(func=_cmd_index_build)

    p = sub.add_parser("retrieve", help="run a first-stage retriever over queries")
    p.add_argument("--method", choices=["bm25", "dense", "runfile"], required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--tag", default=None)
    p.add_argument("--index", help="bm25: saved index file")
    p.add_argument("--store", help="dense: document vectors jsonl")
    p.add_argument("--query-vectors", help="dense: query vectors jsonl (doc_id field holds the query_id)")
    p.add_argument("--run", help="runfile: precomputed TREC run")
    p.set_defaults(func=_cmd_retrieve)

    p_augment = sub.add_parser("augment", help="build training queries")
    sub_augment = p_augment.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    p = sub_augment.add_parser("crop", help="crop sentences from the corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--min-tokens", type=int, default=None)
    p.add_argument("--max-tokens", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_augment_crop)
    p = sub_augment.add_parser("load-generated", help="sample from a generated-query pool")
    p.add_argument("--pool", required=True, help="TSV doc_id<TAB>query_text")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_augment_load_generated)

    p = sub.add_parser("assign-sources", help="deal queries round-robin across the four sources")
    p.add_argument("--queries", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_assign_sources)

    p = sub.add_parser("distill", help="label pooled documents with the teacher")
    p.add_argument("--queries", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--assignment", help="TSV query_id<TAB>source; default assigns BM25")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--bm25-index")
    p.add_argument("--run-splade")
    p.add_argument("--run-dragon")
    p.add_argument("--run-monot5")
    p.add_argument("--monot5-scores", help="TSV qid/docid/score to compose BM25+scorer on the fly")
    p.add_argument("--k-pool", type=int, default=None, help="BM25 pool for --monot5-scores")
    p.add_argument("--mock-qrels", help="use the deterministic oracle teacher over these qrels")
    p.add_argument("--endpoint", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--max-in-flight", type=int, default=None)
    p.add_argument("--budget-usd", type=float, default=None)
    p.add_argument("--prompt-template", help="JSON template file")
    p.add_argument("--passage-words", type=int, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--step", type=int, default=None)
    p.add_argument("--journal", help="resumable completion journal")
    p.add_argument("--llm-log", help="request/response log file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_distill)

    p = sub.add_parser("split", help="stratified train/validation split")
    p.add_argument("--distilled", required=True)
    p.add_argument("--n-val", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-val", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("train", help="train the scorer with RankNet + AdamW")
    p.add_argument("--train", required=True)
    p.add_argument("--val")
    p.add_argument("--corpus", required=True)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--docs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--weight-decay", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--strategy", default=None)
    p.add_argument("--kind", default=None)
    p.add_argument("--exclude-source", default=None)
    p.add_argument("--literal-sign", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-seed", type=int, default=0)
    p.add_argument("--hash-dim", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--interaction-cap", type=int, default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--history")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("rerank", help="rerank a run with a checkpoint or external logits")
    p.add_argument("--run", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", help="query texts (needed with --checkpoint)")
    p.add_argument("--checkpoint")
    p.add_argument("--external-logits")
    p.add_argument("--strategy", default=None)
    p.add_argument("--k-in", type=int, default=None)
    p.add_argument("--k-out", type=int, default=None)
    p.add_argument("--tag", default="reranked")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_rerank)

    p_eval = sub.add_parser("eval", help="evaluation statistics")
    sub_eval = p_eval.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    p = sub_eval.add_parser("ndcg", help="nDCG@k of a run against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--per-query", help="write per-query TSV here")
    p.set_defaults(func=_cmd_eval_ndcg)
    p = sub_eval.add_parser("intersection", help="pairwise top-n intersection rates")
    p.add_argument("--run", action="append", required=True, metavar="LABEL=PATH")
    p.add_argument("--run-lower", action="append", metavar="LABEL=PATH",
                   help="second query kind for the lower triangle")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval_intersection)
    p = sub_eval.add_parser("ttest", help="two-sided paired t-test over per-query TSVs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=_cmd_eval_ttest)

    p = sub.add_parser("ablate", help="train/evaluate the full ablation grid")
    p.add_argument("--train", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True, help="evaluation queries")
    p.add_argument("--qrels", required=True)
    p.add_argument("--base-run", required=True, help="first-stage run to rerank")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--k-in", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--hash-dim", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--interaction-cap", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-seed", type=int, default=0)
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ablate)

    return parser


def dispatch(argv: list[str] | None = None) -> int:
    """Run one subcommand; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    if not getattr(args, "func", None):
        parser.print_help()
        return 1
    try:
        cfg = CliConfig.load(args.config)
        return args.func(args, cfg)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (BudgetError, TransportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
