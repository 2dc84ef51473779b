import json

import pytest

from distilrank import io
from distilrank.cli import dispatch
from distilrank.config import CliConfig
from distilrank.errors import DataError


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """A small synthetic workspace produced entirely through the CLI."""
    root = tmp_path_factory.mktemp("cli")
    assert dispatch([
        "synth", "--topics", "4", "--docs", "80", "--train-queries", "16",
        "--eval-queries", "8", "--seed", "3", "--out-dir", str(root),
    ]) == 0
    assert dispatch([
        "index", "build", "--corpus", str(root / "corpus.jsonl"),
        "--out", str(root / "index.json"),
    ]) == 0
    return root


class TestConfigFile:
    def test_parse_and_pick(self):
        cfg = CliConfig.parse(["# comment\n", "bm25.k1 = 1.2\n", "train.epochs = 3\n"])
        assert cfg.pick(None, "bm25.k1", 0.9) == 1.2
        assert cfg.pick(2.0, "bm25.k1", 0.9) == 2.0  # flag wins
        assert cfg.pick(None, "train.epochs", 10) == 3

    def test_unknown_key_rejected(self):
        with pytest.raises(DataError, match="unknown key"):
            CliConfig.parse(["no.such.key = 1\n"])

    def test_bad_value_rejected(self):
        with pytest.raises(DataError, match="expected int"):
            CliConfig.parse(["train.epochs = soon\n"])


class TestDispatchBasics:
    def test_unknown_subcommand_exits_1(self, capsys):
        assert dispatch(["frobnicate"]) == 1

    def test_no_command_prints_help(self, capsys):
        assert dispatch([]) == 1
        assert "COMMAND" in capsys.readouterr().out

    def test_missing_required_flag_exits_1(self):
        assert dispatch(["index", "build", "--corpus", "x.jsonl"]) == 1

    def test_data_error_exits_2(self, tmp_path):
        bad = tmp_path / "corpus.jsonl"
        bad.write_text("{not json\n")
        assert dispatch([
            "index", "build", "--corpus", str(bad), "--out", str(tmp_path / "i.json"),
        ]) == 2

    def test_missing_file_exits_2(self, tmp_path):
        assert dispatch([
            "index", "build", "--corpus", str(tmp_path / "absent.jsonl"),
            "--out", str(tmp_path / "i.json"),
        ]) == 2

    def test_help_lists_defaults(self, capsys):
        with pytest.raises(SystemExit) as exc:
            dispatch(["retrieve", "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        assert "--method" in out and "default" in out

    def test_budget_zero_distill_exits_3(self, workdir, tmp_path, capsys):
        # live endpoint configured but a zero budget: nothing may be sent
        code = dispatch([
            "distill",
            "--queries", str(workdir / "queries-train.tsv"),
            "--corpus", str(workdir / "corpus.jsonl"),
            "--bm25-index", str(workdir / "index.json"),
            "--endpoint", "http://127.0.0.1:1/never-contacted",
            "--budget-usd", "0",
            "--out", str(tmp_path / "d.jsonl"),
        ])
        assert code == 3


class TestPipelineThroughCli(object):
    def test_full_flow(self, workdir, tmp_path, capsys):
        run_train = tmp_path / "train.trec"
        run_eval = tmp_path / "eval.trec"
        assert dispatch([
            "retrieve", "--method", "bm25", "--index", str(workdir / "index.json"),
            "--queries", str(workdir / "queries-train.tsv"),
            "--k", "10", "--out", str(run_train),
        ]) == 0
        assert dispatch([
            "retrieve", "--method", "bm25", "--index", str(workdir / "index.json"),
            "--queries", str(workdir / "queries-eval.tsv"),
            "--k", "10", "--out", str(run_eval),
        ]) == 0

        assignment = tmp_path / "sources.tsv"
        assert dispatch([
            "assign-sources", "--queries", str(workdir / "queries-train.tsv"),
            "--seed", "1", "--out", str(assignment),
        ]) == 0

        distilled = tmp_path / "distilled.jsonl"
        assert dispatch([
            "distill",
            "--queries", str(workdir / "queries-train.tsv"),
            "--corpus", str(workdir / "corpus.jsonl"),
            "--bm25-index", str(workdir / "index.json"),
            "--mock-qrels", str(workdir / "qrels-train.txt"),
            "--k", "10",
            "--journal", str(tmp_path / "journal.log"),
            "--out", str(distilled),
        ]) == 0
        examples = io.load_distilled(distilled)
        assert len(examples) == 16

        out_train = tmp_path / "part-train.jsonl"
        out_val = tmp_path / "part-val.jsonl"
        assert dispatch([
            "split", "--distilled", str(distilled), "--n-val", "4", "--seed", "0",
            "--out-train", str(out_train), "--out-val", str(out_val),
        ]) == 0
        assert len(io.load_distilled(out_val)) == 4

        ckpt = tmp_path / "scorer.ckpt"
        history = tmp_path / "history.tsv"
        assert dispatch([
            "train", "--train", str(distilled), "--val", str(out_val),
            "--corpus", str(workdir / "corpus.jsonl"),
            "--epochs", "4", "--batch", "4", "--docs", "10",
            "--hash-dim", "4096", "--hidden", "16",
            "--checkpoint", str(ckpt), "--history", str(history),
        ]) == 0
        assert history.read_text().startswith("epoch\ttrain_loss\tval_loss")

        reranked = tmp_path / "reranked.trec"
        assert dispatch([
            "rerank", "--run", str(run_eval), "--corpus", str(workdir / "corpus.jsonl"),
            "--queries", str(workdir / "queries-eval.tsv"),
            "--checkpoint", str(ckpt), "--k-in", "10", "--k-out", "10",
            "--out", str(reranked),
        ]) == 0

        per_query = tmp_path / "perq.tsv"
        assert dispatch([
            "eval", "ndcg", "--run", str(reranked), "--qrels", str(workdir / "qrels-eval.txt"),
            "--k", "10", "--per-query", str(per_query),
        ]) == 0
        out = capsys.readouterr().out
        assert "ndcg@10" in out
        assert len(per_query.read_text().splitlines()) == 8

        assert dispatch([
            "eval", "intersection",
            "--run", f"bm25={run_eval}", "--run", f"rerank={reranked}",
            "--n", "10", "--out", str(tmp_path / "matrix.tsv"),
        ]) == 0

        assert dispatch([
            "eval", "ttest", "--a", str(per_query), "--b", str(per_query),
        ]) == 0
        assert "p = 1" in capsys.readouterr().out

    def test_augment_commands(self, workdir, tmp_path):
        crops = tmp_path / "crops.tsv"
        assert dispatch([
            "augment", "crop", "--corpus", str(workdir / "corpus.jsonl"),
            "--n", "12", "--seed", "5", "--out", str(crops),
        ]) == 0
        queries = io.load_queries(crops)
        assert len(queries) == 12

        generated = tmp_path / "gen.tsv"
        assert dispatch([
            "augment", "load-generated", "--pool", str(workdir / "genpool.tsv"),
            "--n", "9", "--seed", "5", "--out", str(generated),
        ]) == 0
        assert len(io.load_queries(generated)) == 9

    def test_rerank_with_external_logits(self, workdir, tmp_path):
        run_eval = tmp_path / "eval2.trec"
        assert dispatch([
            "retrieve", "--method", "bm25", "--index", str(workdir / "index.json"),
            "--queries", str(workdir / "queries-eval.tsv"),
            "--k", "5", "--out", str(run_eval),
        ]) == 0
        run = io.load_run(run_eval)
        logit_lines = []
        for qid, entries in run.items():
            for e in entries:
                rel = 1.0 if e.doc_id.endswith("1") else 0.0
                logit_lines.append(f"{qid}\t{e.doc_id}\t{rel}\t0.0\n")
        logits = tmp_path / "logits.tsv"
        logits.write_text("".join(logit_lines))
        out = tmp_path / "ext.trec"
        assert dispatch([
            "rerank", "--run", str(run_eval), "--corpus", str(workdir / "corpus.jsonl"),
            "--external-logits", str(logits), "--k-in", "5", "--out", str(out),
        ]) == 0
        assert io.load_run(out)

    def test_retrieve_dense_and_runfile(self, workdir, tmp_path):
        # dense: one-hot vectors make scores predictable
        store = tmp_path / "store.jsonl"
        qvecs = tmp_path / "qvecs.jsonl"
        store.write_text(
            json.dumps({"doc_id": "d1", "vector": [1.0, 0.0]}) + "\n"
            + json.dumps({"doc_id": "d2", "vector": [0.0, 1.0]}) + "\n"
        )
        queries = tmp_path / "q.tsv"
        queries.write_text("qa\tsome text\tcropped\n")
        qvecs.write_text(json.dumps({"doc_id": "qa", "vector": [1.0, 0.0]}) + "\n")
        out = tmp_path / "dense.trec"
        assert dispatch([
            "retrieve", "--method", "dense", "--store", str(store),
            "--query-vectors", str(qvecs), "--queries", str(queries),
            "--k", "2", "--out", str(out),
        ]) == 0
        run = io.load_run(out)
        assert run["qa"][0].doc_id == "d1"

        out2 = tmp_path / "runfile.trec"
        assert dispatch([
            "retrieve", "--method", "runfile", "--run", str(out),
            "--queries", str(queries), "--k", "1", "--out", str(out2),
        ]) == 0
        assert len(io.load_run(out2)["qa"]) == 1

    def test_distill_with_four_source_backends(self, workdir, tmp_path):
        from distilrank.augment import parse_assignment
        from distilrank.retrieval import load_index, search_bm25
        from distilrank.types import Source

        assignment_path = tmp_path / "sources.tsv"
        assert dispatch([
            "assign-sources", "--queries", str(workdir / "queries-train.tsv"),
            "--seed", "2", "--out", str(assignment_path),
        ]) == 0
        assignment = parse_assignment(assignment_path.read_text().splitlines(keepends=True))

        # one run file reused for the two external retrievers
        run_path = tmp_path / "external.trec"
        assert dispatch([
            "retrieve", "--method", "bm25", "--index", str(workdir / "index.json"),
            "--queries", str(workdir / "queries-train.tsv"), "--k", "10",
            "--out", str(run_path),
        ]) == 0

        # a score map over the BM25 top-20 pool of every MonoT5-assigned query
        index = load_index(workdir / "index.json")
        queries = io.load_queries(workdir / "queries-train.tsv")
        score_lines = []
        for q in queries:
            if assignment[q.query_id] is Source.MONOT5:
                for hit in search_bm25(index, q.text, 20):
                    score_lines.append(f"{q.query_id}\t{hit.doc_id}\t{-len(hit.doc_id)}\n")
        scores_path = tmp_path / "monot5-scores.tsv"
        scores_path.write_text("".join(score_lines))

        out = tmp_path / "d4.jsonl"
        assert dispatch([
            "distill",
            "--queries", str(workdir / "queries-train.tsv"),
            "--corpus", str(workdir / "corpus.jsonl"),
            "--assignment", str(assignment_path),
            "--bm25-index", str(workdir / "index.json"),
            "--run-splade", str(run_path),
            "--run-dragon", str(run_path),
            "--monot5-scores", str(scores_path), "--k-pool", "20",
            "--mock-qrels", str(workdir / "qrels-train.txt"),
            "--k", "10",
            "--out", str(out),
        ]) == 0
        examples = io.load_distilled(out)
        assert {ex.source_retriever for ex in examples} == set(Source)
        for ex in examples:
            assert ex.source_retriever is assignment[ex.query_id]

    def test_assigned_source_without_backend_is_recorded_failure(self, workdir, tmp_path, capsys):
        assignment_path = tmp_path / "sources.tsv"
        assert dispatch([
            "assign-sources", "--queries", str(workdir / "queries-train.tsv"),
            "--seed", "2", "--out", str(assignment_path),
        ]) == 0
        out = tmp_path / "partial.jsonl"
        assert dispatch([
            "distill",
            "--queries", str(workdir / "queries-train.tsv"),
            "--corpus", str(workdir / "corpus.jsonl"),
            "--assignment", str(assignment_path),
            "--bm25-index", str(workdir / "index.json"),
            "--mock-qrels", str(workdir / "qrels-train.txt"),
            "--k", "10",
            "--out", str(out),
        ]) == 0
        # only the BM25-assigned quarter could be labeled; the rest are failures
        examples = io.load_distilled(out)
        assert 0 < len(examples) < 16
        err = capsys.readouterr().err
        assert "failed" in err

    def test_intersection_two_kind_layout(self, workdir, tmp_path, capsys):
        run_a = tmp_path / "a.trec"
        run_b = tmp_path / "b.trec"
        for path, k in [(run_a, 5), (run_b, 8)]:
            assert dispatch([
                "retrieve", "--method", "bm25", "--index", str(workdir / "index.json"),
                "--queries", str(workdir / "queries-eval.tsv"),
                "--k", str(k), "--out", str(path),
            ]) == 0
        assert dispatch([
            "eval", "intersection",
            "--run", f"x={run_a}", "--run", f"y={run_b}",
            "--run-lower", f"x={run_b}", "--run-lower", f"y={run_a}",
            "--n", "5",
        ]) == 0
        out = capsys.readouterr().out
        assert "\tx\ty" in out.splitlines()

    def test_config_file_supplies_defaults(self, workdir, tmp_path):
        cfg = tmp_path / "distilrank.cfg"
        cfg.write_text("retrieve.k = 3\n")
        out = tmp_path / "k3.trec"
        assert dispatch([
            "--config", str(cfg),
            "retrieve", "--method", "bm25", "--index", str(workdir / "index.json"),
            "--queries", str(workdir / "queries-eval.tsv"), "--out", str(out),
        ]) == 0
        run = io.load_run(out)
        assert all(len(entries) <= 3 for entries in run.values())
