import math

import numpy as np
import pytest

from distilrank.errors import DataError
from distilrank.scorer import FeatureConfig, ScoreStrategy, init_params
from distilrank.training import (
    AdamState,
    HistoryRow,
    KindFilter,
    PreparedExample,
    TrainConfig,
    adamw_step,
    batch_loss,
    batch_loss_and_grads,
    filter_examples,
    fit,
    init_adam_state,
    ranknet_grad,
    ranknet_loss,
    subsample_docs,
    write_history,
)
from distilrank.types import DistilledExample, QueryKind, Source


class TestRanknetLoss:
    def test_equal_scores_gives_pairs_times_ln2(self):
        assert ranknet_loss([1.0, 1.0, 1.0], [1, 2, 3]) == pytest.approx(3 * math.log(2))

    def test_two_doc_fixture(self):
        # single pair, margin 2 in the right direction
        assert ranknet_loss([2.0, 0.0], [1, 2]) == pytest.approx(
            math.log(1 + math.exp(-2)), abs=1e-12
        )

    def test_softplus_linear_regime_no_overflow(self):
        # wrong direction with margin 100: softplus(100) ~ 100, finite
        loss = ranknet_loss([-50.0, 50.0], [1, 2])
        assert loss == pytest.approx(100.0, abs=1e-10)

    def test_translation_invariance(self):
        rng = np.random.default_rng(0)
        s = rng.normal(size=10)
        r = list(rng.permutation(10) + 1)
        assert ranknet_loss(s + 123.456, r) == pytest.approx(ranknet_loss(s, r), rel=1e-12)

    def test_inverted_order_costs_more(self):
        s = [3.0, 2.0, 1.0]
        assert ranknet_loss(s, [3, 2, 1]) > ranknet_loss(s, [1, 2, 3])

    def test_literal_sign_variant_mirrors(self):
        s = [2.0, 0.0]
        assert ranknet_loss(s, [1, 2], literal_sign=True) == pytest.approx(
            math.log(1 + math.exp(2))
        )

    def test_non_permutation_rejected(self):
        with pytest.raises(ValueError):
            ranknet_loss([1.0, 2.0], [1, 1])

    def test_non_finite_scores_rejected(self):
        with pytest.raises(ValueError):
            ranknet_loss([float("nan"), 1.0], [1, 2])


class TestRanknetGrad:
    def test_two_doc_symmetric_point(self):
        np.testing.assert_allclose(ranknet_grad([0.0, 0.0], [1, 2]), [-0.5, 0.5])

    def test_gradient_sums_to_zero(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            m = int(rng.integers(2, 31))
            s = rng.normal(size=m) * 5
            r = list(rng.permutation(m) + 1)
            assert abs(ranknet_grad(s, r).sum()) < 1e-12

    @pytest.mark.parametrize("literal_sign", [False, True])
    def test_matches_central_finite_differences(self, literal_sign):
        rng = np.random.default_rng(2)
        h = 1e-5
        for _ in range(30):
            m = int(rng.integers(2, 31))
            s = rng.normal(size=m) * 3
            r = list(rng.permutation(m) + 1)
            grad = ranknet_grad(s, r, literal_sign)
            for k in rng.choice(m, size=min(m, 5), replace=False):
                bumped = s.copy()
                bumped[k] += h
                up = ranknet_loss(bumped, r, literal_sign)
                bumped[k] -= 2 * h
                down = ranknet_loss(bumped, r, literal_sign)
                fd = (up - down) / (2 * h)
                assert grad[k] == pytest.approx(fd, rel=1e-6, abs=1e-9)


class TestAdamW:
    def test_zero_grad_zero_decay_is_noop(self):
        theta = [np.array([1.0, -2.0, 3.0])]
        state = init_adam_state(theta)
        config = TrainConfig(weight_decay=0.0)
        adamw_step(theta, [np.zeros(3)], state, config)
        np.testing.assert_array_equal(theta[0], [1.0, -2.0, 3.0])
        assert state.t == 1

    def test_first_step_sign_property(self):
        for g in (0.5, -3.0, 1e-3):
            theta = [np.array([0.0])]
            config = TrainConfig(learning_rate=0.01, weight_decay=0.0)
            adamw_step(theta, [np.array([g])], init_adam_state(theta), config)
            expected = -config.learning_rate * g / (abs(g) + config.eps)
            assert theta[0][0] == pytest.approx(expected, rel=1e-9)

    def test_decoupled_decay_scales_theta(self):
        theta = [np.array([2.0])]
        config = TrainConfig(learning_rate=0.1, weight_decay=0.5)
        adamw_step(theta, [np.zeros(1)], init_adam_state(theta), config)
        assert theta[0][0] == pytest.approx(2.0 * (1 - 0.1 * 0.5), abs=0.0)

    def test_non_finite_grad_rejected(self):
        theta = [np.array([1.0])]
        with pytest.raises(DataError):
            adamw_step(theta, [np.array([np.inf])], init_adam_state(theta), TrainConfig())


def make_example(qid="q1", m=3, ranking=(2, 3, 1), kind=QueryKind.CROPPED, source=Source.BM25):
    return DistilledExample(
        query_id=qid,
        query_text=f"query text {qid}",
        kind=kind,
        source_retriever=source,
        doc_ids=tuple(f"{qid}-d{i}" for i in range(m)),
        llm_ranking=tuple(ranking),
    )


class TestSubsample:
    def test_identity_when_m_prime_equals_m(self):
        ex = make_example()
        assert subsample_docs(ex, 3, seed=0) is ex

    def test_relative_order_preserved(self):
        # keep positions {0, 2} of r=(2,3,1): survivors re-rank to (2,1)
        ex = make_example(ranking=(2, 3, 1))
        found = False
        for seed in range(50):
            sub = subsample_docs(ex, 2, seed)
            if sub.doc_ids == (ex.doc_ids[0], ex.doc_ids[2]):
                assert sub.llm_ranking == (2, 1)
                found = True
        assert found

    def test_always_a_permutation(self):
        ex = make_example(m=10, ranking=tuple(np.random.default_rng(3).permutation(10) + 1))
        for seed in range(20):
            sub = subsample_docs(ex, 4, seed)
            assert sorted(sub.llm_ranking) == [1, 2, 3, 4]

    def test_m_prime_too_large(self):
        with pytest.raises(ValueError):
            subsample_docs(make_example(), 4, seed=0)

    def test_deterministic(self):
        ex = make_example(m=10, ranking=tuple(range(10, 0, -1)))
        assert subsample_docs(ex, 5, seed=7) == subsample_docs(ex, 5, seed=7)


def tiny_feature():
    return FeatureConfig(hash_dim=1 << 10, interaction_cap=4)


def prepared_batch(params, rng, n_examples=3, m=5):
    from distilrank.scorer import featurize

    batch = []
    vocab = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta"]
    for e in range(n_examples):
        query = " ".join(rng.choice(vocab, size=3))
        features = [
            featurize(query, " ".join(rng.choice(vocab, size=6)), params.feature)
            for _ in range(m)
        ]
        ranking = np.asarray(rng.permutation(m) + 1)
        batch.append(PreparedExample(f"q{e}", features, ranking))
    return batch


class TestBatchGradients:
    @pytest.mark.parametrize(
        "strategy",
        [ScoreStrategy.LOGIT_DIFFERENCE, ScoreStrategy.SINGLE_LOGIT, ScoreStrategy.SOFTMAX_TRUE_FALSE],
    )
    def test_parameter_gradients_match_finite_differences(self, strategy):
        rng = np.random.default_rng(11)
        params = init_params(tiny_feature(), hidden=8, seed=4)
        batch = prepared_batch(params, rng)
        loss, grads = batch_loss_and_grads(params, batch, strategy)
        assert np.isfinite(loss)
        h = 1e-5
        arrays = params.arrays()
        checked = 0
        for arr, grad in zip(arrays, grads):
            flat = arr.reshape(-1)
            gflat = grad.reshape(-1)
            # check every coordinate the batch actually touches, up to 100 per array
            touched = np.nonzero(gflat)[0]
            coords = touched if touched.size <= 100 else rng.choice(touched, 100, replace=False)
            for idx in coords:
                orig = flat[idx]
                flat[idx] = orig + h
                up = batch_loss(params, batch, strategy)
                flat[idx] = orig - h
                down = batch_loss(params, batch, strategy)
                flat[idx] = orig
                fd = (up - down) / (2 * h)
                assert gflat[idx] == pytest.approx(fd, rel=1e-4, abs=1e-8)
                checked += 1
        assert checked >= 100


def tiny_corpus_and_examples(n=12, m=4):
    rng = np.random.default_rng(5)
    vocab = ["red", "green", "blue", "cyan", "magenta", "yellow", "black", "white"]
    corpus = {}
    examples = []
    for i in range(n):
        doc_ids = []
        for j in range(m):
            doc_id = f"q{i}-d{j}"
            corpus[doc_id] = " ".join(rng.choice(vocab, size=8))
            doc_ids.append(doc_id)
        kind = QueryKind.CROPPED if i % 2 == 0 else QueryKind.GENERATED
        source = list(Source)[i % 4]
        examples.append(
            DistilledExample(
                query_id=f"q{i:03d}",
                query_text=" ".join(rng.choice(vocab, size=3)),
                kind=kind,
                source_retriever=source,
                doc_ids=tuple(doc_ids),
                llm_ranking=tuple(rng.permutation(m) + 1),
            )
        )
    return corpus, examples


class TestFit:
    def test_zero_epochs_returns_params_unchanged(self):
        corpus, examples = tiny_corpus_and_examples()
        params = init_params(tiny_feature(), hidden=8, seed=0)
        before = [a.copy() for a in params.arrays()]
        params, history = fit(
            TrainConfig(epochs=0, batch_queries=4, docs_per_query=4),
            examples, [], corpus, params,
        )
        for a, b in zip(params.arrays(), before):
            np.testing.assert_array_equal(a, b)
        assert len(history) == 1 and history[0].epoch == 0

    def test_identical_history_for_identical_seed(self):
        corpus, examples = tiny_corpus_and_examples()
        config = TrainConfig(epochs=3, batch_queries=4, docs_per_query=4, seed=9)
        runs = []
        for _ in range(2):
            params = init_params(tiny_feature(), hidden=8, seed=0)
            _, history = fit(config, examples, examples[:4], corpus, params)
            runs.append(history)
        assert runs[0] == runs[1]  # bitwise-identical floats

    def test_validation_set_does_not_perturb_training(self):
        corpus, examples = tiny_corpus_and_examples()
        config = TrainConfig(epochs=2, batch_queries=4, docs_per_query=4, seed=9)
        trained = []
        for val in ([], examples[:4]):
            params = init_params(tiny_feature(), hidden=8, seed=0)
            params, history = fit(config, examples, val, corpus, params)
            trained.append((params, history))
        np.testing.assert_array_equal(trained[0][0].w1, trained[1][0].w1)
        assert [h.train_loss for h in trained[0][1]] == [h.train_loss for h in trained[1][1]]

    @pytest.mark.parametrize(
        "strategy", [ScoreStrategy.LOGIT_DIFFERENCE, ScoreStrategy.SOFTMAX_TRUE_FALSE]
    )
    def test_both_strategies_terminate_finite(self, strategy):
        corpus, examples = tiny_corpus_and_examples()
        params = init_params(tiny_feature(), hidden=8, seed=0)
        _, history = fit(
            TrainConfig(epochs=2, batch_queries=4, docs_per_query=4, strategy=strategy),
            examples, [], corpus, params,
        )
        assert all(np.isfinite(row.train_loss) for row in history)

    def test_kind_filter_and_source_exclusion(self):
        _, examples = tiny_corpus_and_examples()
        cropped = filter_examples(examples, KindFilter.CROPPED_ONLY, None)
        assert all(ex.kind is QueryKind.CROPPED for ex in cropped)
        without_bm25 = filter_examples(examples, KindFilter.MIXED, Source.BM25)
        assert all(ex.source_retriever is not Source.BM25 for ex in without_bm25)

    def test_empty_filtered_set_rejected(self):
        corpus, examples = tiny_corpus_and_examples()
        only_cropped = [ex for ex in examples if ex.kind is QueryKind.CROPPED]
        params = init_params(tiny_feature(), hidden=8, seed=0)
        with pytest.raises(DataError):
            fit(
                TrainConfig(kind_filter=KindFilter.GENERATED_ONLY),
                only_cropped, [], corpus, params,
            )

    def test_missing_document_named(self):
        corpus, examples = tiny_corpus_and_examples()
        del corpus[examples[0].doc_ids[0]]
        params = init_params(tiny_feature(), hidden=8, seed=0)
        with pytest.raises(DataError, match=examples[0].doc_ids[0]):
            fit(TrainConfig(epochs=1, docs_per_query=4), examples, [], corpus, params)


def test_history_tsv_format():
    rows = [HistoryRow(0, 1.5, 2.0), HistoryRow(1, 1.0, float("nan"))]
    text = write_history(rows)
    lines = text.splitlines()
    assert lines[0] == "epoch\ttrain_loss\tval_loss"
    assert lines[1] == "0\t1.500000\t2.000000"
