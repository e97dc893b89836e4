from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import confusion
from painclf.classifiers import Prediction
from painclf.corpus_io import Document
from painclf.errors import CorpusError, EvaluationError
from painclf.evaluation import (
    SplitSpec,
    compute_metrics,
    dumps_report,
    error_report,
    f1_score,
    holdout_evaluate,
    kfold_cv,
    largest_remainder,
    load_predictions,
    metrics_report,
    stratified_folds,
    stratified_split,
    t_interval,
    write_predictions,
)
from painclf.features import preprocess
from painclf.lexicon import default_lexicon
from painclf.pipeline import PipelineConfig
from painclf.spans import extract_spans


def _preds(labels, scores=None):
    scores = scores or [float(v) for v in labels]
    return [Prediction(f"s{i}", lab, sc) for i, (lab, sc) in enumerate(zip(labels, scores))]


def _gold(labels):
    return {f"s{i}": g for i, g in enumerate(labels)}


def test_split_example():
    labels = [1] * 71 + [0] * 29
    train, test, val = stratified_split(labels, SplitSpec(seed=4))
    assert (len(train), len(test), len(val)) == (80, 10, 10)
    assert [sum(labels[i] for i in part) for part in (train, test, val)] == [57, 7, 7]
    assert sorted(train + test + val) == list(range(100))
    assert stratified_split(labels, SplitSpec(seed=4)) == (train, test, val)
    assert stratified_split(labels, SplitSpec(seed=5)) != (train, test, val)


def test_split_errors():
    with pytest.raises(EvaluationError):
        stratified_split([1, 0, 1, 0, 1], SplitSpec())
    with pytest.raises(EvaluationError):
        stratified_split([1] * 20, SplitSpec())
    with pytest.raises(EvaluationError):
        SplitSpec(fractions=(0.8, 0.1, 0.2))
    with pytest.raises(EvaluationError):
        SplitSpec(fractions=(1.0, 0.0, 0.0))


def test_largest_remainder():
    assert largest_remainder(71, (0.8, 0.1, 0.1)) == [57, 7, 7]
    assert largest_remainder(29, (0.8, 0.1, 0.1)) == [23, 3, 3]
    assert largest_remainder(10, (1 / 3, 1 / 3, 1 / 3)) == [4, 3, 3]


@given(st.integers(5, 200), st.integers(5, 200), st.integers(0, 10_000))
def test_split_per_class_within_one_item(n_pos, n_neg, seed):
    labels = [1] * n_pos + [0] * n_neg
    parts = stratified_split(labels, SplitSpec(seed=seed))
    assert sorted(i for p in parts for i in p) == list(range(len(labels)))
    for cls, n in ((1, n_pos), (0, n_neg)):
        for part, frac in zip(parts, (0.8, 0.1, 0.1)):
            got = sum(1 for i in part if labels[i] == cls)
            assert abs(got - n * frac) < 1 + 1e-9


@given(st.integers(10, 120), st.integers(10, 120), st.integers(2, 10), st.integers(0, 999))
def test_folds_partition_and_balance(n_pos, n_neg, k, seed):
    labels = [1] * n_pos + [0] * n_neg
    folds = stratified_folds(labels, k, seed)
    assert len(folds) == k
    assert sorted(i for f in folds for i in f) == list(range(len(labels)))
    for cls, n in ((1, n_pos), (0, n_neg)):
        for f in folds:
            assert abs(sum(1 for i in f if labels[i] == cls) - n / k) < 1
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1


def test_folds_errors():
    with pytest.raises(EvaluationError):
        stratified_folds([1] * 20 + [0] * 9, 10, 0)
    with pytest.raises(EvaluationError):
        stratified_folds([1, 0] * 10, 1, 0)


def test_metrics_examples():
    m = compute_metrics(_preds([1, 1, 1]), _gold([1, 1, 0]))
    assert (m.tp, m.fp, m.fn) == (2, 1, 0)
    assert m.precision == pytest.approx(2 / 3) and m.recall == 1.0 and m.f1 == pytest.approx(0.8, abs=1e-15)
    assert f1_score(0.98, 0.99) == pytest.approx(2 * 0.98 * 0.99 / 1.97, abs=1e-15)
    assert abs(f1_score(0.98, 0.99) - 0.985) < 0.001
    zero = compute_metrics(_preds([0, 0]), _gold([0, 0]))
    assert (zero.precision, zero.recall, zero.f1) == (0.0, 0.0, 0.0)
    assert f1_score(0.0, 0.0) == 0.0


def test_metrics_errors():
    with pytest.raises(EvaluationError):
        compute_metrics([], {})
    with pytest.raises(EvaluationError, match="'s1'"):
        compute_metrics(_preds([1, 0]), {"s0": 1})


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=80))
def test_metrics_match_confusion_oracle(pairs):
    pred = [p for p, _ in pairs]
    gold = [g for _, g in pairs]
    m = compute_metrics(_preds(pred), _gold(gold))
    assert (m.tp, m.fp, m.fn, m.tn) == confusion(pred, gold)
    assert 0 <= m.precision <= 1 and 0 <= m.recall <= 1 and 0 <= m.f1 <= 1


def test_t_interval_examples():
    assert t_interval([0.9] * 10) == (0.9, 0.9, 0.9)
    mean, lo, hi = t_interval([0.8, 1.0])
    assert mean == pytest.approx(0.9)
    # Unclipped half-width is 12.706 * 0.14142 / sqrt(2) ~ 1.27.
    assert (lo, hi) == (0.0, 1.0)
    with pytest.raises(EvaluationError):
        t_interval([0.5])


def test_t_interval_hand_value():
    scores = [0.90, 0.92, 0.88, 0.91, 0.89]
    mean = sum(scores) / 5
    s = math.sqrt(sum((x - mean) ** 2 for x in scores) / 4)
    half = 2.7764451051977987 * s / math.sqrt(5)  # t(0.975, 4)
    m, lo, hi = t_interval(scores)
    assert m == pytest.approx(mean, abs=1e-15)
    assert (lo, hi) == pytest.approx((mean - half, mean + half), abs=1e-12)


@given(st.lists(st.floats(0.5, 1.0), min_size=3, max_size=10), st.floats(0.05, 0.95))
def test_ci_shrinks_with_variance(scores, shrink):
    m, lo, hi = t_interval(scores)
    assert lo <= m <= hi
    centre = sum(scores) / len(scores)
    tighter = [centre + shrink * (x - centre) for x in scores]
    _, lo2, hi2 = t_interval(tighter)
    assert hi2 - lo2 <= hi - lo + 1e-12


def test_kfold_no_leakage_and_partition(small_examples):
    config = PipelineConfig()
    tokens = [set(preprocess(e.text, config.preprocess)) for e in small_examples]
    seen_test = []

    def audit(i, train_idx, test_idx, clf):
        assert not set(train_idx) & set(test_idx)
        train_vocab = set().union(*(tokens[j] for j in train_idx))
        assert set(clf.tfidf.terms) == train_vocab
        held_only = set().union(*(tokens[j] for j in test_idx)) - train_vocab
        assert not held_only & set(clf.tfidf.terms)
        seen_test.extend(test_idx)

    result = kfold_cv(config, small_examples, k=5, seed=2, on_fold=audit)
    assert sorted(seen_test) == list(range(len(small_examples)))
    assert result.k == 5 and len(result.folds) == 5
    for name in ("precision", "recall", "f1"):
        lo, hi = result.ci95[name]
        assert 0 <= lo <= result.mean[name] <= hi <= 1


def test_report_is_byte_identical(small_examples):
    texts = []
    for _ in range(2):
        config = PipelineConfig(model="knn")
        res = kfold_cv(config, small_examples, k=4, seed=8)
        texts.append(dumps_report(metrics_report(res, config, "v1")))
    assert texts[0] == texts[1]
    assert texts[0].endswith("}\n")
    assert list(metrics_report(res, config)) == ["model", "k", "seed", "folds", "mean", "ci95", "ci_method",
                                                 "pipeline_config", "lexicon_version"]


def test_holdout_evaluate(small_examples):
    out = holdout_evaluate(PipelineConfig(), small_examples, seed=1)
    sizes = out["sizes"]
    assert sum(sizes.values()) == len(small_examples)
    assert out["test"]["f1"] > 0.8


def _template_span(text):
    doc = Document("d", text)
    matches = default_lexicon().find(text)
    (span,) = extract_spans(doc, matches)
    return span


def test_error_report_ambiguous_templates():
    fp_span = _template_span("Her father's hip pain was discussed at length.")
    fn_span = _template_span("Denying symptoms other than stomach ache this morning.")
    spans = {fp_span.span_id: fp_span, fn_span.span_id: fn_span}
    preds = [Prediction(fp_span.span_id, 1, 0.4), Prediction(fn_span.span_id, 0, -0.7)]
    gold = {fp_span.span_id: 0, fn_span.span_id: 1}
    report = error_report(preds, gold, spans)
    assert [e.span_id for e in report.false_positives] == [fp_span.span_id]
    assert [e.span_id for e in report.false_negatives] == [fn_span.span_id]
    assert "[pain]" in report.false_positives[0].excerpt
    assert "[stomach ache]" in report.false_negatives[0].excerpt
    perfect = error_report([Prediction(fp_span.span_id, 0, -1.0)], gold, spans)
    assert perfect.to_dict() == {"false_positives": [], "false_negatives": []}


def test_error_report_sorted_by_confidence():
    preds = [Prediction("a", 1, 0.1), Prediction("b", 1, 2.0), Prediction("c", 1, -0.0)]
    report = error_report(preds, {"a": 0, "b": 0, "c": 0}, {})
    assert [e.span_id for e in report.false_positives] == ["b", "a", "c"]


def test_prediction_file_round_trip(tmp_path):
    preds = [Prediction("a", 1, 0.25), Prediction("b", 0, -1e-300)]
    path = tmp_path / "p.jsonl"
    write_predictions(preds, path)
    assert load_predictions(path) == preds
    path.write_text('{"span_id": "a", "label": 2, "score": 0}\n', encoding="utf-8")
    with pytest.raises(CorpusError):
        load_predictions(path)


def test_folds_are_seeded():
    labels = np.array([1] * 30 + [0] * 20)
    assert stratified_folds(labels, 5, 1) == stratified_folds(labels, 5, 1)
    assert stratified_folds(labels, 5, 1) != stratified_folds(labels, 5, 2)
