"""Splits, stratified k-fold cross-validation, metrics with confidence intervals,
and error reports.

Confidence intervals are Student-t intervals over per-fold scores:
``mean +/- t(0.975, k-1) * s / sqrt(k)`` with ``s`` the sample standard
deviation, clipped to [0, 1].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from painclf.classifiers import Prediction
from painclf.errors import CorpusError, EvaluationError
from painclf.features import preprocess
from painclf.jsonl import iter_records, require, write_records
from painclf.pipeline import LabeledSpan, PipelineConfig, TextClassifier, fit_pipeline
from painclf.spans import CandidateSpan

CI_METHOD = "student-t over fold scores: mean +/- t(0.975, k-1) * s / sqrt(k), clipped to [0, 1]"
METRIC_NAMES = ("precision", "recall", "f1")


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple[float, float, float] = (0.80, 0.10, 0.10)
    seed: int = 0

    def __post_init__(self):
        if len(self.fractions) != 3 or any(f <= 0 for f in self.fractions):
            raise EvaluationError("split fractions must be three positive numbers")
        if abs(sum(self.fractions) - 1.0) > 1e-12:
            raise EvaluationError(f"split fractions must sum to 1, got {sum(self.fractions)}")


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, tn: int) -> Metrics:
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        return cls(tp, fp, fn, tn, precision, recall, f1_score(precision, recall))

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
                "precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass
class MetricsWithCI:
    folds: list[Metrics]
    mean: dict[str, float]
    ci95: dict[str, tuple[float, float]]
    k: int
    seed: int
    method: str = CI_METHOD


@dataclass(frozen=True)
class ErrorEntry:
    span_id: str
    excerpt: str
    score: float


@dataclass
class ErrorReport:
    false_positives: list[ErrorEntry] = field(default_factory=list)
    false_negatives: list[ErrorEntry] = field(default_factory=list)

    def to_dict(self) -> dict:
        def rows(entries):
            return [{"span_id": e.span_id, "score": e.score, "excerpt": e.excerpt} for e in entries]

        return {"false_positives": rows(self.false_positives), "false_negatives": rows(self.false_negatives)}


def f1_score(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def largest_remainder(n: int, fractions: Sequence[float], tie_rank: Sequence[int] | None = None) -> list[int]:
    """Integer counts summing to ``n``, proportional to ``fractions``.

    Each part gets the floor of its quota; leftover items go to the largest
    fractional remainders. Equal remainders are ordered by ``tie_rank``
    (lower first), then by part index.
    """
    rank = list(tie_rank) if tie_rank is not None else [0] * len(fractions)
    exact = [Fraction(f).limit_denominator(10**9) for f in fractions]
    total = sum(exact)
    quotas = [n * f / total for f in exact]
    counts = [math.floor(q) for q in quotas]
    leftover = n - sum(counts)
    by_remainder = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - counts[i]), rank[i], i))
    for i in by_remainder[:leftover]:
        counts[i] += 1
    return counts


def _labels_of(items: Sequence) -> np.ndarray:
    labels = [getattr(it, "label", it) for it in items]
    arr = np.asarray(labels, dtype=np.int64)
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise EvaluationError("labels must be 0 or 1")
    return arr


def stratified_split(items: Sequence, spec: SplitSpec = SplitSpec()) -> tuple[list[int], list[int], list[int]]:
    """Seeded (train, test, validation) index lists, stratified by class."""
    y = _labels_of(items)
    if len(y) < 10:
        raise EvaluationError(f"need at least 10 items to split, got {len(y)}")
    if len(np.unique(y)) < 2:
        raise EvaluationError("both classes must be present to stratify")
    rng = np.random.default_rng(spec.seed)
    parts: list[list[int]] = [[], [], []]
    for cls in (0, 1):
        members = rng.permutation(np.flatnonzero(y == cls)).tolist()
        pos = 0
        # Tied remainders favour parts that are still smaller.
        counts = largest_remainder(len(members), spec.fractions, [len(p) for p in parts])
        for part, count in zip(parts, counts):
            part.extend(members[pos : pos + count])
            pos += count
    if any(not p for p in parts):
        raise EvaluationError("too few items to place at least one in each split part")
    train, test, val = (sorted(p) for p in parts)
    return train, test, val


def stratified_folds(items: Sequence, k: int, seed: int) -> list[list[int]]:
    """Seeded stratified k-fold assignment.

    Each class is shuffled and dealt round-robin onto the folds, continuing
    from where the previous class stopped, so per-class fold counts differ
    by at most one and fold sizes stay balanced.
    """
    y = _labels_of(items)
    if k < 2:
        raise EvaluationError("k must be at least 2")
    counts = {int(c): int((y == c).sum()) for c in (0, 1)}
    short = [c for c, n in counts.items() if n < k]
    if short:
        raise EvaluationError(f"class {short[0]} has {counts[short[0]]} items, fewer than k={k}")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    dealt = 0
    for cls in (0, 1):
        for idx in rng.permutation(np.flatnonzero(y == cls)).tolist():
            folds[dealt % k].append(idx)
            dealt += 1
    return [sorted(f) for f in folds]


def compute_metrics(predictions: Sequence[Prediction], gold: Mapping[str, int]) -> Metrics:
    """Confusion counts and positive-class P/R/F1 for predictions joined to gold by span_id."""
    if not predictions:
        raise EvaluationError("no predictions")
    tp = fp = fn = tn = 0
    missing = []
    for p in predictions:
        if p.span_id not in gold:
            missing.append(p.span_id)
            continue
        g = gold[p.span_id]
        if p.label == 1:
            if g == 1:
                tp += 1
            else:
                fp += 1
        elif g == 1:
            fn += 1
        else:
            tn += 1
    if missing:
        raise EvaluationError(f"{len(missing)} predictions have no gold label, e.g. {missing[0]!r}")
    return Metrics.from_counts(tp, fp, fn, tn)


def t_interval(scores: Sequence[float], confidence: float = 0.95) -> tuple[float, float, float]:
    """(mean, lo, hi) of a Student-t interval, clipped to [0, 1]."""
    arr = np.asarray(scores, dtype=np.float64)
    k = len(arr)
    if k < 2:
        raise EvaluationError("a t-interval needs at least two scores")
    if np.all(arr == arr[0]):
        value = float(arr[0])
        return value, value, value
    mean = math.fsum(arr.tolist()) / k
    s = float(np.std(arr, ddof=1))
    half = float(stats.t.ppf(0.5 + confidence / 2, k - 1)) * s / math.sqrt(k)
    return mean, max(0.0, mean - half), min(1.0, mean + half)


def summarize_folds(folds: Sequence[Metrics], seed: int) -> MetricsWithCI:
    mean = {}
    ci = {}
    for name in METRIC_NAMES:
        m, lo, hi = t_interval([getattr(f, name) for f in folds])
        mean[name] = m
        ci[name] = (lo, hi)
    return MetricsWithCI(list(folds), mean, ci, len(folds), seed)


FoldHook = Callable[[int, list[int], list[int], TextClassifier], None]


def kfold_cv(config: PipelineConfig, examples: Sequence[LabeledSpan], k: int = 10, seed: int = 0,
             embeddings: Mapping[str, np.ndarray] | None = None, on_fold: FoldHook | None = None) -> MetricsWithCI:
    """Stratified k-fold CV; every fitted stage sees only the training folds.

    ``on_fold(i, train_idx, test_idx, classifier)`` is called after each fold
    is fitted, which lets callers audit vocabularies for leakage.
    """
    folds = stratified_folds(examples, k, seed)
    tokens = None
    if config.uses_tfidf:
        tokens = [preprocess(e.text, config.preprocess) for e in examples]
    gold = {e.span_id: e.label for e in examples}
    results = []
    for i, test_idx in enumerate(folds):
        held = set(test_idx)
        train_idx = [j for j in range(len(examples)) if j not in held]
        train = [examples[j] for j in train_idx]
        clf = fit_pipeline(config, train, seed, embeddings,
                           tokens=None if tokens is None else [tokens[j] for j in train_idx])
        if on_fold is not None:
            on_fold(i, train_idx, test_idx, clf)
        test = [examples[j] for j in test_idx]
        preds = clf.predict([e.span_id for e in test], [e.text for e in test], embeddings)
        results.append(compute_metrics(preds, gold))
    return summarize_folds(results, seed)


def holdout_evaluate(config: PipelineConfig, examples: Sequence[LabeledSpan], seed: int,
                     fractions: tuple[float, float, float] = (0.80, 0.10, 0.10),
                     embeddings: Mapping[str, np.ndarray] | None = None) -> dict:
    """Train on the training part of an 80/10/10 split; score test and validation parts."""
    train_idx, test_idx, val_idx = stratified_split(examples, SplitSpec(fractions, seed))
    clf = fit_pipeline(config, [examples[i] for i in train_idx], seed, embeddings)
    gold = {e.span_id: e.label for e in examples}
    out = {"model": config.model, "seed": seed, "split": list(fractions),
           "sizes": {"train": len(train_idx), "test": len(test_idx), "validation": len(val_idx)}}
    for name, idx in (("test", test_idx), ("validation", val_idx)):
        part = [examples[i] for i in idx]
        preds = clf.predict([e.span_id for e in part], [e.text for e in part], embeddings)
        out[name] = compute_metrics(preds, gold).to_dict()
    out["pipeline_config"] = config.to_dict()
    return out


def metrics_report(result: MetricsWithCI, config: PipelineConfig, lexicon_version: str | None = None) -> dict:
    return {
        "model": config.model,
        "k": result.k,
        "seed": result.seed,
        "folds": [{"fold": i, **m.to_dict()} for i, m in enumerate(result.folds)],
        "mean": {n: result.mean[n] for n in METRIC_NAMES},
        "ci95": {n: list(result.ci95[n]) for n in METRIC_NAMES},
        "ci_method": result.method,
        "pipeline_config": config.to_dict(),
        "lexicon_version": lexicon_version,
    }


def dumps_report(report: dict) -> str:
    """Stable serialisation: insertion key order, repr floats, trailing newline."""
    return json.dumps(report, indent=2, ensure_ascii=False) + "\n"


def bracket_term(span: CandidateSpan) -> str:
    a = span.term_start - span.window_start
    b = span.term_end - span.window_start
    return f"{span.text[:a]}[{span.text[a:b]}]{span.text[b:]}"


def error_report(predictions: Sequence[Prediction], gold: Mapping[str, int],
                 spans: Mapping[str, CandidateSpan]) -> ErrorReport:
    """False positives and negatives, most confident first, with the term bracketed."""
    report = ErrorReport()
    for p in predictions:
        g = gold.get(p.span_id)
        if g is None or g == p.label:
            continue
        span = spans.get(p.span_id)
        excerpt = bracket_term(span) if span is not None else ""
        entry = ErrorEntry(p.span_id, excerpt, p.score)
        (report.false_positives if p.label == 1 else report.false_negatives).append(entry)
    for entries in (report.false_positives, report.false_negatives):
        entries.sort(key=lambda e: (-abs(e.score), e.span_id))
    return report


def write_predictions(predictions: Sequence[Prediction], path) -> int:
    return write_records(({"span_id": p.span_id, "label": p.label, "score": p.score} for p in predictions), path)


def load_predictions(path) -> list[Prediction]:
    out = []
    for lineno, rec in iter_records(path):
        label = require(rec, "label", int, lineno, path)
        if label not in (0, 1):
            raise CorpusError("label must be 0 or 1", line=lineno, path=str(path))
        score = require(rec, "score", (int, float), lineno, path)
        out.append(Prediction(require(rec, "span_id", str, lineno, path), label, float(score)))
    return out
