"""Three-way annotation labels, inter-annotator agreement, adjudication.

Agreement across three annotators is summarised as the unweighted mean of
the three pairwise Cohen's kappa (and pairwise percent agreement) values.
The per-pair figures are kept in the report so pooled variants can be
recomputed from it.
"""

from __future__ import annotations

import enum
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Hashable, Iterable, Mapping, Sequence

from painclf.errors import AnnotationError, CorpusError, DegenerateKappaError, ResolutionIgnoredWarning
from painclf.jsonl import iter_records, require, write_records

DEFAULT_GATE = 0.80


class Label(str, enum.Enum):
    RELEVANT = "relevant"
    NOT_RELEVANT = "not_relevant"
    NEGATED = "negated"

    @classmethod
    def parse(cls, value: str) -> Label:
        try:
            return cls(value)
        except ValueError:
            raise AnnotationError(f"unknown label {value!r}; expected one of relevant, not_relevant, negated") from None


class GoldStatus(str, enum.Enum):
    ADJUDICATED = "adjudicated"
    UNANIMOUS = "unanimous"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class AnnotationRecord:
    span_id: str
    annotator_id: str
    label: Label
    round: int | None = None

    def to_record(self) -> dict:
        rec = {"span_id": self.span_id, "annotator_id": self.annotator_id, "label": self.label.value}
        if self.round is not None:
            rec["round"] = self.round
        return rec


@dataclass(frozen=True)
class GoldSpan:
    span_id: str
    label3: Label | None
    label2: int | None
    status: GoldStatus

    def __post_init__(self):
        if self.status is GoldStatus.UNRESOLVED:
            if self.label3 is not None or self.label2 is not None:
                raise AnnotationError("unresolved gold spans carry no label")
        elif self.label3 is None or self.label2 != binarize(self.label3):
            raise AnnotationError(f"inconsistent gold labels for {self.span_id!r}")

    @property
    def resolved(self) -> bool:
        return self.status is not GoldStatus.UNRESOLVED

    def to_record(self) -> dict:
        return {
            "span_id": self.span_id,
            "label3": None if self.label3 is None else self.label3.value,
            "label2": self.label2,
            "status": self.status.value,
        }


@dataclass
class AgreementReport:
    n_items: int
    percent_agreement: float
    kappa: float
    per_pair: dict[tuple[str, str], tuple[float, float]] = field(default_factory=dict)
    method: str = "mean of pairwise Cohen's kappa"

    def to_dict(self) -> dict:
        return {
            "n_items": self.n_items,
            "percent_agreement": self.percent_agreement,
            "kappa": self.kappa,
            "method": self.method,
            "per_pair": [
                {"annotators": list(pair), "percent_agreement": p, "kappa": k}
                for pair, (p, k) in sorted(self.per_pair.items())
            ],
        }


@dataclass(frozen=True)
class GateResult:
    passed: bool
    margin: float
    threshold: float


def _check_pair(a: Sequence, b: Sequence) -> int:
    if len(a) != len(b):
        raise AnnotationError(f"label lists differ in length ({len(a)} vs {len(b)})")
    if not a:
        raise AnnotationError("label lists are empty")
    return len(a)


def percent_agreement(a: Sequence[Hashable], b: Sequence[Hashable]) -> float:
    n = _check_pair(a, b)
    return sum(x == y for x, y in zip(a, b)) / n


def cohens_kappa(a: Sequence[Hashable], b: Sequence[Hashable]) -> float:
    """Cohen's kappa for two aligned label lists.

    Computed from integer counts, ``(n*agree - sum n_a*n_b) / (n^2 - sum n_a*n_b)``,
    so the result is exactly symmetric in its arguments. When chance
    agreement is 1 (both raters used one and the same label) the value is
    1.0 if agreement is perfect and :class:`DegenerateKappaError` otherwise.
    """
    n = _check_pair(a, b)
    agree = sum(x == y for x, y in zip(a, b))
    count_a = Counter(a)
    count_b = Counter(b)
    chance = sum(count_a[c] * count_b[c] for c in count_a.keys() & count_b.keys())
    denom = n * n - chance
    if denom == 0:
        if agree == n:
            return 1.0
        raise DegenerateKappaError("chance agreement is 1 with imperfect observed agreement")
    return (n * agree - chance) / denom


def round_agreement(records: Iterable[AnnotationRecord]) -> AgreementReport:
    """Pairwise agreement over one round where every annotator labelled every span."""
    labels: dict[str, dict[str, Label]] = defaultdict(dict)
    annotators: set[str] = set()
    for rec in records:
        if rec.annotator_id in labels[rec.span_id]:
            raise AnnotationError(f"annotator {rec.annotator_id!r} labelled span {rec.span_id!r} twice")
        labels[rec.span_id][rec.annotator_id] = rec.label
        annotators.add(rec.annotator_id)
    if len(annotators) < 2:
        raise AnnotationError("agreement needs at least two annotators")
    incomplete = sorted(s for s, by in labels.items() if len(by) != len(annotators))
    if incomplete:
        raise AnnotationError(f"spans missing annotator labels: {', '.join(incomplete)}")

    span_ids = sorted(labels)
    per_pair = {}
    for x, y in combinations(sorted(annotators), 2):
        a = [labels[s][x] for s in span_ids]
        b = [labels[s][y] for s in span_ids]
        per_pair[(x, y)] = (percent_agreement(a, b), cohens_kappa(a, b))
    return AgreementReport(
        n_items=len(span_ids),
        percent_agreement=sum(p for p, _ in per_pair.values()) / len(per_pair),
        kappa=sum(k for _, k in per_pair.values()) / len(per_pair),
        per_pair=per_pair,
    )


def agreement_by_round(records: Iterable[AnnotationRecord]) -> dict[int | None, AgreementReport]:
    rounds: dict[int | None, list[AnnotationRecord]] = defaultdict(list)
    for rec in records:
        rounds[rec.round].append(rec)
    return {r: round_agreement(rounds[r]) for r in sorted(rounds, key=lambda r: (r is None, r or 0))}


def gate_check(report: AgreementReport, threshold: float = DEFAULT_GATE) -> GateResult:
    """Pass iff kappa is strictly above the threshold."""
    return GateResult(passed=report.kappa > threshold, margin=report.kappa - threshold, threshold=threshold)


def binarize(label3: Label) -> int:
    return 1 if label3 is Label.RELEVANT else 0


def adjudicate(records: Sequence[AnnotationRecord], resolutions: Mapping[str, Label] | None = None) -> GoldSpan:
    """Majority vote over one span's three-way labels.

    Three identical labels are unanimous; a strict majority is adjudicated.
    Anything else stays unresolved unless ``resolutions`` supplies a label.
    A resolution for a span that already has a label is ignored with a
    :class:`ResolutionIgnoredWarning`.
    """
    if not 1 <= len(records) <= 3:
        raise AnnotationError(f"expected 1-3 records per span, got {len(records)}")
    span_ids = {r.span_id for r in records}
    if len(span_ids) != 1:
        raise AnnotationError(f"records belong to several spans: {sorted(span_ids)}")
    span_id = records[0].span_id
    if len({r.annotator_id for r in records}) != len(records):
        raise AnnotationError(f"duplicate annotator for span {span_id!r}")

    counts = Counter(r.label for r in records)
    label, top = max(counts.items(), key=lambda kv: kv[1])
    resolution = None if resolutions is None else resolutions.get(span_id)

    if len(records) == 3 and top == 3:
        status = GoldStatus.UNANIMOUS
    elif len(records) >= 2 and top * 2 > len(records):
        status = GoldStatus.ADJUDICATED
    elif resolution is not None:
        return GoldSpan(span_id, resolution, binarize(resolution), GoldStatus.ADJUDICATED)
    else:
        return GoldSpan(span_id, None, None, GoldStatus.UNRESOLVED)

    if resolution is not None:
        warnings.warn(f"resolution for span {span_id!r} ignored: span is already {status.value}", ResolutionIgnoredWarning, stacklevel=2)
    return GoldSpan(span_id, label, binarize(label), status)


def adjudicate_all(records: Iterable[AnnotationRecord], resolutions: Mapping[str, Label] | None = None) -> list[GoldSpan]:
    """Adjudicate every span, in order of first appearance."""
    by_span: dict[str, list[AnnotationRecord]] = defaultdict(list)
    for rec in records:
        by_span[rec.span_id].append(rec)
    unknown = set(resolutions or ()) - by_span.keys()
    if unknown:
        warnings.warn(f"resolutions for unknown spans ignored: {sorted(unknown)}", ResolutionIgnoredWarning, stacklevel=2)
    return [adjudicate(recs, resolutions) for recs in by_span.values()]


def label_distribution(gold: Sequence[GoldSpan]) -> dict[str, dict]:
    if not gold:
        raise AnnotationError("no gold spans")
    unresolved = [g.span_id for g in gold if not g.resolved]
    if unresolved:
        raise AnnotationError(f"{len(unresolved)} unresolved gold spans present")
    n = len(gold)
    three = Counter(g.label3 for g in gold)
    positives = sum(g.label2 for g in gold)
    return {
        "three_way": {label.value: three[label] / n for label in Label},
        "binary": {"1": positives / n, "0": (n - positives) / n},
    }


def load_annotations(path: str | Path) -> list[AnnotationRecord]:
    records = []
    seen: set[tuple[str, str]] = set()
    for lineno, rec in iter_records(path):
        span_id = require(rec, "span_id", str, lineno, path)
        annotator = require(rec, "annotator_id", str, lineno, path)
        try:
            label = Label.parse(require(rec, "label", str, lineno, path))
        except AnnotationError as exc:
            raise CorpusError(str(exc), line=lineno, path=str(path)) from None
        rnd = rec.get("round")
        if rnd is not None and (not isinstance(rnd, int) or isinstance(rnd, bool)):
            raise CorpusError("field `round` has wrong type", line=lineno, path=str(path))
        if (span_id, annotator) in seen:
            raise CorpusError(f"second label from {annotator!r} for span {span_id!r}", line=lineno, path=str(path))
        seen.add((span_id, annotator))
        records.append(AnnotationRecord(span_id, annotator, label, rnd))
    return records


def write_annotations(records: Iterable[AnnotationRecord], path: str | Path) -> int:
    return write_records((r.to_record() for r in records), path)


def load_resolutions(path: str | Path) -> dict[str, Label]:
    out = {}
    for lineno, rec in iter_records(path):
        span_id = require(rec, "span_id", str, lineno, path)
        try:
            out[span_id] = Label.parse(require(rec, "label", str, lineno, path))
        except AnnotationError as exc:
            raise CorpusError(str(exc), line=lineno, path=str(path)) from None
    return out


def load_gold(path: str | Path) -> list[GoldSpan]:
    gold = []
    for lineno, rec in iter_records(path):
        span_id = require(rec, "span_id", str, lineno, path)
        try:
            status = GoldStatus(require(rec, "status", str, lineno, path))
            raw3 = rec.get("label3")
            label3 = None if raw3 is None else Label.parse(raw3)
            gold.append(GoldSpan(span_id, label3, rec.get("label2"), status))
        except (AnnotationError, ValueError) as exc:
            raise CorpusError(str(exc), line=lineno, path=str(path)) from None
    return gold


def write_gold(gold: Iterable[GoldSpan], path: str | Path) -> int:
    return write_records((g.to_record() for g in gold), path)
