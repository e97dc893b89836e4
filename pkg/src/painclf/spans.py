"""Candidate spans: fixed character windows around lexicon matches."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

from painclf.corpus_io import Document
from painclf.errors import CorpusError, SpanError
from painclf.jsonl import iter_records, require, write_records
from painclf.lexicon import Match

DEFAULT_WINDOW = 200


@dataclass(frozen=True)
class CandidateSpan:
    span_id: str
    doc_id: str
    window_start: int
    window_end: int
    term_start: int
    term_end: int
    text: str

    @property
    def term(self) -> str:
        return self.text[self.term_start - self.window_start : self.term_end - self.window_start]

    def to_record(self) -> dict:
        return asdict(self)


def make_span_id(doc_id: str, window_start: int, window_end: int) -> str:
    digest = hashlib.sha1(f"{doc_id}\x1f{window_start}\x1f{window_end}".encode("utf-8")).hexdigest()
    return digest[:16]


def extract_spans(doc: Document, matches: Sequence[Match], window: int = DEFAULT_WINDOW) -> list[CandidateSpan]:
    """One window of ``window`` characters either side of each match.

    Windows are clamped to the document. Matches that give an identical
    window collapse to one span, keeping the first triggering match in
    input order. Output is sorted by (window_start, window_end).
    """
    if window < 1:
        raise SpanError(f"window must be >= 1, got {window}")
    n = len(doc.text)
    by_window: dict[tuple[int, int], CandidateSpan] = {}
    for m in matches:
        if not (0 <= m.start < m.end <= n):
            raise SpanError(f"match {tuple(m)} is out of range for document {doc.doc_id!r} of length {n}")
        ws = max(0, m.start - window)
        we = min(n, m.end + window)
        if (ws, we) in by_window:
            continue
        by_window[(ws, we)] = CandidateSpan(
            span_id=make_span_id(doc.doc_id, ws, we),
            doc_id=doc.doc_id,
            window_start=ws,
            window_end=we,
            term_start=m.start,
            term_end=m.end,
            text=doc.text[ws:we],
        )
    return [by_window[key] for key in sorted(by_window)]


def dedup_spans(spans: Iterable[CandidateSpan]) -> list[CandidateSpan]:
    """Drop repeats of (doc_id, window_start, window_end), first one wins."""
    seen: set[tuple[str, int, int]] = set()
    out = []
    for span in spans:
        key = (span.doc_id, span.window_start, span.window_end)
        if key not in seen:
            seen.add(key)
            out.append(span)
    return out


def write_spans(spans: Iterable[CandidateSpan], path: str | Path) -> int:
    return write_records((s.to_record() for s in spans), path)


def load_spans(path: str | Path) -> list[CandidateSpan]:
    spans = []
    seen: set[str] = set()
    for lineno, rec in iter_records(path):
        span = CandidateSpan(
            span_id=require(rec, "span_id", str, lineno, path),
            doc_id=require(rec, "doc_id", str, lineno, path),
            window_start=require(rec, "window_start", int, lineno, path),
            window_end=require(rec, "window_end", int, lineno, path),
            term_start=require(rec, "term_start", int, lineno, path),
            term_end=require(rec, "term_end", int, lineno, path),
            text=require(rec, "text", str, lineno, path),
        )
        if not (span.window_start <= span.term_start < span.term_end <= span.window_end):
            raise CorpusError("inconsistent span offsets", line=lineno, path=str(path))
        if len(span.text) != span.window_end - span.window_start:
            raise CorpusError("span text length does not match its window", line=lineno, path=str(path))
        if span.span_id in seen:
            raise CorpusError(f"duplicate span_id {span.span_id!r}", line=lineno, path=str(path))
        seen.add(span.span_id)
        spans.append(span)
    return spans
