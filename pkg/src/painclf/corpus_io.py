"""Document corpora stored as one JSON record per line."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from painclf.errors import CorpusError
from painclf.jsonl import parse_line, require, write_records

_KNOWN_FIELDS = ("doc_id", "text", "patient_id", "source_type")


@dataclass(frozen=True)
class Document:
    """One clinical note.

    ``extra`` holds any fields the file carried beyond the known four, so
    they survive a load/write round trip.
    """

    doc_id: str
    text: str
    patient_id: str | None = None
    source_type: str | None = None
    extra: dict[str, Any] = field(default_factory=dict, compare=True, hash=False)

    def to_record(self) -> dict[str, Any]:
        record: dict[str, Any] = {"doc_id": self.doc_id, "text": self.text}
        if self.patient_id is not None:
            record["patient_id"] = self.patient_id
        if self.source_type is not None:
            record["source_type"] = self.source_type
        record.update(self.extra)
        return record


def _optional_str(record: dict[str, Any], name: str, lineno: int, path: Path) -> str | None:
    value = record.get(name)
    if value is not None and not isinstance(value, str):
        raise CorpusError(f"field `{name}` has wrong type", line=lineno, path=str(path))
    return value


def scan_corpus(path: str | Path) -> tuple[list[Document], list[CorpusError]]:
    """Read a corpus file, collecting per-record errors instead of raising.

    Malformed JSON, missing or mistyped fields, empty text and duplicate
    ``doc_id`` values each produce one error and the record is skipped.
    I/O failures still raise.
    """
    path = Path(path)
    docs: list[Document] = []
    errors: list[CorpusError] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        lines = fh.readlines()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = parse_line(line, lineno, path)
            doc_id = require(record, "doc_id", str, lineno, path)
            text = require(record, "text", str, lineno, path)
            if not doc_id:
                raise CorpusError("empty doc_id", line=lineno, path=str(path))
            if not text:
                raise CorpusError(f"empty text for doc_id {doc_id!r}", line=lineno, path=str(path))
            if doc_id in seen:
                raise CorpusError(f"duplicate doc_id {doc_id!r}", line=lineno, path=str(path))
            doc = Document(
                doc_id=doc_id,
                text=text,
                patient_id=_optional_str(record, "patient_id", lineno, path),
                source_type=_optional_str(record, "source_type", lineno, path),
                extra={k: v for k, v in record.items() if k not in _KNOWN_FIELDS},
            )
        except CorpusError as exc:
            errors.append(exc)
            continue
        seen.add(doc_id)
        docs.append(doc)
    return docs, errors


def load_corpus(path: str | Path) -> tuple[Document, ...]:
    """Load every document in file order, raising on the first invalid record."""
    docs, errors = scan_corpus(path)
    if errors:
        raise errors[0]
    return tuple(docs)


def write_corpus(docs: Iterable[Document], path: str | Path) -> int:
    return write_records((d.to_record() for d in docs), path)


__all__ = ["Document", "load_corpus", "scan_corpus", "write_corpus"]
