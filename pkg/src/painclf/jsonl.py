"""Line-delimited JSON helpers used by every file format in the pipeline."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator

from painclf.errors import CorpusError


def iter_records(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield ``(line_number, record)`` for every non-blank line.

    Line numbers are 1-based. A line that is not a JSON object raises
    :class:`CorpusError` carrying the line number.
    """
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            yield lineno, parse_line(line, lineno, path)


def parse_line(line: str, lineno: int, path: str | Path | None = None) -> dict[str, Any]:
    where = None if path is None else str(path)
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"malformed record: {exc.msg}", line=lineno, path=where) from None
    if not isinstance(record, dict):
        raise CorpusError("malformed record: expected an object", line=lineno, path=where)
    return record


def dumps(record: dict[str, Any]) -> str:
    return json.dumps(record, ensure_ascii=False, separators=(", ", ": "))


def write_records(records: Iterable[dict[str, Any]], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(dumps(record))
            fh.write("\n")
            n += 1
    return n


def require(record: dict[str, Any], name: str, kind: type | tuple[type, ...], lineno: int, path: str | Path | None = None):
    """Fetch a required field, raising a line-numbered error if absent or mistyped."""
    if name not in record:
        raise CorpusError(f"missing field `{name}`", line=lineno, path=None if path is None else str(path))
    value = record[name]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise CorpusError(f"field `{name}` has wrong type", line=lineno, path=None if path is None else str(path))
    return value
