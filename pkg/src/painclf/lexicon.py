"""Pain-term lexicon loading and multi-pattern matching.

Terms are compiled into an Aho-Corasick automaton, flattened to a dense
DFA transition table so that the scan is one table lookup per character.
The scan loop itself is JIT-compiled with numba; everything else
(trie construction, failure links, offset bookkeeping) is plain Python
and numpy.

Matching is case-insensitive through ``str.casefold``. Offsets in
:class:`Match` always index the original text (code points), even when
case folding changes the string length (``"ß"`` folds to ``"ss"``).
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from itertools import starmap
from importlib import resources
from pathlib import Path
from typing import Iterable, Literal, NamedTuple, Sequence

import numba
import numpy as np

from painclf.errors import LexiconError

MatchMode = Literal["word_boundary", "substring"]

# Joins documents for batch scanning. Terms may not contain it, so no
# match can straddle two documents.
_SEPARATOR = "\x00"
_BATCH_CHARS = 1 << 22


@dataclass(frozen=True)
class LexiconTerm:
    term_id: int
    surface: str
    normalized: str


class ScanResult(NamedTuple):
    """Flat match arrays for a batch of texts, ordered by (text, start, end, term)."""

    n_texts: int
    doc_index: np.ndarray
    term_ids: np.ndarray
    starts: np.ndarray
    ends: np.ndarray

    def counts(self) -> np.ndarray:
        return np.bincount(self.doc_index, minlength=self.n_texts)


class Match(NamedTuple):
    term_id: int
    start: int
    end: int


@numba.njit(cache=True, nogil=True)
def _scan_codes(codes, start, state, lut, delta, n_out, out_ptr, out_ids, ends, ids):  # pragma: no cover - compiled
    """Run the automaton from ``start`` writing (end, term_id) hits into the buffers.

    States are pre-multiplied row offsets into the flat ``delta`` table.
    Returns (count, stop, state); ``stop < len(codes)`` means the buffers
    filled up and scanning should resume at ``stop`` from ``state``.
    """
    nlut = lut.shape[0]
    cap = ends.shape[0]
    count = 0
    for i in range(start, codes.shape[0]):
        c = codes[i]
        nxt = delta[state + (lut[c] if c < nlut else 0)]
        k = n_out[nxt]
        if k:
            if count + k > cap:
                return count, i, state
            base = out_ptr[nxt]
            for j in range(k):
                ends[count] = i + 1
                ids[count] = out_ids[base + j]
                count += 1
        state = nxt
    return count, codes.shape[0], state


_HIT_BUFFER = 1 << 16


@lru_cache(maxsize=1)
def _alnum_table() -> np.ndarray:
    return np.fromiter((chr(cp).isalnum() for cp in range(0x110000)), dtype=np.bool_, count=0x110000)


def _codes(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("utf-32-le", "surrogatepass"), dtype=np.uint32)


class Lexicon:
    """A compiled, immutable matcher over a deduplicated term set."""

    def __init__(self, terms: Sequence[LexiconTerm], version: str):
        if not terms:
            raise LexiconError("lexicon has no terms")
        self.terms: tuple[LexiconTerm, ...] = tuple(terms)
        self.version = version
        self._compile()

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"Lexicon({len(self.terms)} terms, version={self.version!r})"

    def _compile(self) -> None:
        alphabet = sorted({ch for t in self.terms for ch in t.normalized})
        char_class = {ch: i + 1 for i, ch in enumerate(alphabet)}
        n_classes = len(alphabet) + 1

        goto: list[dict[int, int]] = [{}]
        own: list[list[int]] = [[]]
        for term in self.terms:
            state = 0
            for ch in term.normalized:
                cls = char_class[ch]
                nxt = goto[state].get(cls)
                if nxt is None:
                    nxt = len(goto)
                    goto[state][cls] = nxt
                    goto.append({})
                    own.append([])
                state = nxt
            own[state].append(term.term_id)

        n_states = len(goto)
        fail = [0] * n_states
        delta = np.zeros((n_states, n_classes), dtype=np.int32)
        outputs: list[list[int]] = [list(o) for o in own]
        for cls, nxt in goto[0].items():
            delta[0, cls] = nxt
        queue = deque(goto[0].values())
        # BFS order guarantees delta[fail[s]] is complete before s is filled.
        while queue:
            state = queue.popleft()
            delta[state] = delta[fail[state]]
            for cls, nxt in goto[state].items():
                delta[state, cls] = nxt
                fail[nxt] = int(delta[fail[state], cls])
                outputs[nxt] = outputs[nxt] + outputs[fail[nxt]]
                queue.append(nxt)

        lut_size = (max(map(ord, alphabet)) + 1) if alphabet else 1
        lut = np.zeros(lut_size, dtype=np.int32)
        for ch, cls in char_class.items():
            lut[ord(ch)] = cls
        # Flat transition table with states stored as row offsets, which keeps
        # the inner loop to one load per character.
        if n_states * n_classes >= 2**31:
            raise LexiconError("lexicon too large for the matcher's state table")
        self._delta = (delta * n_classes).ravel()
        self._n_out = np.zeros(n_states * n_classes, dtype=np.int32)
        self._out_ptr = np.zeros(n_states * n_classes, dtype=np.int64)
        rows = np.arange(n_states) * n_classes
        counts = np.array([len(o) for o in outputs], dtype=np.int64)
        self._n_out[rows] = counts
        self._out_ptr[rows] = np.cumsum(counts) - counts
        self._out_ids = np.fromiter((t for o in outputs for t in o), dtype=np.int32, count=int(counts.sum()))
        self._max_out = int(counts.max())
        self._lut = lut
        self._term_len = np.array([len(t.normalized) for t in self.terms], dtype=np.int64)
        self.n_states = n_states

    def _run(self, folded: str) -> tuple[np.ndarray, np.ndarray]:
        """All (end, term_id) hits of the automaton over ``folded``."""
        codes = _codes(folded)
        size = max(_HIT_BUFFER, self._max_out)
        ends_buf = np.empty(size, dtype=np.int64)
        ids_buf = np.empty(size, dtype=np.int32)
        ends_parts, ids_parts = [], []
        pos, state = 0, 0
        while True:
            count, pos, state = _scan_codes(codes, pos, state, self._lut, self._delta, self._n_out,
                                            self._out_ptr, self._out_ids, ends_buf, ids_buf)
            ends_parts.append(ends_buf[:count].copy())
            ids_parts.append(ids_buf[:count].copy())
            if pos >= len(codes):
                break
        if len(ends_parts) == 1:
            return ends_parts[0], ids_parts[0]
        return np.concatenate(ends_parts), np.concatenate(ids_parts)

    def _raw_hits(self, text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All case-insensitive occurrences as (term_ids, starts, ends) arrays."""
        folded = text.casefold()
        if len(folded) == len(text):
            ends, ids = self._run(folded)
            return ids, ends - self._term_len[ids], ends

        # Some characters fold to several; map folded offsets back and drop
        # hits that begin or end inside a single character's expansion.
        fold_lens = np.fromiter((len(ch.casefold()) for ch in text), dtype=np.int64, count=len(text))
        char_starts = np.zeros(len(text) + 1, dtype=np.int64)
        np.cumsum(fold_lens, out=char_starts[1:])
        is_start = np.zeros(len(folded) + 1, dtype=np.bool_)
        is_start[char_starts] = True
        origin = np.repeat(np.arange(len(text), dtype=np.int64), fold_lens)

        fends, ids = self._run(folded)
        fstarts = fends - self._term_len[ids]
        keep = is_start[fstarts] & is_start[fends]
        ids, fstarts, fends = ids[keep], fstarts[keep], fends[keep]
        return ids, origin[fstarts], origin[fends - 1] + 1

    def scan(self, text: str, mode: MatchMode = "word_boundary") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorised form of :func:`find_matches`: sorted (term_ids, starts, ends)."""
        mode = _check_mode(mode)
        ids, starts, ends = self._raw_hits(text)
        if mode == "word_boundary" and len(ids):
            alnum = _alnum_table()
            codes = _codes(text)
            n = len(text)
            before = np.zeros(len(starts), dtype=np.bool_)
            has_before = starts > 0
            before[has_before] = alnum[codes[starts[has_before] - 1]]
            after = np.zeros(len(ends), dtype=np.bool_)
            has_after = ends < n
            after[has_after] = alnum[codes[ends[has_after]]]
            keep = ~(before | after)
            ids, starts, ends = ids[keep], starts[keep], ends[keep]
        order = np.lexsort((ids, ends, starts))
        return ids[order], starts[order], ends[order]

    def find(self, text: str, mode: MatchMode = "word_boundary") -> list[Match]:
        ids, starts, ends = self.scan(text, mode)
        return list(starmap(Match, zip(ids.tolist(), starts.tolist(), ends.tolist())))

    def scan_many(self, texts: Sequence[str], mode: MatchMode = "word_boundary") -> ScanResult:
        """Bulk form of :meth:`scan` over many texts, as flat arrays.

        Texts are joined into large batches so the automaton runs once per
        batch rather than once per text. Offsets are local to each text.
        """
        mode = _check_mode(mode)
        parts: list[ScanResult] = []
        batch: list[str] = []
        first, size = 0, 0
        for text in texts:
            batch.append(text)
            size += len(text) + 1
            if size >= _BATCH_CHARS:
                parts.append(self._scan_batch(batch, first, mode))
                first += len(batch)
                batch, size = [], 0
        if batch or not parts:
            parts.append(self._scan_batch(batch, first, mode))
        if len(parts) == 1:
            return parts[0]
        return ScanResult(first + len(batch), *(np.concatenate(arrs) for arrs in zip(*(p[1:] for p in parts))))

    def _scan_batch(self, texts: list[str], first: int, mode: MatchMode) -> ScanResult:
        ids, starts, ends = self.scan(_SEPARATOR.join(texts), mode)
        offsets = np.zeros(len(texts) + 1, dtype=np.int64)
        np.cumsum([len(t) + 1 for t in texts], out=offsets[1:])
        local = np.searchsorted(offsets, starts, side="right") - 1
        return ScanResult(first + len(texts), local + first, ids, starts - offsets[local], ends - offsets[local])

    def find_many(self, texts: Sequence[str], mode: MatchMode = "word_boundary") -> list[list[Match]]:
        """Per-text match lists; equivalent to ``[find(t) for t in texts]``."""
        res = self.scan_many(texts, mode)
        # Hits are sorted by start within a batch, hence grouped by text.
        bounds = np.searchsorted(res.doc_index, np.arange(res.n_texts + 1), side="left").tolist()
        hits = list(starmap(Match, zip(res.term_ids.tolist(), res.starts.tolist(), res.ends.tolist())))
        return [hits[bounds[d] : bounds[d + 1]] for d in range(res.n_texts)]

    def term(self, term_id: int) -> LexiconTerm:
        return self.terms[term_id]


def _check_mode(mode: str) -> MatchMode:
    if mode in ("word_boundary", "word"):
        return "word_boundary"
    if mode == "substring":
        return "substring"
    raise ValueError(f"unknown match mode {mode!r}")


def compile_lexicon(surfaces: Iterable[str], version: str | None = None) -> Lexicon:
    """Build a matcher from raw term strings, case-folding and deduplicating."""
    terms: list[LexiconTerm] = []
    seen: set[str] = set()
    for surface in surfaces:
        surface = surface.strip()
        normalized = surface.casefold().strip()
        if not normalized or normalized in seen:
            continue
        if _SEPARATOR in normalized:
            raise LexiconError(f"term {surface!r} contains a NUL character")
        seen.add(normalized)
        terms.append(LexiconTerm(len(terms), surface, normalized))
    if not terms:
        raise LexiconError("lexicon has no terms")
    if version is None:
        digest = hashlib.sha256("\n".join(t.normalized for t in terms).encode("utf-8")).hexdigest()
        version = f"sha256:{digest[:12]}"
    return Lexicon(terms, version)


def parse_lexicon(lines: Iterable[str]) -> Lexicon:
    surfaces: list[str] = []
    version = None
    for line in lines:
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped[1:].strip()
            if body.lower().startswith("version:"):
                version = body.split(":", 1)[1].strip() or None
            continue
        surfaces.append(stripped)
    return compile_lexicon(surfaces, version=version)


def load_lexicon(path: str | Path) -> Lexicon:
    """Load a one-term-per-line lexicon file.

    Blank lines and ``#`` comments are skipped; a ``# version: X`` comment
    sets the lexicon version, otherwise a content hash is used.
    """
    with open(path, encoding="utf-8") as fh:
        return parse_lexicon(fh)


def default_lexicon() -> Lexicon:
    """The bundled pain lexicon used by the synthetic corpus generator."""
    text = resources.files("painclf.data").joinpath("pain_lexicon.txt").read_text(encoding="utf-8")
    return parse_lexicon(text.splitlines())


def find_matches(matcher: Lexicon, text: str, mode: MatchMode = "word_boundary") -> list[Match]:
    """Every occurrence of every term, overlapping ones included, sorted by (start, end).

    In ``word_boundary`` mode a hit counts only if the characters on both
    sides are absent or not alphanumeric.
    """
    return matcher.find(text, mode)


def filter_documents(matcher: Lexicon, docs: Iterable, mode: MatchMode = "word_boundary") -> list[tuple]:
    """Keep documents with at least one match, paired with their matches, in input order."""
    docs = list(docs)
    all_matches = matcher.find_many([d.text for d in docs], mode)
    return [(doc, matches) for doc, matches in zip(docs, all_matches) if matches]
