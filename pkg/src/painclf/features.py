"""Text preprocessing and TF-IDF featurisation.

The weighting is raw term count times smoothed idf,
``idf(t) = ln((1 + N) / (1 + df(t))) + 1``, followed by L2 normalisation.
Vocabulary columns are assigned in first-seen order over the fitting corpus.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from painclf.errors import PainClfError

# Alphanumeric runs, or runs of anything that is neither alphanumeric nor space.
_TOKEN_RE = re.compile(r"[^\W_]+|(?:[^\w\s]|_)+")
_VOWELS = frozenset("aeiouy")


def _read_data_lines(name: str) -> list[str]:
    text = resources.files("painclf.data").joinpath(name).read_text(encoding="utf-8")
    return [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def read_stopwords(path: str | Path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        words = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    return _validate_stopwords(words)


def read_lemma_exceptions(path: str | Path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        return _parse_exceptions(ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#"))


def _validate_stopwords(words: Iterable[str]) -> frozenset[str]:
    out = frozenset(words)
    bad = sorted(w for w in out if w != w.lower() or any(ch.isspace() for ch in w) or not w)
    if bad:
        raise PainClfError(f"stopwords must be lowercase without whitespace: {bad[:5]}")
    return out


def _parse_exceptions(lines: Iterable[str]) -> dict[str, str]:
    table = {}
    for line in lines:
        form, sep, lemma = line.rstrip("\n").partition("\t")
        if not sep or not form or not lemma.strip():
            raise PainClfError(f"bad lemma exception line {line!r}; expected form<TAB>lemma")
        table[form.strip()] = lemma.strip()
    return table


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    return _validate_stopwords(_read_data_lines("stopwords_en.txt"))


@lru_cache(maxsize=1)
def _default_exceptions() -> tuple[tuple[str, str], ...]:
    return tuple(_parse_exceptions(_read_data_lines("lemma_exceptions.tsv")).items())


def default_lemma_exceptions() -> dict[str, str]:
    return dict(_default_exceptions())


@dataclass(frozen=True)
class PreprocessConfig:
    lowercase: bool = True
    remove_stopwords: bool = True
    remove_punctuation: bool = True
    lemmatize: bool = True
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    lemma_exceptions: Mapping[str, str] = field(default_factory=default_lemma_exceptions, hash=False)

    def to_dict(self) -> dict:
        return {
            "lowercase": self.lowercase,
            "remove_stopwords": self.remove_stopwords,
            "remove_punctuation": self.remove_punctuation,
            "lemmatize": self.lemmatize,
            "stopwords": sorted(self.stopwords),
            "lemma_exceptions": dict(sorted(self.lemma_exceptions.items())),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> PreprocessConfig:
        return cls(
            lowercase=bool(data["lowercase"]),
            remove_stopwords=bool(data["remove_stopwords"]),
            remove_punctuation=bool(data["remove_punctuation"]),
            lemmatize=bool(data["lemmatize"]),
            stopwords=_validate_stopwords(data["stopwords"]),
            lemma_exceptions=dict(data["lemma_exceptions"]),
        )

    def summary(self) -> dict:
        """Short description for reports; the full lists live in model files."""
        return {
            "lowercase": self.lowercase,
            "remove_stopwords": self.remove_stopwords,
            "remove_punctuation": self.remove_punctuation,
            "lemmatize": self.lemmatize,
            "n_stopwords": len(self.stopwords),
            "n_lemma_exceptions": len(self.lemma_exceptions),
        }


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def _lemma_step(token: str) -> str:
    if token.endswith("ies") and len(token) > 3:
        return token[:-3] + "y"
    if token.endswith("es") and len(token) - 2 >= 3 and token[:-2].endswith(("s", "x", "z", "sh")):
        return token[:-2]
    if token.endswith("s") and len(token) - 1 >= 3 and not token.endswith(("ss", "us", "is")):
        return token[:-1]
    for suffix in ("ing", "ed"):
        if token.endswith(suffix):
            stem = token[: -len(suffix)]
            if len(stem) < 3 or not _VOWELS.intersection(stem) or token.endswith("eed"):
                return token
            if stem[-1] == stem[-2] and stem[-1] not in _VOWELS and stem[-1] not in "lsz":
                stem = stem[:-1]
            return stem
    return token


def lemmatize(token: str, exceptions: Mapping[str, str] | None = None) -> str:
    """Dictionary lookup, then suffix rules applied until the token stops changing.

    Suffix rules, first match wins: ``-ies`` to ``-y``; ``-es`` dropped after a
    sibilant stem (s, x, z, sh) of 3+ characters; ``-s`` dropped when 3+
    characters remain and the word does not end in ss, us or is; ``-ing`` and
    ``-ed`` dropped when the stem has 3+ characters and a vowel, undoubling a
    final doubled consonant other than l, s, z.
    """
    table = default_lemma_exceptions() if exceptions is None else exceptions
    for _ in range(len(token) + 1):
        if token in table:
            return table[token]
        nxt = _lemma_step(token)
        if nxt == token:
            return token
        token = nxt
    return token


def preprocess(text: str, config: PreprocessConfig | None = None) -> list[str]:
    """Tokenise and normalise one span.

    Lowercasing is applied to the whole string before splitting, so that
    case mappings which change length cannot break tokens apart on a
    second pass. Lemmas that land on a stopword are dropped as well.
    """
    cfg = config or PreprocessConfig()
    if cfg.lowercase:
        text = text.lower()
    tokens = tokenize(text)
    if cfg.remove_punctuation:
        tokens = [t for t in tokens if any(ch.isalnum() for ch in t)]
    if cfg.remove_stopwords:
        tokens = [t for t in tokens if t.lower() not in cfg.stopwords]
    if cfg.lemmatize:
        tokens = [lemmatize(t, cfg.lemma_exceptions) for t in tokens]
        if cfg.remove_stopwords:
            tokens = [t for t in tokens if t.lower() not in cfg.stopwords]
    return tokens


@dataclass(frozen=True)
class SparseVector:
    """Sorted (index, value) pairs in a space of ``dim`` columns."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-D arrays of equal length")
        if len(idx) and (idx[0] < 0 or idx[-1] >= self.dim or np.any(np.diff(idx) <= 0)):
            raise ValueError("indices must be strictly increasing within [0, dim)")
        if not np.all(np.isfinite(val)) or np.any(val == 0):
            raise ValueError("values must be finite and nonzero")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def zeros(cls, dim: int) -> SparseVector:
        return cls(np.empty(0, np.int64), np.empty(0, np.float64), dim)

    @classmethod
    def from_dense(cls, dense: Sequence[float]) -> SparseVector:
        arr = np.asarray(dense, dtype=np.float64)
        nz = np.flatnonzero(arr)
        return cls(nz, arr[nz], len(arr))

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def norm(self) -> float:
        return math.sqrt(float(np.dot(self.values, self.values)))


@dataclass(frozen=True)
class TfidfModel:
    terms: tuple[str, ...]
    idf: np.ndarray
    n_docs: int
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.terms)})
        if len(self.index) != len(self.terms):
            raise ValueError("duplicate vocabulary terms")
        if len(self.idf) != len(self.terms):
            raise ValueError("idf length does not match vocabulary")

    @property
    def size(self) -> int:
        return len(self.terms)


def fit_tfidf(corpus: Sequence[Sequence[str]]) -> TfidfModel:
    """Fit vocabulary and smoothed idf weights on token lists."""
    if not corpus:
        raise PainClfError("cannot fit TF-IDF on zero documents")
    order: dict[str, int] = {}
    df: Counter[str] = Counter()
    for tokens in corpus:
        for t in tokens:
            if t not in order:
                order[t] = len(order)
        df.update(set(tokens))
    if not order:
        raise PainClfError("cannot fit TF-IDF: every document is empty after preprocessing")
    n = len(corpus)
    terms = tuple(order)
    idf = np.array([math.log((1 + n) / (1 + df[t])) + 1.0 for t in terms])
    return TfidfModel(terms, idf, n)


def transform(model: TfidfModel, tokens: Iterable[str]) -> SparseVector:
    """Counts times idf, L2-normalised; unknown tokens are ignored."""
    counts = Counter(model.index[t] for t in tokens if t in model.index)
    if not counts:
        return SparseVector.zeros(model.size)
    idx = np.array(sorted(counts), dtype=np.int64)
    weights = np.array([counts[i] for i in idx.tolist()], dtype=np.float64) * model.idf[idx]
    return SparseVector(idx, weights / math.sqrt(float(np.dot(weights, weights))), model.size)


def stack(vectors: Sequence[SparseVector], dim: int | None = None) -> sp.csr_matrix:
    """Rows of a CSR matrix; all vectors must share one dimension."""
    if dim is None:
        if not vectors:
            raise ValueError("cannot infer dimension of an empty batch")
        dim = vectors[0].dim
    if any(v.dim != dim for v in vectors):
        raise ValueError("vectors have mixed dimensions")
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    np.cumsum([v.nnz for v in vectors], out=indptr[1:])
    indices = np.concatenate([v.indices for v in vectors]) if vectors else np.empty(0, np.int64)
    data = np.concatenate([v.values for v in vectors]) if vectors else np.empty(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))


def unstack(matrix: sp.csr_matrix) -> list[SparseVector]:
    matrix = sp.csr_matrix(matrix)
    dim = matrix.shape[1]
    return [
        SparseVector(matrix.indices[a:b].copy(), matrix.data[a:b].copy(), dim)
        for a, b in zip(matrix.indptr[:-1], matrix.indptr[1:])
    ]
