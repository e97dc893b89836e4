"""Binary model files.

Layout (little-endian)::

    b"PNCL"  u32 version  u8 len + kind tag (ascii)
    u32 len + metadata JSON (utf-8)
    u32 array count, then per array: u16 len + name, u64 len + .npy bytes

Arrays are stored in ``.npy`` form so weights round-trip bit for bit.
Metadata floats are written with ``repr`` precision, which also
round-trips exactly.
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path
from typing import Union

import numpy as np
import scipy.sparse as sp

from painclf.classifiers import KnnModel, LinearSvmModel, MajorityModel, Model
from painclf.errors import ModelFormatError
from painclf.features import PreprocessConfig, TfidfModel
from painclf.pipeline import PipelineConfig, TextClassifier

MAGIC = b"PNCL"
FORMAT_VERSION = 1

Saved = Union[TextClassifier, LinearSvmModel, KnnModel, MajorityModel]


def _model_parts(model: Model) -> tuple[dict, dict[str, np.ndarray]]:
    if isinstance(model, LinearSvmModel):
        meta = {"bias": model.bias, "lam": model.lam, "epochs": model.epochs, "seed": model.seed,
                "objective": model.objective, "input_kind": model.input_kind}
        return meta, {"weights": model.weights}
    if isinstance(model, KnnModel):
        train = sp.csr_matrix(model.train)
        meta = {"k": model.k, "metric": model.metric, "shape": list(train.shape)}
        arrays = {"train_data": train.data, "train_indices": train.indices.astype(np.int64),
                  "train_indptr": train.indptr.astype(np.int64), "labels": model.labels}
        return meta, arrays
    if isinstance(model, MajorityModel):
        return {"label": model.label, "prior": model.prior}, {}
    raise TypeError(f"cannot persist {type(model).__name__}")


def _build_model(kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> Model:
    try:
        if kind in ("svm", "dense"):
            return LinearSvmModel(arrays["weights"], meta["bias"], meta["lam"], meta["epochs"], meta["seed"],
                                  meta["objective"], meta["input_kind"])
        if kind == "knn":
            train = sp.csr_matrix((arrays["train_data"], arrays["train_indices"], arrays["train_indptr"]),
                                  shape=tuple(meta["shape"]))
            return KnnModel(train, arrays["labels"], meta["k"], meta["metric"])
        if kind == "baseline":
            return MajorityModel(meta["label"], meta["prior"])
    except KeyError as exc:
        raise ModelFormatError(f"model file lacks {exc.args[0]!r}") from None
    raise ModelFormatError(f"unknown model kind {kind!r}")


def persist_model(model: Saved, path: str | Path) -> None:
    """Write a bare model or a :class:`TextClassifier` (with its TF-IDF stage)."""
    if isinstance(model, TextClassifier):
        inner = model.model
        meta, arrays = _model_parts(inner)
        meta = {
            "model": meta,
            "pipeline": {
                "config": {"model": model.config.model, "lam": model.config.lam, "epochs": model.config.epochs,
                           "knn_k": model.config.knn_k, "preprocess": model.config.preprocess.to_dict()},
                "seed": model.seed,
            },
        }
        if model.tfidf is not None:
            meta["tfidf"] = {"terms": list(model.tfidf.terms), "n_docs": model.tfidf.n_docs}
            arrays["idf"] = model.tfidf.idf
    else:
        inner = model
        meta, arrays = _model_parts(model)
        meta = {"model": meta}

    buf = io.BytesIO()
    kind = "dense" if isinstance(inner, LinearSvmModel) and inner.input_kind == "dense" else inner.kind
    tag = kind.encode("ascii")
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    buf.write(struct.pack("<B", len(tag)) + tag)
    meta_bytes = json.dumps(meta, ensure_ascii=False).encode("utf-8")
    buf.write(struct.pack("<I", len(meta_bytes)) + meta_bytes)
    buf.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        raw = io.BytesIO()
        np.save(raw, np.ascontiguousarray(arr), allow_pickle=False)
        data = raw.getvalue()
        encoded = name.encode("ascii")
        buf.write(struct.pack("<H", len(encoded)) + encoded)
        buf.write(struct.pack("<Q", len(data)) + data)
    Path(path).write_bytes(buf.getvalue())


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ModelFormatError("truncated model file")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))[0]


def load_model(path: str | Path) -> Saved:
    data = Path(path).read_bytes()
    reader = _Reader(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise ModelFormatError(f"{path}: bad magic, not a painclf model file")
    reader.take(4)
    version = reader.unpack("<I")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: model format version {version} is not supported (this build reads {FORMAT_VERSION})")
    kind = reader.take(reader.unpack("<B")).decode("ascii", errors="replace")
    try:
        meta = json.loads(reader.take(reader.unpack("<I")).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise ModelFormatError(f"{path}: corrupt metadata block") from None
    arrays = {}
    for _ in range(reader.unpack("<I")):
        name = reader.take(reader.unpack("<H")).decode("ascii", errors="replace")
        raw = reader.take(reader.unpack("<Q"))
        try:
            arrays[name] = np.load(io.BytesIO(raw), allow_pickle=False)
        except ValueError:
            raise ModelFormatError(f"{path}: corrupt array {name!r}") from None
    if reader.pos != len(data):
        raise ModelFormatError(f"{path}: trailing bytes after model payload")

    model = _build_model(kind, meta["model"], arrays)
    if "pipeline" not in meta:
        return model
    cfg = meta["pipeline"]["config"]
    config = PipelineConfig(model=cfg["model"], lam=cfg["lam"], epochs=cfg["epochs"], knn_k=cfg["knn_k"],
                            preprocess=PreprocessConfig.from_dict(cfg["preprocess"]))
    tfidf = None
    if "tfidf" in meta:
        tfidf = TfidfModel(tuple(meta["tfidf"]["terms"]), arrays["idf"], meta["tfidf"]["n_docs"])
    return TextClassifier(config, model, tfidf, meta["pipeline"]["seed"])
