"""Binary classifiers over TF-IDF (sparse) or embedding (dense) features.

* linear SVM trained with Pegasos (stochastic subgradient on the
  L2-regularised hinge objective, bias unregularised),
* brute-force KNN with Euclidean distance,
* a majority-class baseline.

Labels are ``0``/``1``; the SVM maps them to ``-1``/``+1`` internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

from painclf.errors import TrainingError
from painclf.features import SparseVector, stack

DEFAULT_LAMBDA = 1e-4
DEFAULT_EPOCHS = 20
DEFAULT_K = 5


@dataclass(frozen=True)
class Prediction:
    span_id: str
    label: int
    score: float


@dataclass(frozen=True)
class DenseVector:
    span_id: str
    vector: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.vector, dtype=np.float64)
        if arr.ndim != 1 or not np.all(np.isfinite(arr)):
            raise ValueError(f"embedding for {self.span_id!r} must be a finite 1-D vector")
        object.__setattr__(self, "vector", arr)


@dataclass
class LinearSvmModel:
    weights: np.ndarray
    bias: float
    lam: float
    epochs: int
    seed: int
    objective: float
    input_kind: str = "sparse"  # or "dense"
    kind: str = field(default="svm", init=False)

    @property
    def dim(self) -> int:
        return len(self.weights)


@dataclass
class KnnModel:
    train: sp.csr_matrix
    labels: np.ndarray
    k: int = DEFAULT_K
    metric: str = "euclidean"
    kind: str = field(default="knn", init=False)

    def __post_init__(self):
        self.train = sp.csr_matrix(self.train, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self._sq_norms = np.asarray(self.train.multiply(self.train).sum(axis=1)).ravel()

    @property
    def dim(self) -> int:
        return self.train.shape[1]


@dataclass
class MajorityModel:
    label: int
    prior: float
    kind: str = field(default="baseline", init=False)


Model = Union[LinearSvmModel, KnnModel, MajorityModel]


def _as_labels(y: Sequence[int]) -> np.ndarray:
    arr = np.asarray(y, dtype=np.int64)
    if arr.ndim != 1 or not np.all((arr == 0) | (arr == 1)):
        raise TrainingError("labels must be 0 or 1")
    return arr


def _check_two_classes(y: np.ndarray) -> None:
    if len(y) < 2 or len(np.unique(y)) < 2:
        raise TrainingError("single-class training set")


def _as_csr(X: Sequence[SparseVector] | sp.spmatrix) -> sp.csr_matrix:
    if sp.issparse(X):
        mat = sp.csr_matrix(X, dtype=np.float64)
    else:
        try:
            mat = stack(list(X))
        except ValueError as exc:
            raise TrainingError(f"dimension mismatch: {exc}") from None
    if not np.all(np.isfinite(mat.data)):
        raise TrainingError("non-finite feature values")
    return mat


def _as_dense(V: Sequence[DenseVector] | np.ndarray) -> np.ndarray:
    if isinstance(V, np.ndarray):
        arr = np.asarray(V, dtype=np.float64)
    else:
        dims = {len(v.vector) for v in V}
        if len(dims) > 1:
            raise TrainingError(f"dimension mismatch: embeddings have dimensions {sorted(dims)}")
        arr = np.array([v.vector for v in V], dtype=np.float64)
    if arr.ndim != 2:
        raise TrainingError("dense features must form a 2-D array")
    if not np.all(np.isfinite(arr)):
        raise TrainingError("non-finite feature values")
    return arr


# --- SVM objective -----------------------------------------------------------


def svm_objective(X, y: Sequence[int], w: np.ndarray, b: float, lam: float) -> float:
    """(lam/2)|w|^2 + mean hinge loss, with labels in {0, 1}."""
    ypm = 2.0 * _as_labels(y) - 1.0
    margins = ypm * (X @ w + b)
    return 0.5 * lam * float(w @ w) + float(np.mean(np.maximum(0.0, 1.0 - margins)))


def svm_subgradient(X, y: Sequence[int], w: np.ndarray, b: float, lam: float) -> tuple[np.ndarray, float]:
    """Gradient of :func:`svm_objective`, exact wherever no margin equals 1."""
    ypm = 2.0 * _as_labels(y) - 1.0
    active = (ypm * (X @ w + b)) < 1.0
    coef = np.where(active, -ypm, 0.0) / len(ypm)
    grad_w = lam * w + np.asarray(X.T @ coef).ravel()
    return grad_w, float(coef.sum())


def _pegasos(X: sp.csr_matrix | np.ndarray, y: np.ndarray, lam: float, epochs: int, seed: int) -> tuple[np.ndarray, float]:
    if lam <= 0:
        raise TrainingError("lambda must be positive")
    if epochs < 1:
        raise TrainingError("epochs must be >= 1")
    n, d = X.shape
    if sp.issparse(X):
        rows = [(X.indices[a:b], X.data[a:b]) for a, b in zip(X.indptr[:-1], X.indptr[1:])]
    else:
        cols = np.arange(d)
        rows = [(cols, X[i]) for i in range(n)]
    row_sq = [float(val @ val) for _, val in rows]
    ypm = 2.0 * y - 1.0
    radius = 1.0 / math.sqrt(lam)
    rng = np.random.default_rng(seed)

    # w = scale * v, so the (1 - eta*lam) shrink is O(1) instead of O(d).
    v = np.zeros(d)
    scale = 1.0
    sq_v = 0.0
    b = 0.0
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n).tolist():
            t += 1
            eta = 1.0 / (lam * t)
            idx, val = rows[i]
            dot_v = float(v[idx] @ val)
            violated = ypm[i] * (scale * dot_v + b) < 1.0
            if t == 1:
                v[:] = 0.0
                scale, sq_v, dot_v = 1.0, 0.0, 0.0
            else:
                scale *= 1.0 - eta * lam
            if violated:
                c = eta * ypm[i] / scale
                v[idx] += c * val
                sq_v += 2.0 * c * dot_v + c * c * row_sq[i]
                b += eta * ypm[i]
            norm_w = scale * math.sqrt(max(sq_v, 0.0))
            if norm_w > radius:
                scale *= radius / norm_w
            if scale < 1e-9:
                v *= scale
                sq_v = float(v @ v)
                scale = 1.0
    return scale * v, b


def _train_linear(X, y: np.ndarray, lam: float, epochs: int, seed: int, input_kind: str) -> LinearSvmModel:
    w, b = _pegasos(X, y, lam, epochs, seed)
    if not np.all(np.isfinite(w)) or not math.isfinite(b):
        raise TrainingError("training diverged to non-finite weights")
    return LinearSvmModel(
        weights=w,
        bias=b,
        lam=lam,
        epochs=epochs,
        seed=seed,
        objective=svm_objective(X, y, w, b, lam),
        input_kind=input_kind,
    )


def train_svm(X: Sequence[SparseVector] | sp.spmatrix, y: Sequence[int], lam: float = DEFAULT_LAMBDA,
              epochs: int = DEFAULT_EPOCHS, seed: int = 0) -> LinearSvmModel:
    labels = _as_labels(y)
    mat = _as_csr(X)
    if mat.shape[0] != len(labels):
        raise TrainingError(f"{mat.shape[0]} feature rows but {len(labels)} labels")
    _check_two_classes(labels)
    return _train_linear(mat, labels, lam, epochs, seed, "sparse")


def train_dense_head(V: Sequence[DenseVector] | np.ndarray, y: Sequence[int], lam: float = DEFAULT_LAMBDA,
                     epochs: int = DEFAULT_EPOCHS, seed: int = 0) -> LinearSvmModel:
    """Same objective as :func:`train_svm`, over fixed-length embeddings."""
    labels = _as_labels(y)
    arr = _as_dense(V)
    if arr.shape[0] != len(labels):
        raise TrainingError(f"{arr.shape[0]} feature rows but {len(labels)} labels")
    _check_two_classes(labels)
    return _train_linear(arr, labels, lam, epochs, seed, "dense")


def _check_dim(expected: int, got: int) -> None:
    if expected != got:
        raise TrainingError(f"dimension mismatch: model expects {expected}, input has {got}")


def _vector_parts(x) -> tuple[int, np.ndarray, np.ndarray | None]:
    if isinstance(x, SparseVector):
        return x.dim, x.indices, x.values
    if isinstance(x, DenseVector):
        x = x.vector
    arr = np.asarray(x, dtype=np.float64)
    return len(arr), arr, None


def svm_score(model: LinearSvmModel, x) -> float:
    dim, a, values = _vector_parts(x)
    _check_dim(model.dim, dim)
    if values is None:
        return float(model.weights @ a) + model.bias
    return float(model.weights[a] @ values) + model.bias


def predict_svm(model: LinearSvmModel, x, span_id: str = "") -> Prediction:
    score = svm_score(model, x)
    return Prediction(span_id, 1 if score >= 0.0 else 0, score)


def train_knn(X: Sequence[SparseVector] | sp.spmatrix, y: Sequence[int], k: int = DEFAULT_K) -> KnnModel:
    labels = _as_labels(y)
    mat = _as_csr(X)
    if mat.shape[0] != len(labels):
        raise TrainingError(f"{mat.shape[0]} feature rows but {len(labels)} labels")
    if k < 1:
        raise TrainingError("k must be >= 1")
    if k > len(labels):
        raise TrainingError(f"k={k} exceeds the {len(labels)} training points")
    return KnnModel(mat, labels, k)


def knn_distances(model: KnnModel, X: sp.csr_matrix) -> np.ndarray:
    """Euclidean distances, one row per query, one column per training point."""
    X = sp.csr_matrix(X, dtype=np.float64)
    _check_dim(model.dim, X.shape[1])
    q_sq = np.asarray(X.multiply(X).sum(axis=1)).ravel()
    cross = np.asarray((X @ model.train.T).todense())
    sq = q_sq[:, None] + model._sq_norms[None, :] - 2.0 * cross
    return np.sqrt(np.maximum(sq, 0.0))


def _knn_vote(model: KnnModel, dist_row: np.ndarray, span_id: str) -> Prediction:
    # Stable sort: equal distances keep training order, so lower index wins.
    nearest = np.argsort(dist_row, kind="stable")[: model.k]
    votes = model.labels[nearest]
    positives = int(votes.sum())
    if positives * 2 > model.k:
        label = 1
    elif positives * 2 < model.k:
        label = 0
    else:
        label = int(votes[0])
    return Prediction(span_id, label, positives / model.k)


def predict_knn(model: KnnModel, x, span_id: str = "") -> Prediction:
    return predict_knn_batch(model, [x], [span_id])[0]


def predict_knn_batch(model: KnnModel, xs, span_ids: Sequence[str] | None = None, chunk: int = 256) -> list[Prediction]:
    mat = _query_matrix(xs, model.dim)
    ids = list(span_ids) if span_ids is not None else [""] * mat.shape[0]
    out = []
    for lo in range(0, mat.shape[0], chunk):
        dists = knn_distances(model, mat[lo : lo + chunk])
        out.extend(_knn_vote(model, row, ids[lo + j]) for j, row in enumerate(dists))
    return out


def _query_matrix(xs, dim: int) -> sp.csr_matrix:
    if sp.issparse(xs):
        return sp.csr_matrix(xs, dtype=np.float64)
    xs = list(xs)
    if xs and not isinstance(xs[0], SparseVector):
        arr = np.array([_vector_parts(x)[1] for x in xs], dtype=np.float64)
        return sp.csr_matrix(arr.reshape(len(xs), -1) if len(xs) else np.zeros((0, dim)))
    try:
        return stack(xs, dim=None if xs else dim)
    except ValueError as exc:
        raise TrainingError(f"dimension mismatch: {exc}") from None


def majority_baseline(y: Sequence[int]) -> MajorityModel:
    labels = _as_labels(y)
    if len(labels) == 0:
        raise TrainingError("empty label list")
    prior = float(labels.mean())
    return MajorityModel(label=1 if prior >= 0.5 else 0, prior=prior)


def predict_baseline(model: MajorityModel, x=None, span_id: str = "") -> Prediction:
    return Prediction(span_id, model.label, model.prior)


def predict(model: Model, x, span_id: str = "") -> Prediction:
    if isinstance(model, LinearSvmModel):
        return predict_svm(model, x, span_id)
    if isinstance(model, KnnModel):
        return predict_knn(model, x, span_id)
    if isinstance(model, MajorityModel):
        return predict_baseline(model, x, span_id)
    raise TypeError(f"unsupported model {type(model).__name__}")


def predict_batch(model: Model, xs, span_ids: Sequence[str]) -> list[Prediction]:
    """Predictions in input order."""
    if isinstance(model, KnnModel):
        return predict_knn_batch(model, xs, span_ids)
    if isinstance(model, LinearSvmModel):
        if sp.issparse(xs):
            xs = sp.csr_matrix(xs)
            _check_dim(model.dim, xs.shape[1])
            # Row-wise scoring keeps results bit-identical to predict_svm.
            return [
                predict_svm(model, SparseVector(xs.indices[a:b], xs.data[a:b], xs.shape[1]), s)
                for s, a, b in zip(span_ids, xs.indptr[:-1], xs.indptr[1:])
            ]
        return [predict_svm(model, x, s) for x, s in zip(xs, span_ids)]
    return [predict(model, None, s) for s in span_ids]


def load_embeddings(path) -> dict[str, np.ndarray]:
    """Read ``{span_id, vector}`` records; every vector must have the same length."""
    from painclf.errors import CorpusError
    from painclf.jsonl import iter_records, require

    out: dict[str, np.ndarray] = {}
    dim = None
    for lineno, rec in iter_records(path):
        span_id = require(rec, "span_id", str, lineno, path)
        raw = require(rec, "vector", list, lineno, path)
        try:
            vec = DenseVector(span_id, np.array(raw, dtype=np.float64)).vector
        except (TypeError, ValueError):
            raise CorpusError("vector must be a list of finite numbers", line=lineno, path=str(path)) from None
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise CorpusError(f"vector has dimension {len(vec)}, expected {dim}", line=lineno, path=str(path))
        if span_id in out:
            raise CorpusError(f"duplicate span_id {span_id!r}", line=lineno, path=str(path))
        out[span_id] = vec
    return out
