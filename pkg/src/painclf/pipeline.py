"""Fitted text classifiers: preprocessing + TF-IDF + a classifier, as one unit."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from painclf.classifiers import (
    DEFAULT_EPOCHS,
    DEFAULT_K,
    DEFAULT_LAMBDA,
    DenseVector,
    Model,
    Prediction,
    majority_baseline,
    predict_batch,
    train_dense_head,
    train_knn,
    train_svm,
)
from painclf.errors import TrainingError
from painclf.features import PreprocessConfig, TfidfModel, fit_tfidf, preprocess, stack, transform

MODEL_KINDS = ("svm", "knn", "baseline", "dense")


@dataclass(frozen=True)
class LabeledSpan:
    span_id: str
    text: str
    label: int


@dataclass(frozen=True)
class PipelineConfig:
    model: str = "svm"
    lam: float = DEFAULT_LAMBDA
    epochs: int = DEFAULT_EPOCHS
    knn_k: int = DEFAULT_K
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.model!r}; expected one of {', '.join(MODEL_KINDS)}")

    @property
    def uses_tfidf(self) -> bool:
        return self.model in ("svm", "knn")

    def to_dict(self) -> dict:
        d: dict = {"model": self.model}
        if self.model in ("svm", "dense"):
            d.update(lam=self.lam, epochs=self.epochs)
        if self.model == "knn":
            d.update(k=self.knn_k, metric="euclidean", weights="uniform")
        if self.uses_tfidf:
            d["tfidf"] = {"idf": "ln((1+N)/(1+df))+1", "tf": "raw", "norm": "l2"}
            d["preprocess"] = self.preprocess.summary()
        return d


@dataclass
class TextClassifier:
    config: PipelineConfig
    model: Model
    tfidf: TfidfModel | None = None
    seed: int = 0

    def featurize(self, texts: Sequence[str]):
        if self.tfidf is None:
            raise TrainingError("this classifier has no TF-IDF stage")
        return stack([transform(self.tfidf, preprocess(t, self.config.preprocess)) for t in texts], dim=self.tfidf.size)

    def predict(self, span_ids: Sequence[str], texts: Sequence[str] | None = None,
                embeddings: Mapping[str, np.ndarray] | None = None) -> list[Prediction]:
        kind = self.config.model
        if kind == "baseline":
            return predict_batch(self.model, None, span_ids)
        if kind == "dense":
            return predict_batch(self.model, _lookup(embeddings, span_ids), span_ids)
        if texts is None:
            raise TrainingError(f"{kind} classifier needs span texts")
        return predict_batch(self.model, self.featurize(texts), span_ids)


def _lookup(embeddings: Mapping[str, np.ndarray] | None, span_ids: Sequence[str]) -> list[np.ndarray]:
    if embeddings is None:
        raise TrainingError("dense classifier needs an embeddings file")
    missing = [s for s in span_ids if s not in embeddings]
    if missing:
        raise TrainingError(f"{len(missing)} spans have no embedding, e.g. {missing[0]!r}")
    return [embeddings[s] for s in span_ids]


def fit_pipeline(config: PipelineConfig, examples: Sequence[LabeledSpan], seed: int,
                 embeddings: Mapping[str, np.ndarray] | None = None,
                 tokens: Sequence[Sequence[str]] | None = None) -> TextClassifier:
    """Fit every stateful stage on ``examples`` only.

    ``tokens`` may carry precomputed preprocessing output aligned with
    ``examples``; preprocessing has no fitted state, so this is only a cache.
    """
    y = [e.label for e in examples]
    kind = config.model
    if kind == "baseline":
        return TextClassifier(config, majority_baseline(y), None, seed)
    if kind == "dense":
        vectors = [DenseVector(e.span_id, v) for e, v in zip(examples, _lookup(embeddings, [e.span_id for e in examples]))]
        return TextClassifier(config, train_dense_head(vectors, y, config.lam, config.epochs, seed), None, seed)

    if tokens is None:
        tokens = [preprocess(e.text, config.preprocess) for e in examples]
    tfidf = fit_tfidf(tokens)
    X = stack([transform(tfidf, t) for t in tokens], dim=tfidf.size)
    if kind == "svm":
        model = train_svm(X, y, config.lam, config.epochs, seed)
    else:
        model = train_knn(X, y, config.knn_k)
    return TextClassifier(config, model, tfidf, seed)
