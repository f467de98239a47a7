"""Train the three voters for a target and predict with all of them."""

from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from artifact.classify.centroid import CentroidModel, UndefinedCosine, predict_centroid, train_centroid
from artifact.classify.embeddings import EmbeddingModel, UnrepresentableDocument, docov, train_skipgram
from artifact.classify.features import LabeledCorpus
from artifact.classify.logistic import LogisticModel, predict_logreg_many, train_logreg
from artifact.classify.naive_bayes import NaiveBayesModel, predict_nb, train_nb
from artifact.classify.vote import PredictionSet, combine


@dataclass(frozen=True)
class EmbeddingConfig:
    dim: int = 50
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    min_count: int = 5
    lr: float = 0.025
    batch_size: int = 256


@dataclass(frozen=True)
class ClassifierConfig:
    alpha: float = 1.0
    l2: float = 1e-4
    lr_epochs: int = 20
    lr_rate: float = 0.1
    lr_batch_size: int = 16
    tfidf: bool = False
    include_mean: bool = False
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)

    @classmethod
    def from_dict(cls, d: dict | None) -> ClassifierConfig:
        d = dict(d or {})
        emb = EmbeddingConfig(**d.pop("embedding", {}) or {})
        return cls(embedding=emb, **d)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class TargetModels:
    target: str
    nb: NaiveBayesModel
    lr: LogisticModel
    centroid: CentroidModel

    @property
    def labels(self) -> list[str]:
        return self.nb.labels


def train_embeddings(texts: Sequence[Sequence[str]], config: EmbeddingConfig, seed: int = 0) -> EmbeddingModel:
    return train_skipgram(texts, dim=config.dim, window=config.window, negatives=config.negatives,
                          epochs=config.epochs, min_count=config.min_count, seed=seed, lr=config.lr,
                          batch_size=config.batch_size)


def descriptors(forms: Sequence[Sequence[str]], embeddings: EmbeddingModel,
                include_mean: bool) -> list[np.ndarray | None]:
    out: list[np.ndarray | None] = []
    for f in forms:
        try:
            out.append(docov(f, embeddings, include_mean))
        except UnrepresentableDocument:
            out.append(None)
    return out


def train_target(train: LabeledCorpus, embeddings: EmbeddingModel, config: ClassifierConfig | None = None,
                 seed: int = 0) -> TargetModels:
    config = config or ClassifierConfig()
    mods = train.modalities
    nb = train_nb(train.forms, train.labels, alpha=config.alpha, modalities=mods)
    lr = train_logreg(train.forms, train.labels, l2=config.l2, epochs=config.lr_epochs, lr=config.lr_rate,
                      seed=seed, batch_size=config.lr_batch_size, tfidf=config.tfidf, modalities=mods)
    desc = descriptors(train.forms, embeddings, config.include_mean)
    keep = [i for i, d in enumerate(desc) if d is not None]
    cent = train_centroid([desc[i] for i in keep], [train.labels[i] for i in keep],
                          config.include_mean, modalities=mods)
    return TargetModels(train.target, nb, lr, cent)


def _centroid_vote(model: CentroidModel, d: np.ndarray | None) -> tuple[str | None, float | None]:
    if d is None:
        return None, None
    try:
        return predict_centroid(model, d)
    except UndefinedCosine:
        return None, None


def predict_target(models: TargetModels, embeddings: EmbeddingModel, doc_ids: Sequence[int],
                   forms: Sequence[Sequence[str]], jobs: int = 1) -> PredictionSet:
    """Predictions of all three voters plus the vote. Results do not depend
    on ``jobs``: chunks are processed independently and reassembled in order."""
    n = len(forms)
    bounds = np.linspace(0, n, max(1, min(jobs, n)) + 1, dtype=int) if n else np.array([0, 0])

    def work(lo_hi):
        lo, hi = lo_hi
        chunk = forms[lo:hi]
        nb = [predict_nb(models.nb, f) for f in chunk]
        lr = predict_logreg_many(models.lr, chunk) if len(chunk) else []
        cent = [_centroid_vote(models.centroid, d)
                for d in descriptors(chunk, embeddings, models.centroid.include_mean)]
        return nb, lr, cent

    spans = list(zip(bounds[:-1], bounds[1:]))
    if jobs > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(work, spans))
    else:
        parts = [work(s) for s in spans]
    nb = [x for p in parts for x in p[0]]
    lr = [x for p in parts for x in p[1]]
    cent = [x for p in parts for x in p[2]]
    return combine(models.target, doc_ids, nb, lr, cent)
