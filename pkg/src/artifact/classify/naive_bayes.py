"""Multinomial Naive Bayes with Laplace smoothing."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from artifact.classify.features import LabelError, build_vocabulary, count_matrix


@dataclass
class NaiveBayesModel:
    labels: list[str]
    vocabulary: list[str]
    log_prior: np.ndarray  # (K,)
    log_cond: np.ndarray  # (K, V)
    alpha: float = 1.0

    def __post_init__(self) -> None:
        self._index = {w: j for j, w in enumerate(self.vocabulary)}

    def joint_log_likelihood(self, forms: Sequence[str]) -> np.ndarray:
        cols = [self._index[f] for f in forms if f in self._index]
        if not cols:
            return self.log_prior.copy()
        return self.log_prior + self.log_cond[:, cols].sum(axis=1)


def train_nb(docs: Sequence[Sequence[str]], labels: Sequence[str], alpha: float = 1.0,
             modalities: Sequence[str] | None = None) -> NaiveBayesModel:
    """``prior(c) = n_c / n`` and ``P(w|c) = (count(w,c) + alpha) / (count(.,c) + alpha*|V|)``."""
    if len(docs) == 0:
        raise LabelError("empty training set")
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    classes = sorted(set(modalities) if modalities is not None else set(labels))
    y = np.array([classes.index(lbl) for lbl in labels])
    n_per_class = np.bincount(y, minlength=len(classes))
    if np.any(n_per_class == 0):
        empty = [c for c, n in zip(classes, n_per_class) if n == 0]
        raise LabelError(f"modalities without training documents: {empty}")
    vocab = build_vocabulary(docs)
    X = count_matrix(docs, vocab)
    onehot = np.zeros((len(classes), len(docs)))
    onehot[y, np.arange(len(docs))] = 1.0
    counts = np.asarray(X.T @ onehot.T).T  # K x V
    denom = counts.sum(axis=1, keepdims=True) + alpha * len(vocab)
    log_cond = np.log(counts + alpha) - np.log(denom)
    log_prior = np.log(n_per_class / n_per_class.sum())
    return NaiveBayesModel(classes, vocab, log_prior, log_cond, float(alpha))


def predict_nb(model: NaiveBayesModel, forms: Sequence[str]) -> tuple[str, float]:
    """Most probable modality and its log-posterior margin over the runner-up.

    Out-of-vocabulary forms are skipped; ties go to the lexicographically
    smallest modality (labels are stored sorted).
    """
    jll = model.joint_log_likelihood(forms)
    best = int(np.argmax(jll))
    if len(jll) < 2:
        return model.labels[best], 0.0
    runner_up = np.max(np.delete(jll, best))
    return model.labels[best], float(jll[best] - runner_up)
