"""L2-regularized logistic regression trained by seeded mini-batch SGD.

Two modalities give a single binary task whose positive class is the
lexicographically smallest modality; K > 2 modalities give K
one-against-all tasks.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from artifact.classify.features import LabelError, build_vocabulary, count_matrix


@dataclass
class LogisticModel:
    labels: list[str]
    vocabulary: list[str]
    weights: np.ndarray  # (tasks, V)
    bias: np.ndarray  # (tasks,)
    idf: np.ndarray | None = None
    hyperparameters: dict = field(default_factory=dict)

    @property
    def n_tasks(self) -> int:
        return len(self.bias)

    def features(self, docs: Sequence[Sequence[str]]) -> sp.csr_matrix:
        X = count_matrix(docs, self.vocabulary)
        if self.idf is not None:
            X = sp.csr_matrix(X.multiply(self.idf[None, :]))
        return X

    def task_scores(self, X) -> np.ndarray:
        """Sigmoid score of every task for every row, shape (n, tasks)."""
        return expit(np.asarray(X @ self.weights.T) + self.bias[None, :])


def logistic_loss_and_grad(w: np.ndarray, b: float, X, y: np.ndarray, l2: float) -> tuple[float, np.ndarray, float]:
    """Mean binary logistic loss plus ``l2 * ||w||^2`` and its gradient."""
    z = np.asarray(X @ w).ravel() + b
    n = len(y)
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + l2 * (w @ w))
    r = expit(z) - y
    gw = np.asarray(X.T @ r).ravel() / n + 2.0 * l2 * w
    gb = float(r.sum() / n)
    return loss, gw, gb


def _tfidf(X: sp.csr_matrix) -> np.ndarray:
    df = np.bincount(X.indices, minlength=X.shape[1])
    return np.log((1.0 + X.shape[0]) / (1.0 + df)) + 1.0


def train_logreg(docs: Sequence[Sequence[str]], labels: Sequence[str], l2: float = 1e-4, epochs: int = 20,
                 lr: float = 0.1, seed: int = 0, batch_size: int = 16, tfidf: bool = False,
                 modalities: Sequence[str] | None = None) -> LogisticModel:
    classes = sorted(set(modalities) if modalities is not None else set(labels))
    if len(classes) < 2:
        raise LabelError("logistic regression needs at least two modalities")
    if l2 < 0:
        raise ValueError("l2 must be >= 0")
    vocab = build_vocabulary(docs)
    model = LogisticModel(classes, vocab, np.zeros((0, len(vocab))), np.zeros(0),
                          hyperparameters=dict(l2=l2, epochs=epochs, lr=lr, seed=seed,
                                               batch_size=batch_size, tfidf=tfidf))
    X = count_matrix(docs, vocab)
    if tfidf:
        model.idf = _tfidf(X)
        X = sp.csr_matrix(X.multiply(model.idf[None, :]))
    y_idx = np.array([classes.index(lbl) for lbl in labels])
    targets = [classes[0]] if len(classes) == 2 else classes
    rng = np.random.default_rng(seed)
    order_seeds = rng.integers(0, 2**32 - 1, size=epochs)
    W = np.zeros((len(targets), len(vocab)))
    B = np.zeros(len(targets))
    n = X.shape[0]
    for t, positive in enumerate(targets):
        y = (y_idx == classes.index(positive)).astype(float)
        w, b = W[t], 0.0
        with np.errstate(over="ignore", invalid="ignore"):  # divergence is reported below
            for epoch in range(epochs):
                step = lr / (1.0 + epoch)
                order = np.random.default_rng(order_seeds[epoch]).permutation(n)
                for start in range(0, n, batch_size):
                    rows = order[start:start + batch_size]
                    _, gw, gb = logistic_loss_and_grad(w, b, X[rows], y[rows], l2)
                    w -= step * gw
                    b -= step * gb
                loss, _, _ = logistic_loss_and_grad(w, b, X, y, l2)
                if not np.isfinite(loss) or not np.all(np.isfinite(w)):
                    raise FloatingPointError(
                        f"non-finite logistic loss for task {positive!r} at epoch {epoch} "
                        f"(lr={lr}, l2={l2}); lower the learning rate"
                    )
        W[t], B[t] = w, b
    model.weights, model.bias = W, B
    return model


def predict_logreg(model: LogisticModel, forms: Sequence[str]) -> tuple[str, float]:
    """Label and the sigmoid score backing it.

    Binary: score >= 0.5 selects the positive (first) modality and the
    reported score is the probability of the chosen one. One-against-all:
    the task with the highest score wins, ties to the earlier modality.
    """
    return predict_logreg_many(model, [forms])[0]


def predict_logreg_many(model: LogisticModel, docs: Sequence[Sequence[str]]) -> list[tuple[str, float]]:
    scores = model.task_scores(model.features(docs))
    out = []
    for row in scores:
        if model.n_tasks == 1:
            s = float(row[0])
            out.append((model.labels[0], s) if s >= 0.5 else (model.labels[1], 1.0 - s))
        else:
            best = int(np.argmax(row))
            out.append((model.labels[best], float(row[best])))
    return out
