"""Skip-gram word embeddings with negative sampling, and DoCoV document
descriptors built from them."""

from __future__ import annotations

from collections import Counter
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit


class UnrepresentableDocument(ValueError):
    pass


@dataclass
class EmbeddingModel:
    vocabulary: list[str]
    vectors: np.ndarray  # (V, d) input vectors
    hyperparameters: dict = field(default_factory=dict)
    context_vectors: np.ndarray | None = None

    def __post_init__(self) -> None:
        self._index = {w: i for i, w in enumerate(self.vocabulary)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def __getitem__(self, word: str) -> np.ndarray:
        return self.vectors[self._index[word]]

    def ids(self, forms: Sequence[str]) -> np.ndarray:
        return np.fromiter((self._index[f] for f in forms if f in self._index), dtype=np.int64)


def sgns_loss(vectors: np.ndarray, context_vectors: np.ndarray, centers: np.ndarray,
              contexts: np.ndarray, negatives: np.ndarray) -> float:
    """Mean negative-sampling loss of a batch of (center, context, negatives)."""
    vc = vectors[centers]
    pos = np.einsum("bd,bd->b", vc, context_vectors[contexts])
    neg = np.einsum("bkd,bd->bk", context_vectors[negatives], vc)
    return float(-(log_expit(pos) + log_expit(-neg).sum(axis=1)).mean())


def _pairs(sentences: Sequence[np.ndarray], window: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    centers, contexts = [], []
    for ids in sentences:
        n = len(ids)
        if n < 2:
            continue
        reach = rng.integers(1, window + 1, size=n)  # word2vec-style shrunk window
        for offset in range(1, window + 1):
            if offset >= n:
                break
            i = np.arange(n - offset)
            ok = reach[i] >= offset
            centers.append(ids[i[ok]])
            contexts.append(ids[i[ok] + offset])
            j = i + offset
            ok = reach[j] >= offset
            centers.append(ids[j[ok]])
            contexts.append(ids[j[ok] - offset])
    if not centers:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(centers), np.concatenate(contexts)


def train_skipgram(sentences: Sequence[Sequence[str]], dim: int = 50, window: int = 5, negatives: int = 5,
                   epochs: int = 5, min_count: int = 5, seed: int = 0, lr: float = 0.025,
                   batch_size: int = 256,
                   callback: Callable[[int, np.ndarray, np.ndarray], None] | None = None) -> EmbeddingModel:
    """Train skip-gram with negative sampling.

    Negatives are drawn from the unigram distribution raised to 0.75. All
    randomness comes from a single ``numpy`` generator seeded with ``seed``,
    and updates are applied sequentially in mini-batches, so a given input
    and seed always yield the same vectors. The learning rate decays
    linearly to ``lr * 1e-4``. ``callback(epoch, vectors, context_vectors)``
    runs after every epoch.
    """
    if not sentences:
        raise ValueError("empty corpus")
    freq = Counter(w for s in sentences for w in s)
    vocab = sorted((w for w, c in freq.items() if c >= min_count), key=lambda w: (-freq[w], w))
    if not vocab:
        raise ValueError(f"empty vocabulary after min_count={min_count}")
    index = {w: i for i, w in enumerate(vocab)}
    ids = [np.fromiter((index[w] for w in s if w in index), dtype=np.int64) for s in sentences]
    rng = np.random.default_rng(seed)
    V = len(vocab)
    W_in = (rng.random((V, dim)) - 0.5) / dim
    W_out = np.zeros((V, dim))
    noise = np.array([freq[w] for w in vocab], dtype=float) ** 0.75
    noise_cdf = np.cumsum(noise / noise.sum())
    noise_cdf[-1] = 1.0

    epoch_pairs = [_pairs(ids, window, rng) for _ in range(epochs)]
    total_steps = max(1, sum(len(c) for c, _ in epoch_pairs))
    done = 0
    losses: list[float] = []
    for epoch, (centers, contexts) in enumerate(epoch_pairs):
        order = rng.permutation(len(centers))
        centers, contexts = centers[order], contexts[order]
        epoch_loss, seen = 0.0, 0
        for start in range(0, len(centers), batch_size):
            c = centers[start:start + batch_size]
            o = contexts[start:start + batch_size]
            neg = np.searchsorted(noise_cdf, rng.random((len(c), negatives)), side="right")
            alpha = lr * max(1e-4, 1.0 - done / total_steps)
            vc = W_in[c]
            uo = W_out[o]
            un = W_out[neg]
            pos_dot = np.einsum("bd,bd->b", vc, uo)
            neg_dot = np.einsum("bkd,bd->bk", un, vc)
            g_pos = expit(pos_dot) - 1.0
            g_neg = expit(neg_dot)
            epoch_loss -= float(log_expit(pos_dot).sum() + log_expit(-neg_dot).sum())
            seen += len(c)
            d_vc = g_pos[:, None] * uo + np.einsum("bk,bkd->bd", g_neg, un)
            np.add.at(W_out, o, -alpha * g_pos[:, None] * vc)
            np.add.at(W_out, neg.ravel(), -alpha * (g_neg[:, :, None] * vc[:, None, :]).reshape(-1, dim))
            np.add.at(W_in, c, -alpha * d_vc)
            done += len(c)
        losses.append(epoch_loss / max(seen, 1))
        if callback is not None:
            callback(epoch, W_in, W_out)
    if not np.all(np.isfinite(W_in)):
        raise FloatingPointError("non-finite embedding vectors; lower the learning rate")
    hyper = dict(dim=dim, window=window, negatives=negatives, epochs=epochs, min_count=min_count,
                 seed=seed, lr=lr, batch_size=batch_size, epoch_loss=losses)
    return EmbeddingModel(vocab, W_in, hyper, W_out)


def docov_length(dim: int, include_mean: bool = False) -> int:
    return dim * (dim + 1) // 2 + (dim if include_mean else 0)


def docov(forms: Sequence[str], embeddings: EmbeddingModel, include_mean: bool = False) -> np.ndarray:
    """Row-major upper triangle of the population covariance of the document's
    word vectors (with multiplicity), optionally preceded by their mean."""
    ids = embeddings.ids(forms)
    if len(ids) == 0:
        raise UnrepresentableDocument("unrepresentable document: no in-vocabulary form")
    X = embeddings.vectors[ids]
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / len(ids)
    upper = cov[np.triu_indices(embeddings.dim)]
    return np.concatenate([mean, upper]) if include_mean else upper
