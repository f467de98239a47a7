"""Nearest-centroid (cosine) classification of document descriptors."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from artifact.classify.features import LabelError


class UndefinedCosine(ValueError):
    pass


@dataclass
class CentroidModel:
    labels: list[str]
    centroids: np.ndarray  # (K, D)
    include_mean: bool = False

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def train_centroid(descriptors: Sequence[np.ndarray], labels: Sequence[str], include_mean: bool = False,
                   modalities: Sequence[str] | None = None) -> CentroidModel:
    """Per-modality arithmetic mean of the training descriptors."""
    classes = sorted(set(modalities) if modalities is not None else set(labels))
    if len(descriptors) != len(labels):
        raise ValueError("descriptors and labels differ in length")
    if not descriptors:
        raise LabelError("no representable training document")
    X = np.vstack(descriptors)
    y = np.array([classes.index(lbl) for lbl in labels])
    missing = [c for k, c in enumerate(classes) if not np.any(y == k)]
    if missing:
        raise LabelError(f"modalities without a representable document: {missing}")
    centroids = np.vstack([X[y == k].mean(axis=0) for k in range(len(classes))])
    return CentroidModel(classes, centroids, include_mean)


def cosine_scores(model: CentroidModel, descriptor: np.ndarray) -> np.ndarray:
    d = np.asarray(descriptor, dtype=float)
    dn = np.linalg.norm(d)
    cn = np.linalg.norm(model.centroids, axis=1)
    if dn == 0 or np.any(cn == 0):
        raise UndefinedCosine("undefined cosine: zero descriptor or zero centroid")
    return (model.centroids @ d) / (cn * dn)


def predict_centroid(model: CentroidModel, descriptor: np.ndarray) -> tuple[str, float]:
    """Modality of the most cosine-similar centroid (ties to the earlier label)."""
    sims = cosine_scores(model, descriptor)
    best = int(np.argmax(sims))
    return model.labels[best], float(sims[best])
