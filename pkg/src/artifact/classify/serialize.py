"""Versioned, checksummed model files.

Every file is a one-line JSON header followed by a body. Naive Bayes,
logistic and centroid bodies are canonical JSON; embedding bodies are
little-endian float64 matrices. Checksums cover the header and the raw body
bytes, so any altered byte is rejected.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from artifact.classify.centroid import CentroidModel
from artifact.classify.embeddings import EmbeddingModel
from artifact.classify.logistic import LogisticModel
from artifact.classify.naive_bayes import NaiveBayesModel

FORMAT = "artifact-model"
VERSION = 1
_DTYPE = np.dtype("<f8")


class ModelFormatError(ValueError):
    pass


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def _payload(model) -> tuple[str, dict]:
    if isinstance(model, NaiveBayesModel):
        return "nb", dict(labels=model.labels, vocabulary=model.vocabulary, alpha=model.alpha,
                          log_prior=model.log_prior.tolist(), log_cond=model.log_cond.tolist())
    if isinstance(model, LogisticModel):
        return "logreg", dict(labels=model.labels, vocabulary=model.vocabulary,
                              weights=model.weights.tolist(), bias=model.bias.tolist(),
                              idf=None if model.idf is None else model.idf.tolist(),
                              hyperparameters=model.hyperparameters)
    if isinstance(model, CentroidModel):
        return "centroid", dict(labels=model.labels, centroids=model.centroids.tolist(),
                                include_mean=model.include_mean)
    raise TypeError(f"cannot serialize {type(model).__name__}")


def _matrix(rows, n_cols: int | None = None) -> np.ndarray:
    a = np.asarray(rows, dtype=float)
    if a.ndim == 1 and a.size == 0 and n_cols is not None:
        a = a.reshape(0, n_cols)
    return a


def _build(kind: str, p: dict):
    if kind == "nb":
        return NaiveBayesModel(list(p["labels"]), list(p["vocabulary"]), np.asarray(p["log_prior"], float),
                               _matrix(p["log_cond"]).reshape(len(p["labels"]), len(p["vocabulary"])),
                               float(p["alpha"]))
    if kind == "logreg":
        bias = np.asarray(p["bias"], float)
        return LogisticModel(list(p["labels"]), list(p["vocabulary"]),
                             _matrix(p["weights"]).reshape(len(bias), len(p["vocabulary"])), bias,
                             None if p["idf"] is None else np.asarray(p["idf"], float),
                             dict(p["hyperparameters"]))
    if kind == "centroid":
        return CentroidModel(list(p["labels"]), _matrix(p["centroids"]), bool(p["include_mean"]))
    raise ModelFormatError(f"unknown model kind {kind!r}")


def _header_line(header: dict) -> bytes:
    header["header_sha256"] = _digest(_canonical(header))
    return _canonical(header) + b"\n"


def dumps_model(model) -> bytes:
    if isinstance(model, EmbeddingModel):
        return _dumps_embeddings(model)
    kind, payload = _payload(model)
    body = _canonical(payload)
    header = dict(format=FORMAT, version=VERSION, kind=kind, nbytes=len(body), sha256=_digest(body))
    return _header_line(header) + body


def _check_header(doc) -> None:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ModelFormatError("not a model file")
    if doc.get("version") != VERSION:
        raise ModelFormatError(f"unsupported model version {doc.get('version')!r} (expected {VERSION})")


def _check_body(header: dict, body: bytes) -> None:
    if len(body) != header.get("nbytes"):
        raise ModelFormatError(f"truncated model body: {len(body)} of {header.get('nbytes')} bytes")
    if _digest(body) != header.get("sha256"):
        raise ModelFormatError("checksum mismatch")


def loads_model(data: bytes):
    nl = data.find(b"\n")
    if nl < 0:
        raise ModelFormatError("truncated model file")
    try:
        header = json.loads(data[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt model header: {exc}") from None
    _check_header(header)
    claimed = header.pop("header_sha256", None)
    if _digest(_canonical(header)) != claimed:
        raise ModelFormatError("header checksum mismatch")
    body = data[nl + 1:]
    _check_body(header, body)
    if header.get("kind") == "embeddings":
        return _loads_embeddings(header, body)
    try:
        return _build(header.get("kind"), json.loads(body.decode("utf-8")))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"malformed payload: {exc}") from None


def _dumps_embeddings(model: EmbeddingModel) -> bytes:
    mats = [model.vectors] if model.context_vectors is None else [model.vectors, model.context_vectors]
    body = b"".join(np.ascontiguousarray(m, dtype=_DTYPE).tobytes() for m in mats)
    header = dict(format=FORMAT, version=VERSION, kind="embeddings", vocabulary=model.vocabulary,
                  dim=model.dim, matrices=len(mats), hyperparameters=model.hyperparameters,
                  nbytes=len(body), sha256=_digest(body))
    return _header_line(header) + body


def _loads_embeddings(header: dict, body: bytes) -> EmbeddingModel:
    V, d, m = len(header["vocabulary"]), header["dim"], header["matrices"]
    if V * d * m * _DTYPE.itemsize != len(body):
        raise ModelFormatError("embedding body does not match the declared shape")
    arr = np.frombuffer(body, dtype=_DTYPE).reshape(m, V, d).astype(np.float64)
    ctx = arr[1].copy() if m > 1 else None
    return EmbeddingModel(list(header["vocabulary"]), arr[0].copy(), dict(header["hyperparameters"]), ctx)


def save_model(model, path: str | Path) -> None:
    Path(path).write_bytes(dumps_model(model))


def load_model(path: str | Path):
    return loads_model(Path(path).read_bytes())
