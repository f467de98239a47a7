"""Labeled views of a corpus and sparse count features."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from artifact.corpus_io import Corpus
from artifact.text_prep import PrepConfig, lemmatize, tokenize


class LabelError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledCorpus:
    """Documents of a corpus that carry the ``target`` variable."""

    target: str
    doc_ids: tuple[int, ...]
    forms: tuple[tuple[str, ...], ...]
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if not (len(self.doc_ids) == len(self.forms) == len(self.labels)):
            raise ValueError("doc_ids, forms and labels must have equal length")

    @property
    def modalities(self) -> list[str]:
        return sorted(set(self.labels))

    def __len__(self) -> int:
        return len(self.doc_ids)

    def subset(self, index: Sequence[int]) -> LabeledCorpus:
        return LabeledCorpus(
            self.target,
            tuple(self.doc_ids[i] for i in index),
            tuple(self.forms[i] for i in index),
            tuple(self.labels[i] for i in index),
        )


def doc_forms(corpus: Corpus, prep: PrepConfig | None = None) -> list[tuple[str, ...]]:
    prep = prep or PrepConfig()
    return [tuple(lemmatize(tokenize(d.text, prep), prep)) for d in corpus]


def labeled_corpus(corpus: Corpus, target: str, prep: PrepConfig | None = None,
                   require_two: bool = True) -> LabeledCorpus:
    prep = prep or PrepConfig()
    ids, forms, labels = [], [], []
    for doc in corpus:
        value = doc.variables.get(target)
        if value is None:
            continue
        ids.append(doc.id)
        forms.append(tuple(lemmatize(tokenize(doc.text, prep), prep)))
        labels.append(value)
    lc = LabeledCorpus(target, tuple(ids), tuple(forms), tuple(labels))
    if require_two and len(set(labels)) < 2:
        raise LabelError(f"target {target!r} needs at least two modalities, found {sorted(set(labels))}")
    return lc


def count_matrix(docs: Sequence[Sequence[str]], vocabulary: Sequence[str]) -> sp.csr_matrix:
    """Rows of term counts over a fixed vocabulary; unknown forms ignored."""
    index = {w: j for j, w in enumerate(vocabulary)}
    indptr = [0]
    cols: list[int] = []
    for forms in docs:
        cols.extend(index[f] for f in forms if f in index)
        indptr.append(len(cols))
    m = sp.csr_matrix(
        (np.ones(len(cols)), np.asarray(cols, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(docs), len(vocabulary)),
    )
    m.sum_duplicates()
    return m


def build_vocabulary(docs: Sequence[Sequence[str]], min_count: int = 1) -> list[str]:
    counts: dict[str, int] = {}
    for forms in docs:
        for f in forms:
            counts[f] = counts.get(f, 0) + 1
    return sorted(w for w, c in counts.items() if c >= min_count)
