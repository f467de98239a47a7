"""Tokenization, lemmatization, context-unit segmentation and the
document-term matrix."""

from __future__ import annotations

import csv
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from artifact.corpus_io import Corpus

# Letter runs with internal hyphens; apostrophes, digits and punctuation separate tokens.
TOKEN_RE = re.compile(r"[^\W\d_]+(?:-[^\W\d_]+)*")
SENTENCE_END_RE = re.compile(r"[.!?;:…]")


@dataclass(frozen=True)
class PrepConfig:
    lowercase: bool = True
    lemma_table: Mapping[str, str] | None = None
    stopword_list: frozenset[str] | None = None
    min_form_freq: int = 1
    target_unit_length: int = 40

    def __post_init__(self) -> None:
        if self.min_form_freq < 1:
            raise ValueError("min_form_freq must be >= 1")
        if self.target_unit_length < 5:
            raise ValueError("target_unit_length must be >= 5")
        if self.stopword_list is not None and not isinstance(self.stopword_list, frozenset):
            object.__setattr__(self, "stopword_list", frozenset(self.stopword_list))


@dataclass(frozen=True)
class ContextUnit:
    unit_id: int
    parent_doc: int
    forms: tuple[str, ...]


@dataclass
class DocumentTermMatrix:
    """Sparse count matrix of rows (units or documents) by retained vocabulary."""

    counts: sp.csr_matrix
    vocabulary: list[str]
    row_docs: np.ndarray  # parent document of each row
    row_ids: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        if self.row_ids is None:
            self.row_ids = np.arange(self.counts.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    @property
    def binary(self) -> sp.csr_matrix:
        b = self.counts.copy()
        b.data = (b.data >= 1).astype(np.int64)
        b.eliminate_zeros()
        return b

    def column_totals(self) -> np.ndarray:
        return np.asarray(self.counts.sum(axis=0)).ravel()

    def to_coo_csv(self, path) -> None:
        coo = self.counts.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("row", "col", "count"))
            for i in order:
                w.writerow((int(coo.row[i]), int(coo.col[i]), int(coo.data[i])))

    def write_vocabulary(self, path) -> None:
        Path(path).write_text("".join(f"{v}\n" for v in self.vocabulary), encoding="utf-8")


def tokenize(text: str, config: PrepConfig | None = None) -> list[str]:
    config = config or PrepConfig()
    if config.lowercase:
        text = text.lower()
    return TOKEN_RE.findall(text)


def tokenize_with_breaks(text: str, config: PrepConfig | None = None) -> tuple[list[str], set[int]]:
    """Tokens plus sentence-break positions.

    A position ``p`` in the result means a sentence ends after the first
    ``p`` tokens.
    """
    config = config or PrepConfig()
    if config.lowercase:
        text = text.lower()
    tokens: list[str] = []
    breaks: set[int] = set()
    last = 0
    for m in TOKEN_RE.finditer(text):
        if tokens and SENTENCE_END_RE.search(text, last, m.start()):
            breaks.add(len(tokens))
        tokens.append(m.group())
        last = m.end()
    if tokens and SENTENCE_END_RE.search(text, last):
        breaks.add(len(tokens))
    return tokens, breaks


def lemmatize(forms: Sequence[str], config: PrepConfig | None = None) -> list[str]:
    config = config or PrepConfig()
    table = config.lemma_table
    lemmas = [table.get(f, f) for f in forms] if table else list(forms)
    if config.stopword_list:
        stop = config.stopword_list
        lemmas = [lem for lem in lemmas if lem not in stop]
    return lemmas


def prepare_document(text: str, config: PrepConfig) -> tuple[list[str], set[int]]:
    """Lemma stream of a text with sentence breaks re-indexed onto it."""
    tokens, breaks = tokenize_with_breaks(text, config)
    table = config.lemma_table or {}
    stop = config.stopword_list or frozenset()
    lemmas: list[str] = []
    lemma_breaks: set[int] = set()
    for i, tok in enumerate(tokens):
        if i in breaks and lemmas:
            lemma_breaks.add(len(lemmas))
        lem = table.get(tok, tok)
        if lem not in stop:
            lemmas.append(lem)
    if len(tokens) in breaks:
        lemma_breaks.add(len(lemmas))
    return lemmas, lemma_breaks


def cut_points(n: int, breaks: Iterable[int], target: int) -> list[int]:
    """Greedy segmentation of a stream of length ``n``.

    While more than ``target`` lemmas remain, cut at the sentence break
    closest to ``start + target`` inside ``[start + target/2, start + 1.5*target]``
    (earlier break on ties), or at ``start + target`` when there is none.
    A final remainder shorter than ``target/2`` is merged into the previous
    unit if the merge stays within ``1.5*target``.
    Returns the end offsets of the units.
    """
    if n == 0:
        return []
    lo_frac, hi_frac = target / 2, target * 1.5
    sorted_breaks = sorted(b for b in breaks if 0 < b < n)
    ends: list[int] = []
    start = 0
    while n - start > target:
        lo, hi, ideal = start + lo_frac, start + hi_frac, start + target
        candidates = [b for b in sorted_breaks if lo <= b <= hi]
        if candidates:
            cut = min(candidates, key=lambda b: (abs(b - ideal), b))
        else:
            cut = start + target
        ends.append(cut)
        start = cut
    if ends and n - start < lo_frac:
        prev_start = ends[-2] if len(ends) > 1 else 0
        if n - prev_start <= hi_frac:
            ends.pop()
    ends.append(n)
    return ends


def segment(corpus: Corpus, config: PrepConfig | None = None) -> list[ContextUnit]:
    config = config or PrepConfig()
    units: list[ContextUnit] = []
    for doc in corpus:
        lemmas, breaks = prepare_document(doc.text, config)
        start = 0
        for end in cut_points(len(lemmas), breaks, config.target_unit_length):
            units.append(ContextUnit(len(units), doc.id, tuple(lemmas[start:end])))
            start = end
    return units


def document_units(corpus: Corpus, config: PrepConfig | None = None) -> list[ContextUnit]:
    """One unit per document (whole-document DTM mode); empty documents included."""
    config = config or PrepConfig()
    return [
        ContextUnit(doc.id, doc.id, tuple(prepare_document(doc.text, config)[0]))
        for doc in corpus
    ]


def _assemble(streams: Iterable[Sequence[str]], config: PrepConfig):
    index: dict[str, int] = {}
    indptr = [0]
    chunks: list[np.ndarray] = []
    for forms in streams:
        ids = np.fromiter((index.setdefault(f, len(index)) for f in forms), dtype=np.int32, count=len(forms))
        chunks.append(ids)
        indptr.append(indptr[-1] + len(ids))
    n_rows = len(indptr) - 1
    if n_rows == 0:
        raise ValueError("no units to build a matrix from")
    col = np.concatenate(chunks) if chunks else np.empty(0, np.int32)
    raw = sp.csr_matrix(
        (np.ones(len(col), dtype=np.int64), col, np.asarray(indptr, dtype=np.int64)),
        shape=(n_rows, len(index)),
    )
    raw.sum_duplicates()
    totals = np.bincount(raw.indices, weights=raw.data, minlength=len(index))
    forms_by_id = list(index)
    keep = sorted(np.flatnonzero(totals >= config.min_form_freq).tolist(), key=forms_by_id.__getitem__)
    if not keep:
        raise ValueError("no retained forms")
    counts = raw[:, keep].tocsr()
    counts.sort_indices()
    return counts, [forms_by_id[i] for i in keep]


def build_dtm(units: Sequence[ContextUnit], config: PrepConfig | None = None) -> DocumentTermMatrix:
    """Count matrix over ``units``; columns are the lemmas with total
    frequency >= ``min_form_freq``, in lexicographic order."""
    config = config or PrepConfig()
    if not units:
        raise ValueError("no units to build a matrix from")
    counts, vocab = _assemble((u.forms for u in units), config)
    return DocumentTermMatrix(
        counts=counts,
        vocabulary=vocab,
        row_docs=np.array([u.parent_doc for u in units], dtype=np.int64),
        row_ids=np.array([u.unit_id for u in units], dtype=np.int64),
    )


def build_document_dtm(corpus: Corpus, config: PrepConfig | None = None) -> DocumentTermMatrix:
    """Whole-document matrix built in a single streaming pass.

    Equivalent to ``build_dtm(document_units(corpus, config), config)`` but
    never holds the token strings of more than one document at a time.
    """
    config = config or PrepConfig()
    if not len(corpus):
        raise ValueError("no units to build a matrix from")
    counts, vocab = _assemble((lemmatize(tokenize(d.text, config), config) for d in corpus), config)
    ids = np.arange(len(corpus), dtype=np.int64)
    return DocumentTermMatrix(counts=counts, vocabulary=vocab, row_docs=ids, row_ids=ids.copy())


def unit_variables(units: Sequence[ContextUnit], corpus: Corpus) -> list[Mapping[str, str]]:
    """Variables inherited by each unit from its parent document."""
    return [corpus[u.parent_doc].variables for u in units]


def load_lemma_table(path) -> dict[str, str]:
    with open(path, encoding="utf-8", newline="") as fh:
        return {row[0]: row[1] for row in csv.reader(fh) if len(row) >= 2 and row[0]}


def load_stopwords(path) -> frozenset[str]:
    with open(path, encoding="utf-8", newline="") as fh:
        return frozenset(row[0] for row in csv.reader(fh) if row and row[0])


def bundled_french_lemmas() -> dict[str, str]:
    """Small optional French lemma table shipped with the package."""
    with resources.as_file(resources.files("artifact.data") / "fr_lemmas.csv") as p:
        return load_lemma_table(p)


def bundled_french_stopwords() -> frozenset[str]:
    with resources.as_file(resources.files("artifact.data") / "fr_stopwords.csv") as p:
        return load_stopwords(p)
