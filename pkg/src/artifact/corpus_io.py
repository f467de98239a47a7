"""Starred-corpus reading, writing and summary statistics.

File format
-----------
A corpus file is UTF-8 text. A line beginning with ``****`` opens a new
document; each whitespace-separated token of that line starting with ``*``
encodes one variable as ``*name_modality``, split on the *last* underscore.
Every following line, up to the next ``****`` line, belongs to the document
text (lines are joined with ``\\n``). Lines before the first header are
ignored.

Because the split happens on the last underscore, a parsed modality never
contains ``_``. When writing, underscores inside a modality are replaced by
``-`` so that the output always re-parses; variable names may contain
underscores freely.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import TYPE_CHECKING, TextIO

if TYPE_CHECKING:
    from artifact.classify.vote import PredictionSet
    from artifact.text_prep import PrepConfig

HEADER_MARK = "****"
STATS_HEADER = ("n_texts", "n_forms", "n_occurrences", "n_lemmas")


class CorpusFormatError(ValueError):
    """Malformed starred-corpus input or an unrepresentable corpus."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class VariableCollisionError(ValueError):
    pass


@dataclass(frozen=True)
class Document:
    id: int
    text: str
    variables: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", MappingProxyType(dict(self.variables)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Document):
            return NotImplemented
        return (
            self.id == other.id
            and self.text == other.text
            and dict(self.variables) == dict(other.variables)
        )

    def __hash__(self) -> int:
        return hash((self.id, self.text, tuple(sorted(self.variables.items()))))


class Corpus:
    """Ordered, immutable collection of documents.

    Document ids are renumbered ``0..n-1`` in the given order.
    """

    __slots__ = ("_documents", "_catalog")

    def __init__(self, documents: Iterable[Document] = ()):
        docs = tuple(
            d if d.id == i else Document(i, d.text, d.variables)
            for i, d in enumerate(documents)
        )
        catalog: dict[str, set[str]] = {}
        for d in docs:
            for name, modality in d.variables.items():
                catalog.setdefault(name, set()).add(modality)
        self._documents = docs
        self._catalog = {k: frozenset(v) for k, v in sorted(catalog.items())}

    @classmethod
    def from_records(cls, records: Iterable[tuple[str, Mapping[str, str]]]) -> Corpus:
        return cls(Document(i, text, vars_) for i, (text, vars_) in enumerate(records))

    @property
    def documents(self) -> tuple[Document, ...]:
        return self._documents

    @property
    def variable_catalog(self) -> Mapping[str, frozenset[str]]:
        return MappingProxyType(self._catalog)

    def __len__(self) -> int:
        return len(self._documents)

    def __iter__(self):
        return iter(self._documents)

    def __getitem__(self, i: int) -> Document:
        return self._documents[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return self._documents == other._documents

    def __repr__(self) -> str:
        return f"Corpus(n_documents={len(self)}, variables={sorted(self._catalog)})"

    def values(self, variable: str) -> list[str | None]:
        """Modality of ``variable`` for each document (None when absent)."""
        return [d.variables.get(variable) for d in self._documents]


def _parse_header(line: str, lineno: int) -> dict[str, str]:
    variables: dict[str, str] = {}
    for token in line[len(HEADER_MARK):].split():
        if not token.startswith("*"):
            continue
        body = token[1:]
        name, sep, modality = body.rpartition("_")
        if not sep or not name or not modality:
            raise CorpusFormatError(f"malformed variable token {token!r}", lineno)
        if name in variables:
            raise CorpusFormatError(f"variable {name!r} given twice", lineno)
        variables[name] = modality
    return variables


def parse_starred_corpus(source: str | TextIO) -> Corpus:
    """Parse starred-corpus text (a string or an open text stream)."""
    text = source if isinstance(source, str) else source.read()
    if not text:
        return Corpus()
    lines = text.split("\n")
    if text.endswith("\n"):
        lines.pop()
    records: list[tuple[str, dict[str, str]]] = []
    current: dict[str, str] | None = None
    body: list[str] = []
    for lineno, line in enumerate(lines, start=1):
        if line.startswith(HEADER_MARK):
            if current is not None:
                records.append(("\n".join(body), current))
            current = _parse_header(line, lineno)
            body = []
        elif current is not None:
            body.append(line)
    if current is not None:
        records.append(("\n".join(body), current))
    return Corpus.from_records(records)


def read_corpus(path) -> Corpus:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_starred_corpus(fh)


def escape_modality(modality: str) -> str:
    if not modality or any(c.isspace() or c == "*" for c in modality):
        raise CorpusFormatError(f"unrepresentable modality {modality!r}")
    return modality.replace("_", "-")


def _check_name(name: str) -> None:
    if not name or any(c.isspace() or c == "*" for c in name):
        raise CorpusFormatError(f"unrepresentable variable name {name!r}")


def write_starred_corpus(corpus: Corpus) -> str:
    out = io.StringIO()
    for doc in corpus:
        tokens = [HEADER_MARK]
        for name in sorted(doc.variables):
            _check_name(name)
            tokens.append(f"*{name}_{escape_modality(doc.variables[name])}")
        if any(line.startswith(HEADER_MARK) for line in doc.text.split("\n")):
            raise CorpusFormatError(f"document {doc.id}: text line starts with {HEADER_MARK!r}")
        out.write(" ".join(tokens))
        out.write("\n")
        out.write(doc.text)
        out.write("\n")
    return out.getvalue()


def write_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(write_starred_corpus(corpus))


def inject_variables(corpus: Corpus, predictions: PredictionSet, prefix: str = "pred_") -> Corpus:
    """Return a copy of ``corpus`` where each predicted document gains
    ``prefix + target`` set to its voted modality."""
    new_vars: dict[int, dict[str, str]] = {}
    for target, per_doc in predictions.final_labels().items():
        name = prefix + target
        _check_name(name)
        if name in corpus.variable_catalog:
            raise VariableCollisionError(f"variable {name!r} already exists in the corpus")
        for doc_id, label in per_doc.items():
            if not 0 <= doc_id < len(corpus):
                raise IndexError(f"prediction for unknown document {doc_id}")
            new_vars.setdefault(doc_id, {})[name] = label
    if not new_vars:
        return corpus
    return Corpus(
        Document(d.id, d.text, {**d.variables, **new_vars.get(d.id, {})}) for d in corpus
    )


@dataclass(frozen=True)
class CorpusStats:
    n_texts: int = 0
    n_forms: int = 0
    n_occurrences: int = 0
    n_lemmas: int = 0
    n_empty: int = 0

    def as_row(self) -> tuple[int, int, int, int]:
        return (self.n_texts, self.n_forms, self.n_occurrences, self.n_lemmas)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(STATS_HEADER)
        writer.writerow(self.as_row())
        return buf.getvalue()


def corpus_stats(corpus: Corpus, prep: PrepConfig | None = None) -> CorpusStats:
    """Corpus size counts: texts, distinct forms, occurrences, distinct lemmas.

    Forms are surface tokens after tokenization (and lowercasing, if
    configured); lemmas are those forms mapped through the lemma table.
    Stopwords are not removed here.
    """
    from artifact.text_prep import PrepConfig, tokenize

    prep = prep or PrepConfig()
    form_counts: dict[str, int] = {}
    n_empty = 0
    for doc in corpus:
        tokens = tokenize(doc.text, prep)
        if not tokens:
            n_empty += 1
        for tok in tokens:
            form_counts[tok] = form_counts.get(tok, 0) + 1
    table = prep.lemma_table or {}
    lemmas = {table.get(f, f) for f in form_counts}
    return CorpusStats(
        n_texts=len(corpus),
        n_forms=len(form_counts),
        n_occurrences=sum(form_counts.values()),
        n_lemmas=len(lemmas),
        n_empty=n_empty,
    )
