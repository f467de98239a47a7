"""Three-voter majority vote and the per-document prediction table."""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

VOTERS = ("nb", "lr", "cent")
CSV_HEADER = ("doc", "target", "nb_label", "nb_score", "lr_label", "lr_score", "cent_label", "cent_score", "vote")


@dataclass(frozen=True)
class Vote:
    """One classifier's answer. ``label=None`` means the voter abstained.

    ``percentile`` is the rank of ``score`` among all scores the same
    classifier produced over the prediction batch, in (0, 1].
    """

    label: str | None
    score: float | None = None
    percentile: float = 0.0


def majority_vote(votes: Sequence[Vote]) -> str:
    """Label backed by at least two voters.

    Without a majority: if all three voters disagree the one with the highest
    within-classifier percentile wins; if a voter abstained and the other two
    disagree, the first voter (Naive Bayes) wins. Remaining ties go to the
    earlier voter.
    """
    if len(votes) != 3:
        raise ValueError("majority_vote takes exactly three votes")
    present = [(i, v) for i, v in enumerate(votes) if v.label is not None]
    if not present:
        raise ValueError("all voters abstained")
    counts: dict[str, int] = {}
    for _, v in present:
        counts[v.label] = counts.get(v.label, 0) + 1
    top = max(counts.values())
    if top >= 2 or len(present) == 1:
        return next(v.label for _, v in present if counts[v.label] == top)
    if len(present) == 2:
        return present[0][1].label
    best = max(present, key=lambda iv: (iv[1].percentile, -iv[0]))
    return best[1].label


def tie_break_reachable(n_modalities: int) -> bool:
    """True iff three present voters can all disagree."""
    return n_modalities >= 3


def percentiles(scores: Sequence[float | None]) -> np.ndarray:
    """Empirical CDF value of each score within its batch (ties share the
    highest rank); missing scores get 0."""
    vals = np.array([np.nan if s is None else float(s) for s in scores], dtype=float)
    ok = ~np.isnan(vals)
    out = np.zeros(len(vals))
    if ok.any():
        ref = np.sort(vals[ok])
        out[ok] = np.searchsorted(ref, vals[ok], side="right") / len(ref)
    return out


@dataclass(frozen=True)
class DocPrediction:
    doc: int
    target: str
    nb_label: str
    nb_score: float
    lr_label: str
    lr_score: float
    cent_label: str | None
    cent_score: float | None
    vote: str

    def row(self) -> tuple:
        return (self.doc, self.target, self.nb_label, repr(self.nb_score), self.lr_label, repr(self.lr_score),
                self.cent_label or "", "" if self.cent_score is None else repr(self.cent_score), self.vote)


class PredictionSet:
    """Per-document predictions for one or more targets."""

    def __init__(self, rows: Iterable[DocPrediction] = ()):
        self.rows: tuple[DocPrediction, ...] = tuple(rows)
        seen = set()
        for r in self.rows:
            key = (r.target, r.doc)
            if key in seen:
                raise ValueError(f"duplicate prediction for doc {r.doc} on target {r.target!r}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PredictionSet) and self.rows == other.rows

    @property
    def targets(self) -> list[str]:
        return sorted({r.target for r in self.rows})

    def for_target(self, target: str) -> list[DocPrediction]:
        return [r for r in self.rows if r.target == target]

    def final_labels(self) -> dict[str, dict[int, str]]:
        out: dict[str, dict[int, str]] = {}
        for r in self.rows:
            out.setdefault(r.target, {})[r.doc] = r.vote
        return out

    def voter_labels(self, voter: str) -> dict[str, dict[int, str | None]]:
        if voter not in VOTERS + ("vote",):
            raise KeyError(voter)
        attr = "vote" if voter == "vote" else f"{voter}_label"
        out: dict[str, dict[int, str | None]] = {}
        for r in self.rows:
            out.setdefault(r.target, {})[r.doc] = getattr(r, attr)
        return out

    def merge(self, other: PredictionSet) -> PredictionSet:
        return PredictionSet(self.rows + other.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(r.row())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> PredictionSet:
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ValueError(f"prediction CSV must start with {','.join(CSV_HEADER)}")
        rows = []
        for n, rec in enumerate(reader, start=2):
            if len(rec) != len(CSV_HEADER):
                raise ValueError(f"line {n}: expected {len(CSV_HEADER)} fields, got {len(rec)}")
            doc, target, nl, ns, ll, ls, cl, cs, vote = rec
            rows.append(DocPrediction(int(doc), target, nl, float(ns), ll, float(ls),
                                      cl or None, float(cs) if cs else None, vote))
        return cls(rows)


def combine(target: str, doc_ids: Sequence[int], nb: Sequence[tuple[str, float]],
            lr: Sequence[tuple[str, float]], cent: Sequence[tuple[str | None, float | None]]) -> PredictionSet:
    """Vote over a batch; percentiles are computed within the batch."""
    if not (len(doc_ids) == len(nb) == len(lr) == len(cent)):
        raise ValueError("voter outputs differ in length")
    pct = [percentiles([s for _, s in preds]) for preds in (nb, lr, cent)]
    rows = []
    for i, doc in enumerate(doc_ids):
        votes = [Vote(preds[i][0], preds[i][1], float(p[i])) for preds, p in zip((nb, lr, cent), pct)]
        rows.append(DocPrediction(int(doc), target, nb[i][0], float(nb[i][1]), lr[i][0], float(lr[i][1]),
                                  cent[i][0], None if cent[i][1] is None else float(cent[i][1]),
                                  majority_vote(votes)))
    return PredictionSet(rows)
