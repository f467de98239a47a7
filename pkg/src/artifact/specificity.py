"""Hypergeometric lexical specificity.

For a form with corpus frequency ``F`` and a part of ``t`` occurrences out of
``T``, the part frequency ``k`` is compared with ``X ~ Hypergeometric(T, F, t)``.
Over-representation scores ``-log10 P(X >= k)``, under-representation scores
``log10 P(X <= k)``; when both tails are at least 0.5 the score is 0.
Tails that land within rounding distance of 0.5 are compared with 0.5
exactly (integer arithmetic up to ``EXACT_HALF_LIMIT`` occurrences, the
symmetry condition of the distribution beyond that), since exact halves are
common in small symmetric tables.

Tail sums are exact: the log-pmf at ``k`` is obtained from log-gamma, and the
tail is accumulated term by term through the pmf ratio recurrence, always
walking away from the mode so the terms shrink monotonically. Summation stops
once a geometric bound on the remainder falls below 1e-17 of the running
total. No normal or Poisson approximation is used at any corpus size; above
roughly 10^7 occurrences the log-gamma anchor limits absolute accuracy to
about 1e-8 log10 units.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Hashable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

LN10 = math.log(10.0)
SPECIFIC = 2.0
HIGHLY_SPECIFIC = 3.3
_REL_EPS = 1e-17
_HALF_BAND = 1e-9  # natural-log distance from log(1/2) that triggers an exact check
EXACT_HALF_LIMIT = 20_000


class SpecificityDomainError(ValueError):
    pass


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _check(k: int, F: int, t: int, T: int) -> None:
    if not (1 <= F <= T and 1 <= t <= T and 0 <= k <= min(F, t)):
        raise SpecificityDomainError(f"invalid specificity arguments k={k} F={F} t={t} T={T}")
    if k < t - (T - F):
        raise SpecificityDomainError(f"k={k} is below the hypergeometric support")


def log_pmf(k: int, F: int, t: int, T: int) -> float:
    return _log_comb(F, k) + _log_comb(T - F, t - k) - _log_comb(T, t)


def _log_tail_ratio_sum(k: int, F: int, t: int, T: int, upward: bool) -> float:
    """log of sum_{x in tail} pmf(x)/pmf(k); the tail must be the shrinking side."""
    lo, hi = max(0, t - (T - F)), min(F, t)
    total = 1.0
    log_last = 0.0
    x = k
    chunk = 16
    while (x < hi) if upward else (x > lo):
        if upward:
            xs = np.arange(x, min(x + chunk, hi), dtype=np.float64)
            lr = (np.log(F - xs) + np.log(t - xs)) - (np.log(xs + 1) + np.log(T - F - t + xs + 1))
        else:
            xs = np.arange(x, max(x - chunk, lo), -1, dtype=np.float64)
            lr = (np.log(xs) + np.log(T - F - t + xs)) - (np.log(F - xs + 1) + np.log(t - xs + 1))
        cum = log_last + np.cumsum(lr)
        total += float(np.exp(cum).sum())
        log_last = float(cum[-1])
        x = x + len(xs) if upward else x - len(xs)
        ratio = math.exp(float(lr[-1]))
        if ratio < 1.0:
            remainder = math.exp(log_last) * ratio / (1.0 - ratio)
            if remainder <= _REL_EPS * total:
                break
        chunk = min(chunk * 2, 1 << 16)
    return math.log(total)


def _mode(F: int, t: int, T: int) -> int:
    return ((t + 1) * (F + 1)) // (T + 2)


def log_tails(k: int, F: int, t: int, T: int) -> tuple[float, float]:
    """Natural logs of ``(P(X >= k), P(X <= k))``."""
    _check(k, F, t, T)
    lp = log_pmf(k, F, t, T)
    m = _mode(F, t, T)
    if k >= m:
        log_up = lp + _log_tail_ratio_sum(k, F, t, T, upward=True)
    if k <= m:
        log_low = lp + _log_tail_ratio_sum(k, F, t, T, upward=False)
    if k > m:
        log_low = math.log(max(1.0 - math.exp(log_up) + math.exp(lp), math.exp(lp)))
    elif k < m:
        log_up = math.log(max(1.0 - math.exp(log_low) + math.exp(lp), math.exp(lp)))
    return min(log_up, 0.0), min(log_low, 0.0)


def _exact_tail_at_least_half(k: int, F: int, t: int, T: int, upward: bool) -> bool:
    """``P(X >= k) >= 1/2`` (or ``P(X <= k)``) in integer arithmetic."""
    lo, hi = max(0, t - (T - F)), min(F, t)
    num = math.comb(F, lo) * math.comb(T - F, t - lo)
    tail = 0
    for x in range(lo, hi + 1):
        if (x >= k) if upward else (x <= k):
            tail += num
        if x < hi:
            num = num * (F - x) * (t - x) // ((x + 1) * (T - F - t + x + 1))
    return 2 * tail >= math.comb(T, t)


def _at_least_half(log_tail: float, k: int, F: int, t: int, T: int, upward: bool) -> bool:
    half = -math.log(2.0)
    if abs(log_tail - half) >= _HALF_BAND:
        return log_tail >= half
    if T <= EXACT_HALF_LIMIT:
        return _exact_tail_at_least_half(k, F, t, T, upward)
    # A symmetric law puts exactly half its mass on each side of a half-integer centre.
    symmetric = 2 * F == T or 2 * t == T
    return (symmetric and 2 * k * T == 2 * F * t + (T if upward else -T)) or log_tail >= half


def specificity_score(k: int, F: int, t: int, T: int) -> float:
    """Signed log10 specificity of ``k`` occurrences in a part (see module doc)."""
    k, F, t, T = int(k), int(F), int(t), int(T)
    log_up, log_low = log_tails(k, F, t, T)
    if _at_least_half(log_up, k, F, t, T, True) and _at_least_half(log_low, k, F, t, T, False):
        return 0.0
    if log_up <= log_low:
        return -log_up / LN10
    return log_low / LN10


def band(score: float, specific: float = SPECIFIC, highly: float = HIGHLY_SPECIFIC) -> str:
    a = abs(score)
    if a >= highly:
        return "highly specific"
    if a >= specific:
        return "specific"
    return ""


@dataclass(frozen=True)
class SpecificityEntry:
    form: str
    part: str
    k: int
    F: int
    t: int
    T: int
    score: float


@dataclass
class SpecificityTable:
    """Scores for every (form, part); arrays are indexed ``[form, part]``."""

    forms: list[str]
    parts: list[str]
    k: np.ndarray
    F: np.ndarray
    t: np.ndarray
    T: int
    scores: np.ndarray

    def entry(self, form: str, part: str) -> SpecificityEntry:
        i, j = self.forms.index(form), self.parts.index(part)
        return self._entry(i, j)

    def _entry(self, i: int, j: int) -> SpecificityEntry:
        return SpecificityEntry(
            self.forms[i], self.parts[j], int(self.k[i, j]), int(self.F[i]),
            int(self.t[j]), int(self.T), float(self.scores[i, j]),
        )

    def entries(self):
        for j in range(len(self.parts)):
            for i in range(len(self.forms)):
                yield self._entry(i, j)

    def ranked(self, part: str) -> list[SpecificityEntry]:
        j = self.parts.index(part)
        order = sorted(range(len(self.forms)), key=lambda i: (-abs(self.scores[i, j]), self.forms[i]))
        return [self._entry(i, j) for i in order]

    def to_csv(self, banner: int | None = None) -> str:
        """CSV sorted by part then decreasing ``|score|``; ``banner`` keeps the
        first N rows of each part."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("form", "part", "k", "F", "t", "T", "score"))
        for part in sorted(self.parts):
            rows = self.ranked(part)
            if banner is not None:
                rows = rows[:banner]
            for e in rows:
                w.writerow((e.form, e.part, e.k, e.F, e.t, e.T, f"{e.score:.6f}"))
        return buf.getvalue()


def specificity_table(counts, partition: Sequence[Hashable] | Mapping[int, Hashable],
                      vocabulary: Sequence[str] | None = None) -> SpecificityTable:
    """Specificity of every column of ``counts`` in every part.

    ``counts`` is a DocumentTermMatrix or a (rows x forms) count matrix with
    ``vocabulary`` given; ``partition`` assigns a part label to each row.
    """
    if hasattr(counts, "counts") and hasattr(counts, "vocabulary"):
        vocabulary = counts.vocabulary if vocabulary is None else vocabulary
        counts = counts.counts
    matrix = sp.csr_matrix(counts)
    n_rows, n_forms = matrix.shape
    if vocabulary is None or len(vocabulary) != n_forms:
        raise ValueError("a vocabulary matching the matrix columns is required")
    if isinstance(partition, Mapping):
        missing = [r for r in range(n_rows) if r not in partition]
        if missing:
            raise ValueError(f"partition does not cover rows {missing[:5]}")
        labels = [partition[r] for r in range(n_rows)]
    else:
        labels = list(partition)
        if len(labels) != n_rows:
            raise ValueError("partition length differs from the number of rows")
        if any(lbl is None for lbl in labels):
            raise ValueError("partition does not cover every row")
    parts = sorted({str(lbl) for lbl in labels})
    if len(parts) < 2:
        raise ValueError("specificity needs at least two parts")
    part_index = {p: j for j, p in enumerate(parts)}
    codes = np.array([part_index[str(lbl)] for lbl in labels])
    indicator = sp.csr_matrix((np.ones(n_rows), (codes, np.arange(n_rows))), shape=(len(parts), n_rows))
    k = np.asarray((indicator @ matrix).todense(), dtype=np.int64).T  # forms x parts
    F = k.sum(axis=1)
    t = k.sum(axis=0)
    T = int(F.sum())
    scores = np.zeros(k.shape)
    for i in range(n_forms):
        if F[i] == 0:
            continue
        for j in range(len(parts)):
            if t[j] == 0:
                continue
            scores[i, j] = specificity_score(int(k[i, j]), int(F[i]), int(t[j]), T)
    return SpecificityTable(list(vocabulary), parts, k, F, t, T, scores)


def top_specific(table: SpecificityTable, part: str, k: int, direction: str = "over") -> list[SpecificityEntry]:
    if part not in table.parts:
        raise KeyError(f"unknown part {part!r}")
    if direction not in ("over", "under"):
        raise ValueError("direction must be 'over' or 'under'")
    if k <= 0:
        return []
    sign = 1.0 if direction == "over" else -1.0
    return [e for e in table.ranked(part) if e.score * sign > 0][:k]
