"""Train/test splitting, confusion-matrix metrics and predicted composition."""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from artifact.classify.features import LabeledCorpus

EVAL_HEADER_NOTE = (
    "# precision, recall and F are macro-averaged: unweighted means over classes, F being the mean of\n"
    "# per-class F1 rather than the harmonic mean of macro precision and recall.\n"
    "# Micro-averaging is excluded: with one label per document micro P = micro R = micro F = accuracy,\n"
    "# so a triple of three distinct values such as P=0.680 R=0.609 F=0.589 cannot be micro-averaged,\n"
    "# and F below the harmonic mean of P and R (0.643 there) only fits a mean of per-class F1.\n"
)


class StratificationError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0
    stratified: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")


def _largest_remainder(quotas: np.ndarray, total: int) -> np.ndarray:
    base = np.floor(quotas).astype(int)
    rest = total - int(base.sum())
    order = np.argsort(-(quotas - base), kind="stable")
    base[order[:rest]] += 1
    return base


def split_indices(labels: Sequence[str], spec: SplitSpec = SplitSpec()) -> tuple[np.ndarray, np.ndarray]:
    """Sorted train and test positions.

    Stratified mode gives each modality ``floor(f * n_c)`` training documents
    and hands the remaining ``round(f * n) - sum`` slots out by largest
    fractional part, keeping every modality on both sides.
    """
    n = len(labels)
    rng = np.random.default_rng(spec.seed)
    f = spec.train_fraction
    if not spec.stratified:
        if n < 2:
            raise StratificationError("need at least two documents to split")
        k = min(max(int(math.floor(f * n + 0.5)), 1), n - 1)
        perm = rng.permutation(n)
        return np.sort(perm[:k]), np.sort(perm[k:])
    mods = sorted(set(labels))
    lab = np.asarray(labels, dtype=object)
    groups = [np.flatnonzero(lab == m) for m in mods]
    small = [m for m, g in zip(mods, groups) if len(g) < 2]
    if small:
        raise StratificationError(f"stratified split needs >= 2 documents per modality; too few for {small}")
    sizes = np.array([len(g) for g in groups])
    total = int(math.floor(f * n + 0.5))
    take = _largest_remainder(f * sizes, total)
    take = np.clip(take, 1, sizes - 1)
    train, test = [], []
    for g, k in zip(groups, take):
        perm = g[rng.permutation(len(g))]
        train.append(perm[:k])
        test.append(perm[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def split(corpus: LabeledCorpus, spec: SplitSpec = SplitSpec()) -> tuple[LabeledCorpus, LabeledCorpus]:
    tr, te = split_indices(corpus.labels, spec)
    return corpus.subset(tr.tolist()), corpus.subset(te.tolist())


def harmonic(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2.0 * p * r / (p + r)


def macro_scores(precision: Sequence[float], recall: Sequence[float]) -> tuple[float, float, float]:
    """Macro P, R and F from per-class precision and recall."""
    p = np.asarray(precision, float)
    r = np.asarray(recall, float)
    f = np.array([harmonic(a, b) for a, b in zip(p, r)])
    return float(p.mean()), float(r.mean()), float(f.mean())


@dataclass
class EvalReport:
    """``confusion[i, j]`` counts gold class i predicted as j. Abstentions
    (no prediction) count against recall only and are kept in ``abstained``."""

    labels: list[str]
    confusion: np.ndarray
    abstained: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    zero_division: int = 0

    @property
    def support(self) -> np.ndarray:
        return self.confusion.sum(axis=1) + self.abstained

    @property
    def macro(self) -> tuple[float, float, float]:
        return float(self.precision.mean()), float(self.recall.mean()), float(self.f1.mean())

    @property
    def accuracy(self) -> float:
        n = int(self.support.sum())
        return 0.0 if n == 0 else float(np.trace(self.confusion) / n)

    def summary(self, support_class: str | None = None) -> tuple[float, float, float]:
        """Macro triple, or the triple of ``support_class`` alone."""
        if support_class is None:
            return self.macro
        i = self.labels.index(support_class)
        return float(self.precision[i]), float(self.recall[i]), float(self.f1[i])


def evaluate(predicted: Sequence[str | None], gold: Sequence[str],
             modalities: Sequence[str] | None = None) -> EvalReport:
    if len(predicted) != len(gold):
        raise ValueError("predictions and gold cover different numbers of documents")
    labels = sorted(set(modalities) if modalities is not None else set(gold))
    index = {m: i for i, m in enumerate(labels)}
    for g in gold:
        if g not in index:
            raise ValueError(f"gold label {g!r} outside modality set {labels}")
    K = len(labels)
    cm = np.zeros((K, K), dtype=np.int64)
    abst = np.zeros(K, dtype=np.int64)
    for p, g in zip(predicted, gold):
        if p is None:
            abst[index[g]] += 1
            continue
        if p not in index:
            raise ValueError(f"predicted label {p!r} outside modality set {labels}")
        cm[index[g], index[p]] += 1
    tp = np.diag(cm).astype(float)
    col = cm.sum(axis=0).astype(float)
    row = (cm.sum(axis=1) + abst).astype(float)
    zero = int((col == 0).sum() + (row == 0).sum())
    prec = np.divide(tp, col, out=np.zeros(K), where=col > 0)
    rec = np.divide(tp, row, out=np.zeros(K), where=row > 0)
    f1 = np.array([harmonic(a, b) for a, b in zip(prec, rec)])
    zero += int(((prec + rec) == 0).sum())
    return EvalReport(labels, cm, abst, prec, rec, f1, zero)


def eval_csv(reports: Mapping[str, EvalReport], support_class: str | None = None) -> str:
    """Per-class rows plus a ``macro`` row per method (and a ``support:<class>``
    row when ``support_class`` is given), after an explanatory header."""
    buf = io.StringIO()
    buf.write(EVAL_HEADER_NOTE)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("method", "class", "precision", "recall", "f1", "support"))
    for method, rep in reports.items():
        for i, lab in enumerate(rep.labels):
            w.writerow((method, lab, f"{rep.precision[i]:.6f}", f"{rep.recall[i]:.6f}", f"{rep.f1[i]:.6f}",
                        int(rep.support[i])))
        p, r, f = rep.macro
        w.writerow((method, "macro", f"{p:.6f}", f"{r:.6f}", f"{f:.6f}", int(rep.support.sum())))
        if support_class is not None and support_class in rep.labels:
            p, r, f = rep.summary(support_class)
            i = rep.labels.index(support_class)
            w.writerow((method, f"support:{support_class}", f"{p:.6f}", f"{r:.6f}", f"{f:.6f}",
                        int(rep.support[i])))
    return buf.getvalue()


def round_percentages(counts: Sequence[int]) -> list[float]:
    """Percentages to one decimal, rounded by largest remainder so they add
    up to exactly 100.0."""
    counts = np.asarray(counts, dtype=np.int64)
    n = int(counts.sum())
    if n == 0:
        raise ValueError("no predicted documents")
    tenths = _largest_remainder(1000.0 * counts / n, 1000)
    return [t / 10.0 for t in tenths.tolist()]


@dataclass
class CompositionReport:
    percent: dict[str, dict[str, float]]
    counts: dict[str, dict[str, int]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("target", "modality", "percent"))
        for target in sorted(self.percent):
            for mod, pct in self.percent[target].items():
                w.writerow((target, mod, f"{pct:.1f}"))
        return buf.getvalue()


def composition(labels: Mapping[str, Mapping[int, str]], targets: Sequence[str] | None = None,
                modalities: Mapping[str, Sequence[str]] | None = None) -> CompositionReport:
    """Share of predicted documents per modality, per target.

    ``labels`` maps target -> doc -> predicted modality (the output of
    ``PredictionSet.final_labels``). Modalities listed in ``modalities`` but
    never predicted appear with 0.0.
    """
    targets = sorted(labels) if targets is None else list(targets)
    pct: dict[str, dict[str, float]] = {}
    cnt: dict[str, dict[str, int]] = {}
    for t in targets:
        preds = list(labels.get(t, {}).values())
        if not preds:
            raise ValueError(f"no predicted documents for target {t!r}")
        mods = sorted(set(preds) | set((modalities or {}).get(t, ())))
        c = [preds.count(m) for m in mods]
        cnt[t] = dict(zip(mods, c))
        pct[t] = dict(zip(mods, round_percentages(c)))
    return CompositionReport(pct, cnt)
