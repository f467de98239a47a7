"""Synthetic corpora with planted structure, for tests and demonstrations.

All generators are pure functions of their arguments and ``seed``.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from artifact.corpus_io import Corpus, Document

_SYLLABLES = [c + v for c in "bcdfglmnprstv" for v in "aeiou"]


def pseudo_words(n: int, offset: int = 0, min_syllables: int = 2) -> list[str]:
    """``n`` distinct alphabetic words; disjoint ranges of ``offset`` give
    disjoint word lists."""
    base = len(_SYLLABLES)
    out = []
    for i in range(offset, offset + n):
        digits = []
        x = i
        while x or len(digits) < min_syllables:
            digits.append(_SYLLABLES[x % base])
            x //= base
        out.append("".join(reversed(digits)))
    return out


class _Vocab:
    """Allocates non-overlapping pseudo-word ranges."""

    def __init__(self) -> None:
        self.next = 0

    def take(self, n: int) -> list[str]:
        words = pseudo_words(n, self.next)
        self.next += n
        return words


def _zipf(n: int, s: float = 1.0) -> np.ndarray:
    p = 1.0 / (np.arange(1, n + 1) + 2.7) ** s
    return p / p.sum()


def _with_sentences(tokens: Sequence[str], rng: np.random.Generator, mean_len: int = 10) -> str:
    out, since = [], 0
    for tok in tokens:
        out.append(tok)
        since += 1
        if since >= mean_len and rng.random() < 0.3:
            out[-1] += "."
            since = 0
    text = " ".join(out)
    return text if text.endswith(".") or not text else text + "."


def planted_blocks(n_units: int = 200, n_blocks: int = 3, vocab_per_block: int = 40, unit_length: int = 20,
                   noise: float = 0.1, seed: int = 0) -> tuple[Corpus, np.ndarray]:
    """One short document per unit; each token comes from the unit's block
    vocabulary, except a ``noise`` share drawn uniformly from every block's
    vocabulary. Returns the corpus and the planted block of each document."""
    rng = np.random.default_rng(seed)
    vocab = _Vocab()
    blocks = [vocab.take(vocab_per_block) for _ in range(n_blocks)]
    pool = [w for b in blocks for w in b]
    truth = np.sort(rng.integers(0, n_blocks, size=n_units))
    rng.shuffle(truth)
    docs = []
    for i, b in enumerate(truth):
        is_noise = rng.random(unit_length) < noise
        own = rng.integers(0, vocab_per_block, size=unit_length)
        other = rng.integers(0, len(pool), size=unit_length)
        toks = [pool[o] if z else blocks[b][w] for z, w, o in zip(is_noise, own, other)]
        docs.append(Document(i, " ".join(toks), {"bloc": f"b{b + 1}"}))
    return Corpus(docs), truth


def two_class_corpus(n_docs: int = 500, doc_length: int = 30, signal_share: float = 0.3,
                     signal_vocab: int = 30, shared_vocab: int = 200, seed: int = 0) -> Corpus:
    """Two modalities of ``classe`` with disjoint signal vocabularies over a
    shared Zipfian background."""
    rng = np.random.default_rng(seed)
    vocab = _Vocab()
    shared = vocab.take(shared_vocab)
    signal = {"alpha": vocab.take(signal_vocab), "beta": vocab.take(signal_vocab)}
    p_shared = _zipf(shared_vocab)
    labels = np.array(["alpha", "beta"])[rng.permutation(np.arange(n_docs) % 2)]
    docs = []
    for i, lab in enumerate(labels):
        is_sig = rng.random(doc_length) < signal_share
        s = rng.integers(0, signal_vocab, size=doc_length)
        b = rng.choice(shared_vocab, size=doc_length, p=p_shared)
        toks = [signal[lab][x] if z else shared[y] for z, x, y in zip(is_sig, s, b)]
        docs.append(Document(i, _with_sentences(toks, rng), {"classe": str(lab)}))
    return Corpus(docs)


SEXES = ("femme", "homme")
AGES = ("jeune", "jeune-actif", "actif", "senior")
GJ = ("ne-soutient-pas", "soutient")
TOPICS = ("fiscalite", "ecologie", "democratie", "services")
# P(topic | gj): supporters favour fiscal and democratic themes.
_TOPIC_GIVEN_GJ = {"ne-soutient-pas": (0.15, 0.40, 0.10, 0.35), "soutient": (0.40, 0.10, 0.35, 0.15)}
_GJ_SUPPORT = {"entendre": 0.5, "gdn": 0.36, "vd": 0.8}


@dataclass
class DebateFixture:
    """Labeled corpus (``sexe``, ``age``, ``gj``) and an unlabeled target
    corpus split over two ``plateforme`` modalities, plus the latent truth of
    the target documents."""

    labeled: Corpus
    target: Corpus
    target_truth: dict[str, list[str]]


class _Speaker:
    def __init__(self, vocab: _Vocab, rng: np.random.Generator) -> None:
        self.rng = rng
        self.filler = vocab.take(300)
        self.p_filler = _zipf(300)
        self.topic = {t: vocab.take(40) for t in TOPICS}
        self.style = {("sexe", m): vocab.take(15) for m in SEXES}
        self.style |= {("age", m): vocab.take(15) for m in AGES}
        self.style |= {("gj", m): vocab.take(20) for m in GJ}

    def text(self, sexe: str, age: str, gj: str, length: int) -> str:
        rng = self.rng
        topic = TOPICS[rng.choice(len(TOPICS), p=_TOPIC_GIVEN_GJ[gj])]
        # Per-token source: filler, topic, then one style slot per variable.
        src = rng.choice(5, size=length, p=(0.40, 0.30, 0.10, 0.10, 0.10))
        lists = (None, self.topic[topic], self.style[("sexe", sexe)], self.style[("age", age)],
                 self.style[("gj", gj)])
        toks = []
        for s in src:
            if s == 0:
                toks.append(self.filler[rng.choice(300, p=self.p_filler)])
            else:
                words = lists[s]
                toks.append(words[rng.integers(len(words))])
        return _with_sentences(toks, rng)

    def person(self, support: float) -> tuple[str, str, str]:
        rng = self.rng
        return (SEXES[rng.integers(2)], AGES[rng.integers(4)], GJ[int(rng.random() < support)])


def debate_fixture(n_labeled: int = 600, n_target: int = 400, doc_length: int = 40, seed: int = 0) -> DebateFixture:
    rng = np.random.default_rng(seed)
    speaker = _Speaker(_Vocab(), rng)
    labeled = []
    for i in range(n_labeled):
        sexe, age, gj = speaker.person(_GJ_SUPPORT["entendre"])
        length = int(rng.integers(doc_length // 2, doc_length * 3 // 2 + 1))
        labeled.append(Document(i, speaker.text(sexe, age, gj, length), {"sexe": sexe, "age": age, "gj": gj}))
    target, truth = [], {"sexe": [], "age": [], "gj": []}
    for i in range(n_target):
        platform = "gdn" if i % 2 == 0 else "vd"
        sexe, age, gj = speaker.person(_GJ_SUPPORT[platform])
        length = int(rng.integers(doc_length // 2, doc_length * 3 // 2 + 1))
        target.append(Document(i, speaker.text(sexe, age, gj, length), {"plateforme": platform}))
        for k, v in zip(("sexe", "age", "gj"), (sexe, age, gj)):
            truth[k].append(v)
    return DebateFixture(Corpus(labeled), Corpus(target), truth)


def scale_corpus_chunks(n_docs: int = 100_000, mean_length: int = 200, vocab_size: int = 50_000,
                        seed: int = 0, chunk: int = 2_000) -> Iterator[str]:
    """Starred-corpus text of a large Zipfian corpus, yielded in chunks so
    it can be written without holding it in memory."""
    rng = np.random.default_rng(seed)
    words = np.array(pseudo_words(vocab_size))
    cdf = np.cumsum(_zipf(vocab_size, 1.05))
    cdf[-1] = 1.0
    for lo in range(0, n_docs, chunk):
        hi = min(n_docs, lo + chunk)
        lengths = rng.poisson(mean_length, size=hi - lo)
        ids = np.searchsorted(cdf, rng.random(int(lengths.sum())), side="right")
        toks = words[ids].tolist()
        platform = rng.integers(0, 2, size=hi - lo)
        parts = []
        pos = 0
        for n, p in zip(lengths, platform):
            parts.append(f"**** *plateforme_{'gdn' if p == 0 else 'vd'}\n")
            parts.append(" ".join(toks[pos:pos + n]))
            parts.append(".\n")
            pos += n
        yield "".join(parts)


def write_scale_corpus(path: str | Path, **kwargs) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for text in scale_corpus_chunks(**kwargs):
            fh.write(text)

