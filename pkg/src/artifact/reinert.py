"""Descending hierarchical classification (Reinert method).

Each split works on a binary unit x term matrix. Units are ordered on the
first correspondence-analysis axis; hill climbing then moves, one at a time,
the unit whose relocation most increases the partition chi2 (the Pearson
chi2 of the 2 x V table of term presence counts per side) until no move
improves it. The climb starts from the sign split on the axis and from
further cuts along it (see ``bipartition``). The largest terminal class is
split next.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from artifact.text_prep import DocumentTermMatrix

POWER_TOL = 1e-10
POWER_MAX_ITER = 1000
POWER_SEED = 12345
CHI2_THRESHOLD = 3.84
SMALL_SPLIT = 64
MAX_AXIS_STARTS = 8
UNCLASSIFIED = 0


class UnsplittableError(ValueError):
    def __init__(self, message: str = "unsplittable"):
        super().__init__(message)


def partition_chi2(B: sp.spmatrix, left_mask: np.ndarray) -> float:
    """Pearson chi2 of the (side x term) table of ``B`` split by ``left_mask``."""
    B = sp.csr_matrix(B)
    left = np.asarray(B[left_mask].sum(axis=0)).ravel().astype(float)
    right = np.asarray(B[~left_mask].sum(axis=0)).ravel().astype(float)
    col = left + right
    nz = col > 0
    left, right, col = left[nz], right[nz], col[nz]
    N = col.sum()
    nL, nR = left.sum(), right.sum()
    if nL == 0 or nR == 0:
        return 0.0
    return float(N * ((left**2 / col).sum() / nL + (right**2 / col).sum() / nR - 1.0))


def first_axis_coordinates(B: sp.spmatrix) -> np.ndarray:
    """Row coordinates on the first CA axis of a binary matrix.

    Power iteration on ``S.T @ S`` where ``S`` is the standardized residual
    matrix, seeded with a fixed pseudo-random column vector (a structured seed
    such as +1/-1 can be exactly orthogonal to the leading direction).
    """
    B = sp.csr_matrix(B, dtype=np.float64)
    N = B.sum()
    r = np.asarray(B.sum(axis=1)).ravel() / N
    c = np.asarray(B.sum(axis=0)).ravel() / N
    rs, cs = np.sqrt(r), np.sqrt(c)
    P = B / N

    def S(v: np.ndarray) -> np.ndarray:
        w = v / cs
        return (P @ w - r * (c @ w)) / rs

    def St(u: np.ndarray) -> np.ndarray:
        w = u / rs
        return (P.T @ w - c * (r @ w)) / cs

    v = np.random.default_rng(POWER_SEED).standard_normal(B.shape[1])
    v -= cs * (cs @ v)  # drop the trivial direction
    norm = np.linalg.norm(v)
    v = v / norm if norm > 0 else np.ones_like(v) / np.sqrt(len(v))
    for _ in range(POWER_MAX_ITER):
        w = St(S(v))
        norm = np.linalg.norm(w)
        if norm == 0:
            break
        w /= norm
        done = np.linalg.norm(w - v) < POWER_TOL
        v = w
        if done:
            break
    return S(v) / rs


def _hill_climb(B: sp.csr_matrix, left: np.ndarray) -> tuple[np.ndarray, float, int]:
    col = np.asarray(B.sum(axis=0)).ravel().astype(float)
    inv_c = 1.0 / col
    N = col.sum()
    s = np.asarray(B.sum(axis=1)).ravel().astype(float)
    w = B @ inv_c  # sum_j x_ij / c_j
    moves = 0

    def state(left):
        L = np.asarray(B[left].sum(axis=0)).ravel().astype(float)
        return L, col - L

    L, R = state(left)
    while True:
        if moves and moves % 200 == 0:
            L, R = state(left)
        nL, nR = L.sum(), R.sum()
        aL, aR = (L * L * inv_c).sum(), (R * R * inv_c).sum()
        current = N * (aL / nL + aR / nR - 1.0)
        p = B @ (L * inv_c)
        q = B @ (R * inv_c)
        # Candidate chi2 after moving each unit to the other side.
        from_left = N * ((aL - 2 * p + w) / np.maximum(nL - s, 1e-300) + (aR + 2 * q + w) / (nR + s) - 1.0)
        from_right = N * ((aL + 2 * p + w) / (nL + s) + (aR - 2 * q + w) / np.maximum(nR - s, 1e-300) - 1.0)
        cand = np.where(left, from_left, from_right)
        n_left = int(left.sum())
        blocked = (left & (n_left <= 1)) | (~left & (len(left) - n_left <= 1))
        cand[blocked] = -np.inf
        best = int(np.argmax(cand))
        if not cand[best] > current + 1e-10 * max(1.0, abs(current)):
            return left, float(current), moves
        delta = B.getrow(best).toarray().ravel()
        if left[best]:
            L -= delta
            R += delta
        else:
            L += delta
            R -= delta
        left = left.copy()
        left[best] = not left[best]
        moves += 1


def _axis_cut_scores(B: sp.csr_matrix, order: np.ndarray) -> np.ndarray:
    """Partition chi2 of every cut ``order[:m]`` vs ``order[m:]``, m = 1..n-1."""
    col = np.asarray(B.sum(axis=0)).ravel()
    inv_c = 1.0 / col
    N = col.sum()
    L = np.zeros(B.shape[1])
    aL = nL = 0.0
    out = np.empty(len(order) - 1)
    for m, i in enumerate(order[:-1]):
        idx = B.indices[B.indptr[i]:B.indptr[i + 1]]
        aL += 2.0 * (L[idx] * inv_c[idx]).sum() + inv_c[idx].sum()
        L[idx] += 1.0
        nL += len(idx)
        aR = N - 2.0 * nL + aL
        out[m] = N * (aL / nL + aR / (N - nL) - 1.0)
    return out


def _starts(B: sp.csr_matrix, coords: np.ndarray) -> list[np.ndarray]:
    n = B.shape[0]
    starts = []
    sign = coords > 0
    if sign.any() and not sign.all():
        starts.append(sign)
    order = np.argsort(-coords, kind="stable")
    scores = _axis_cut_scores(B, order)
    if n <= SMALL_SPLIT:
        cuts = np.arange(1, n)
    else:
        cuts = 1 + np.argsort(-scores, kind="stable")[:MAX_AXIS_STARTS]
    for m in cuts:
        mask = np.zeros(n, dtype=bool)
        mask[order[:m]] = True
        starts.append(mask)
    if n <= SMALL_SPLIT:
        for i in range(n):
            mask = np.zeros(n, dtype=bool)
            mask[i] = True
            starts.append(mask)
    return starts


def bipartition(B) -> tuple[np.ndarray, np.ndarray, float]:
    """Split the rows of a binary matrix in two.

    Hill climbing runs from several starting partitions read off the first
    CA axis: the sign split, the cuts along the axis ordering (all of them
    for up to ``SMALL_SPLIT`` units, otherwise the ``MAX_AXIS_STARTS`` best),
    and, for small inputs, each unit isolated from the rest. The best local
    optimum is kept; the earliest start wins ties.

    Returns ``(left_rows, right_rows, chi2)``; rows are indices into ``B``.
    """
    B = sp.csr_matrix(B, dtype=np.float64)
    B.data = (B.data != 0).astype(np.float64)
    B.eliminate_zeros()
    n = B.shape[0]
    if n < 2:
        raise UnsplittableError("unsplittable: fewer than two units")
    col = np.asarray(B.sum(axis=0)).ravel()
    B = B[:, np.flatnonzero(col > 0)].tocsr()
    if B.shape[1] < 2:
        raise UnsplittableError("unsplittable: fewer than two nonzero columns")
    if np.any(np.diff(B.indptr) == 0):
        raise ValueError("bipartition requires every row to have at least one term")
    B.sort_indices()
    patterns = {tuple(B.indices[B.indptr[i]:B.indptr[i + 1]]) for i in range(n)}
    if len(patterns) < 2:
        raise UnsplittableError("unsplittable: all units share one row pattern")
    coords = first_axis_coordinates(B)
    best_left, best_chi2 = None, -np.inf
    seen: set[bytes] = set()
    for start in _starts(B, coords):
        left, chi2, _ = _hill_climb(B, start)
        key = np.packbits(left if left[0] else ~left).tobytes()
        if key in seen:
            continue
        seen.add(key)
        if best_left is None or chi2 > best_chi2 + 1e-10 * max(1.0, abs(best_chi2)):
            best_left, best_chi2 = left, chi2
    return np.flatnonzero(best_left), np.flatnonzero(~best_left), float(best_chi2)


@dataclass
class ClassNode:
    node_id: int
    rows: np.ndarray
    chi2: float | None = None
    children: tuple[int, ...] = ()
    class_id: int | None = None
    unsplittable: bool = False

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class ClassTree:
    """Binary dendrogram of splits; ``assignment[row]`` is a class number in
    ``1..n_classes`` or 0 for unclassified rows."""

    nodes: list[ClassNode]
    assignment: np.ndarray
    n_classes: int
    row_docs: np.ndarray = field(default=None)
    row_ids: np.ndarray = field(default=None)

    @property
    def root(self) -> ClassNode:
        return self.nodes[0]

    def leaves(self) -> list[ClassNode]:
        out: list[ClassNode] = []
        stack = [0]
        while stack:
            node = self.nodes[stack.pop()]
            if node.is_leaf:
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    def class_sizes(self) -> dict[int, int]:
        return {c: int((self.assignment == c).sum()) for c in range(1, self.n_classes + 1)}

    @property
    def n_unclassified(self) -> int:
        return int((self.assignment == UNCLASSIFIED).sum())

    def classified_share(self) -> float:
        n = len(self.assignment)
        return 0.0 if n == 0 else 1.0 - self.n_unclassified / n

    def assignment_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("unit", "doc", "class"))
        for r, c in enumerate(self.assignment):
            w.writerow((int(self.row_ids[r]), int(self.row_docs[r]), int(c)))
        return buf.getvalue()


def chd(dtm: DocumentTermMatrix | sp.spmatrix, max_terminal_classes: int = 10, min_class_size: int = 1) -> ClassTree:
    """Descending hierarchical classification of the rows of ``dtm``.

    The root is always split. Afterwards the largest splittable terminal class
    (earlier in dendrogram order on ties) is split while fewer than
    ``max_terminal_classes`` leaves exist; classes with fewer than
    ``2 * min_class_size`` units are not split. Leaves smaller than
    ``min_class_size`` end up unclassified. Rows without any term are never
    classified.
    """
    if max_terminal_classes < 2:
        raise ValueError("max_terminal_classes must be >= 2")
    if min_class_size < 1:
        raise ValueError("min_class_size must be >= 1")
    if isinstance(dtm, DocumentTermMatrix):
        B, row_docs, row_ids = dtm.binary, dtm.row_docs, dtm.row_ids
    else:
        B = sp.csr_matrix(dtm)
        row_docs = row_ids = np.arange(B.shape[0])
    B = sp.csr_matrix(B, dtype=np.float64)
    B.data = (B.data != 0).astype(np.float64)
    B.eliminate_zeros()
    active = np.flatnonzero(np.diff(B.indptr) > 0)

    nodes = [ClassNode(0, active)]
    leaves = [0]  # dendrogram (left-to-right) order

    def split(node_id: int) -> bool:
        node = nodes[node_id]
        try:
            left, right, chi2 = bipartition(B[node.rows])
        except UnsplittableError:
            node.unsplittable = True
            return False
        a, b = node.rows[left], node.rows[right]
        if len(b) > len(a) or (len(b) == len(a) and b.min() < a.min()):
            a, b = b, a
        node.chi2 = chi2
        ia, ib = len(nodes), len(nodes) + 1
        nodes.append(ClassNode(ia, a))
        nodes.append(ClassNode(ib, b))
        node.children = (ia, ib)
        pos = leaves.index(node_id)
        leaves[pos:pos + 1] = [ia, ib]
        return True

    if not split(0):
        raise UnsplittableError("unsplittable")
    while len(leaves) < max_terminal_classes:
        candidates = [
            (-len(nodes[i].rows), pos, i)
            for pos, i in enumerate(leaves)
            if not nodes[i].unsplittable and len(nodes[i].rows) >= 2 * min_class_size
        ]
        if not candidates:
            break
        progressed = False
        for _, _, i in sorted(candidates):
            if split(i):
                progressed = True
                break
        if not progressed:
            break

    assignment = np.full(B.shape[0], UNCLASSIFIED, dtype=np.int64)
    n_classes = 0
    for i in leaves:
        node = nodes[i]
        if len(node.rows) >= min_class_size:
            n_classes += 1
            node.class_id = n_classes
            assignment[node.rows] = n_classes
    return ClassTree(nodes, assignment, n_classes, np.asarray(row_docs), np.asarray(row_ids))


def contingency_chi2(in_class, class_size, n_present, N) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Pearson chi2 (no continuity correction) and sign of 2x2
    tables given the cell ``a`` = class & present and the margins."""
    a = np.asarray(in_class, dtype=float)
    n1 = np.asarray(class_size, dtype=float)
    m1 = np.asarray(n_present, dtype=float)
    N = float(N)
    b = n1 - a
    c = m1 - a
    d = N - n1 - m1 + a
    denom = n1 * (N - n1) * m1 * (N - m1)
    with np.errstate(divide="ignore", invalid="ignore"):
        chi2 = np.where(denom > 0, N * (a * d - b * c) ** 2 / np.where(denom > 0, denom, 1.0), 0.0)
    expected = n1 * m1 / N if N > 0 else np.zeros_like(a)
    sign = np.sign(np.round(a - expected, 12)).astype(np.int64)
    sign = np.where(chi2 > 0, sign, 0)
    return chi2, sign


@dataclass
class ClassProfile:
    """chi2 and sign of each (class, column); ``columns`` are terms or
    (variable, modality) pairs."""

    classes: list[int]
    columns: list
    chi2: np.ndarray  # classes x columns
    sign: np.ndarray
    n_units: int
    n_unclassified: int = 0

    def top(self, class_id: int, k: int, positive: bool = True) -> list[tuple[object, float]]:
        i = self.classes.index(class_id)
        idx = [j for j in range(len(self.columns)) if (self.sign[i, j] > 0) == positive and self.sign[i, j] != 0]
        idx.sort(key=lambda j: (-self.chi2[i, j], self.columns[j]))
        return [(self.columns[j], float(self.chi2[i, j])) for j in idx[:k]]

    def significant(self, class_id: int, threshold: float = CHI2_THRESHOLD) -> list[tuple[object, float, int]]:
        i = self.classes.index(class_id)
        idx = [j for j in range(len(self.columns)) if self.chi2[i, j] >= threshold]
        idx.sort(key=lambda j: (-self.chi2[i, j], self.columns[j]))
        return [(self.columns[j], float(self.chi2[i, j]), int(self.sign[i, j])) for j in idx]


def _class_indicator(tree: ClassTree) -> tuple[np.ndarray, sp.csr_matrix]:
    rows = np.flatnonzero(tree.assignment != UNCLASSIFIED)
    labels = tree.assignment[rows] - 1
    ind = sp.csr_matrix((np.ones(len(rows)), (labels, rows)), shape=(tree.n_classes, len(tree.assignment)))
    return rows, ind


def _profile(tree: ClassTree, presence: sp.csr_matrix, columns: list) -> ClassProfile:
    if tree.n_classes < 1:
        return ClassProfile([], columns, np.zeros((0, len(columns))), np.zeros((0, len(columns)), np.int64),
                            0, tree.n_unclassified)
    rows, ind = _class_indicator(tree)
    presence = sp.csr_matrix(presence)
    a = np.asarray((ind @ presence).todense(), dtype=float)
    sizes = np.asarray(ind.sum(axis=1), dtype=float)
    n_present = np.asarray(presence[rows].sum(axis=0), dtype=float)
    chi2, sign = contingency_chi2(a, sizes, n_present, len(rows))
    return ClassProfile(list(range(1, tree.n_classes + 1)), columns, chi2, sign, len(rows), tree.n_unclassified)


def class_term_profile(tree: ClassTree, dtm: DocumentTermMatrix) -> ClassProfile:
    return _profile(tree, dtm.binary, list(dtm.vocabulary))


def modality_indicators(row_variables: Sequence[Mapping[str, str]]) -> tuple[sp.csr_matrix, list[tuple[str, str]]]:
    columns = sorted({(k, v) for vars_ in row_variables for k, v in vars_.items()})
    index = {c: j for j, c in enumerate(columns)}
    r, c = [], []
    for i, vars_ in enumerate(row_variables):
        for kv in vars_.items():
            r.append(i)
            c.append(index[kv])
    m = sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(len(row_variables), len(columns)))
    return m, columns


def class_variable_profile(tree: ClassTree, corpus) -> ClassProfile:
    """chi2 of each class against each (variable, modality) inherited by the
    units from their parent documents."""
    row_vars = [corpus[int(d)].variables for d in tree.row_docs]
    presence, columns = modality_indicators(row_vars)
    return _profile(tree, presence, columns)


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def export_dendrogram(tree: ClassTree, term_profile: ClassProfile | None = None,
                      variable_profile: ClassProfile | None = None, k_terms: int = 8,
                      chi2_threshold: float = CHI2_THRESHOLD) -> tuple[str, dict[str, str]]:
    """DOT text of the dendrogram plus the CSV tables
    (``class_profiles.csv``, ``variable_profiles.csv``, ``assignment.csv``)."""
    total = len(tree.assignment)
    lines = ["digraph chd {", '  node [shape=box, fontname="Helvetica"];']
    for node in tree.nodes:
        if node.is_leaf:
            if node.class_id is None:
                label = f"unclassified\\nn={len(node.rows)}"
            else:
                share = 100.0 * len(node.rows) / total if total else 0.0
                label = f"class {node.class_id}\\nn={len(node.rows)} ({share:.1f}%)"
                if term_profile is not None and k_terms > 0:
                    terms = [str(t) for t, _ in term_profile.top(node.class_id, k_terms)]
                    if terms:
                        label += "\\n" + _dot_escape(", ".join(terms))
                if variable_profile is not None:
                    sig = [f"*{v}_{m}" for (v, m), _, s in variable_profile.significant(node.class_id, chi2_threshold) if s > 0]
                    if sig:
                        label += "\\n" + _dot_escape(" ".join(sig))
        else:
            label = f"chi2={node.chi2:.2f}\\nn={len(node.rows)}"
        lines.append(f'  n{node.node_id} [label="{label}"];')
    for node in tree.nodes:
        for child in node.children:
            lines.append(f"  n{node.node_id} -> n{child};")
    lines.append("}")
    dot = "\n".join(lines) + "\n"

    tables = {"assignment.csv": tree.assignment_csv()}
    if term_profile is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("class", "term", "chi2", "sign"))
        for i, cls in enumerate(term_profile.classes):
            for j, term in enumerate(term_profile.columns):
                w.writerow((cls, term, f"{term_profile.chi2[i, j]:.6f}", int(term_profile.sign[i, j])))
        tables["class_profiles.csv"] = buf.getvalue()
    if variable_profile is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("class", "variable", "modality", "chi2", "sign"))
        for i, cls in enumerate(variable_profile.classes):
            for j, (var, mod) in enumerate(variable_profile.columns):
                w.writerow((cls, var, mod, f"{variable_profile.chi2[i, j]:.6f}", int(variable_profile.sign[i, j])))
        tables["variable_profiles.csv"] = buf.getvalue()
    return dot, tables
