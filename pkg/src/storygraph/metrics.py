"""Evaluation: precision/recall/F1 reports, cluster purity, KNN accuracy,
and embedding dumps for external projection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError


@dataclass
class MetricsReport:
    """Percentages in [0, 100]; F1 is the harmonic mean of its own P and R."""
    per_label: dict[str, tuple[float, float, float]]
    micro: tuple[float, float, float]
    macro: tuple[float, float, float]

    def f1(self, mode: str = "micro") -> float:
        return self.micro[2] if mode == "micro" else self.macro[2]


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = 100.0 * tp / (tp + fp) if tp + fp else 0.0
    r = 100.0 * tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return (p, r, f)


def prf1(pairs: Sequence[tuple[frozenset[str], frozenset[str]]],
         labels: Sequence[str]) -> MetricsReport:
    """P/R/F1 from aligned (gold label set, predicted label set) pairs.

    Micro counts every (example, label) decision as one unit; macro averages
    the per-label scores.
    """
    tp: dict[str, int] = {lab: 0 for lab in labels}
    fp: dict[str, int] = {lab: 0 for lab in labels}
    fn: dict[str, int] = {lab: 0 for lab in labels}
    for gold, pred in pairs:
        unknown = (gold | pred) - set(labels)
        if unknown:
            raise DataError(f"labels {sorted(unknown)} outside the vocabulary")
        for lab in labels:
            g, p = lab in gold, lab in pred
            if g and p:
                tp[lab] += 1
            elif p:
                fp[lab] += 1
            elif g:
                fn[lab] += 1
    per_label = {lab: _prf(tp[lab], fp[lab], fn[lab]) for lab in labels}
    micro = _prf(sum(tp.values()), sum(fp.values()), sum(fn.values()))
    macro = tuple(float(np.mean([per_label[lab][i] for lab in labels])) for i in range(3))
    return MetricsReport(per_label=per_label, micro=micro, macro=macro)


# ---------------------------------------------------------------------------
# Clustering and KNN over embeddings


def purity(assignments: Sequence[int], tags: Sequence[str]) -> float:
    """(1/N) * sum over clusters of the majority-tag count."""
    if len(assignments) != len(tags) or not assignments:
        raise DataError("assignments and tags must be non-empty and aligned")
    clusters: dict[int, dict[str, int]] = {}
    for cluster, tag in zip(assignments, tags):
        clusters.setdefault(cluster, {}).setdefault(tag, 0)
        clusters[cluster][tag] += 1
    return sum(max(counts.values()) for counts in clusters.values()) / len(tags)


def kmeans(vectors: np.ndarray, k: int, rng: np.random.Generator,
           max_iter: int = 100, restarts: int = 5) -> np.ndarray:
    """Lloyd's iterations with farthest-point seeding; best inertia of
    ``restarts`` runs. Returns the cluster index per row."""
    n = vectors.shape[0]
    if n < k:
        raise DataError(f"k-means needs at least {k} points, got {n}")
    best_assign, best_inertia = None, np.inf
    for _ in range(restarts):
        centers = _farthest_point_init(vectors, k, rng)
        assign = None
        for _ in range(max_iter):
            dists = ((vectors[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_assign = dists.argmin(axis=1)
            if assign is not None and np.array_equal(new_assign, assign):
                break
            assign = new_assign
            for c in range(k):
                members = vectors[assign == c]
                if len(members):
                    centers[c] = members.mean(axis=0)
        inertia = float(((vectors - centers[assign]) ** 2).sum())
        if inertia < best_inertia:
            best_inertia, best_assign = inertia, assign.copy()
    return best_assign


def _farthest_point_init(vectors: np.ndarray, k: int,
                         rng: np.random.Generator) -> np.ndarray:
    n = vectors.shape[0]
    centers = [vectors[int(rng.integers(n))]]
    for _ in range(k - 1):
        dists = np.min(
            [((vectors - c) ** 2).sum(axis=1) for c in centers], axis=0
        )
        centers.append(vectors[int(dists.argmax())])
    return np.stack(centers).astype(np.float64)


def _fold_indices(n: int, folds: int) -> list[np.ndarray]:
    return [idx for idx in np.array_split(np.arange(n), folds) if len(idx)]


def cluster_purity(vectors: np.ndarray, tags: Sequence[str], k: int = 5,
                   folds: int = 10, rng: np.random.Generator | None = None) -> float:
    """Mean purity of per-fold K-Means clusterings."""
    rng = rng or np.random.default_rng(0)
    vectors = np.asarray(vectors, dtype=np.float64)
    tags = list(tags)
    scores = []
    for idx in _fold_indices(len(tags), folds):
        if len(idx) < k:
            raise DataError(f"fold of {len(idx)} points cannot form {k} clusters")
        assign = kmeans(vectors[idx], k, rng)
        scores.append(purity(assign.tolist(), [tags[i] for i in idx]))
    return float(np.mean(scores))


def knn_classify(vectors: np.ndarray, tags: Sequence[str], k: int = 5,
                 folds: int = 10) -> float:
    """10-fold CV accuracy of Euclidean K-nearest-neighbor majority vote.

    Vote ties resolve to the nearest neighbor's tag among the tied tags.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    tags = list(tags)
    n = len(tags)
    fold_of = np.zeros(n, dtype=np.intp)
    for f, idx in enumerate(_fold_indices(n, folds)):
        fold_of[idx] = f
    correct = 0
    for i in range(n):
        train = np.flatnonzero(fold_of != fold_of[i])
        if not len(train):
            raise DataError("empty training fold")
        dists = ((vectors[train] - vectors[i]) ** 2).sum(axis=1)
        order = np.argsort(dists, kind="stable")[:k]
        neighbors = [tags[train[j]] for j in order]
        counts: dict[str, int] = {}
        for tag in neighbors:
            counts[tag] = counts.get(tag, 0) + 1
        top = max(counts.values())
        tied = {tag for tag, c in counts.items() if c == top}
        vote = next(tag for tag in neighbors if tag in tied)
        correct += vote == tags[i]
    return correct / n


# ---------------------------------------------------------------------------
# Embedding dump (exchange schema plus verb/label tag columns)


def write_embedding_dump(
    rows: Sequence[tuple[str, int, str, str, np.ndarray]], path
) -> None:
    from .encoding import _format_f32

    dims = {len(vec) for *_, vec in rows}
    if len(dims) > 1:
        raise DataError(f"ragged embedding dimensions: {sorted(dims)}")
    dim = dims.pop() if dims else 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#dim {dim}\n")
        for doc_id, node_id, verb, label, vec in rows:
            txt = " ".join(_format_f32(v) for v in vec)
            fh.write(f"{doc_id}\t{node_id}\t{verb}\t{label}\t{txt}\n")


def load_embedding_dump(path) -> list[tuple[str, int, str, str, np.ndarray]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("#dim"):
            raise DataError(f"{path}: missing '#dim <d>' header line")
        dim = int(header.split()[1])
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 tab-separated fields")
            doc_id, node_str, verb, label, vec_str = fields
            vec = np.array([float(x) for x in vec_str.split()], dtype=np.float64)
            if vec.shape[0] != dim:
                raise DataError(f"{path}:{lineno}: dimension mismatch")
            rows.append((doc_id, int(node_str), verb, label, vec))
    return rows
