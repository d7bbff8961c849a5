"""Output layers and losses: node classification, edge scoring for link
prediction, and attention-pooled document classification."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .graph import RELATIONS, SAMPLING_RATES, EdgeSample, Relation


def init_classifier(store: ad.ParameterStore, rng: np.random.Generator,
                    prefix: str, in_dim: int, hidden_dim: int, n_out: int) -> None:
    """Two feed-forward layers with a ReLU between them."""
    store.add(f"{prefix}/w1", ad.glorot(rng, (hidden_dim, in_dim)))
    store.add(f"{prefix}/b1", np.zeros(hidden_dim))
    store.add(f"{prefix}/w2", ad.glorot(rng, (n_out, hidden_dim)))
    store.add(f"{prefix}/b2", np.zeros(n_out))


def classifier_forward(params: Mapping[str, ad.Var], prefix: str, x: ad.Var) -> ad.Var:
    hidden = (x @ params[f"{prefix}/w1"].transpose() + params[f"{prefix}/b1"]).relu()
    return hidden @ params[f"{prefix}/w2"].transpose() + params[f"{prefix}/b2"]


def multiclass_ce(logits: ad.Var, labels: Sequence[int],
                  class_weights: np.ndarray | None = None) -> ad.Var:
    """Weighted cross-entropy: mean over examples of -alpha_y log softmax_y."""
    n, n_classes = logits.shape
    labels = np.asarray(labels, dtype=np.intp)
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError(f"label index outside [0, {n_classes})")
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), labels] = 1.0
    weights = np.ones(n) if class_weights is None else np.asarray(class_weights)[labels]
    picked = (logits.log_softmax(axis=1) * ad.Var(onehot)).sum(axis=1)
    return -((picked * ad.Var(weights)).mean())


def multilabel_bce(logits: ad.Var, gold_bits: np.ndarray) -> ad.Var:
    """Unweighted mean binary cross-entropy over every (example, label) cell."""
    gold = np.asarray(gold_bits, dtype=np.float64)
    if gold.shape != logits.shape:
        raise ValueError(f"gold shape {gold.shape} != logits shape {logits.shape}")
    pos = logits.logsigmoid() * ad.Var(gold)
    neg = (-logits).logsigmoid() * ad.Var(1.0 - gold)
    return -((pos + neg).mean())


def inverse_frequency_weights(labels: Sequence[int], n_classes: int) -> np.ndarray:
    """Inverse class frequency, normalized to mean 1 over the classes."""
    counts = np.bincount(np.asarray(labels, dtype=np.intp), minlength=n_classes)
    inv = 1.0 / np.maximum(counts, 1)
    return inv * n_classes / inv.sum()


# ---------------------------------------------------------------------------
# Link prediction


def init_distmult(store: ad.ParameterStore, rng: np.random.Generator, dim: int) -> None:
    for relation in RELATIONS:
        store.add(f"distmult/{relation.value}", ad.glorot(rng, (dim, dim)))


def edge_type_weights(mode: str = "rate") -> dict[Relation, float]:
    """Per-relation loss weights from the sampling distribution, mean 1.

    ``rate`` weights frequent relations up; ``inverse`` weights them down.
    """
    if mode == "rate":
        raw = {r: SAMPLING_RATES[r] for r in RELATIONS}
    elif mode == "inverse":
        raw = {r: 1.0 / SAMPLING_RATES[r] for r in RELATIONS}
    else:
        raise ValueError(f"unknown edge weight mode '{mode}'")
    mean = sum(raw.values()) / len(raw)
    return {r: v / mean for r, v in raw.items()}


def distmult_scores(params: Mapping[str, ad.Var], h: ad.Var,
                    samples: Sequence[EdgeSample]) -> list[ad.Var]:
    """Bilinear score h_i^T W_r h_j per sample, grouped by relation.

    Returns one (m_r,) score Var per relation group, aligned with
    :func:`group_samples`.
    """
    scores = []
    for relation, group in group_samples(samples):
        src = np.fromiter((s.source for s in group), dtype=np.intp)
        dst = np.fromiter((s.target for s in group), dtype=np.intp)
        h_src = ad.gather_rows(h, src)
        h_dst = ad.gather_rows(h, dst)
        w = params[f"distmult/{relation.value}"]
        scores.append(((h_src @ w) * h_dst).sum(axis=1))
    return scores


def group_samples(samples: Sequence[EdgeSample]) -> list[tuple[Relation, list[EdgeSample]]]:
    grouped: dict[Relation, list[EdgeSample]] = {}
    for sample in samples:
        grouped.setdefault(sample.relation, []).append(sample)
    return [(r, grouped[r]) for r in RELATIONS if r in grouped]


def link_loss(params: Mapping[str, ad.Var], h: ad.Var,
              samples: Sequence[EdgeSample],
              type_weights: Mapping[Relation, float]) -> ad.Var:
    """Mean over samples of -[y log sig(eps_r D) + (1-y) log(1 - sig(eps_r D))]."""
    if not samples:
        raise ValueError("link loss needs at least one edge sample")
    groups = group_samples(samples)
    scores = distmult_scores(params, h, samples)
    total: ad.Var | None = None
    for (relation, group), score in zip(groups, scores):
        y = np.fromiter((s.label for s in group), dtype=np.float64)
        scaled = score * float(type_weights[relation])
        term_pos = scaled.logsigmoid() * ad.Var(y)
        term_neg = (-scaled).logsigmoid() * ad.Var(1.0 - y)
        contrib = (term_pos + term_neg).sum()
        total = contrib if total is None else total + contrib
    return -(total * (1.0 / len(samples)))


def distmult_score_single(params: Mapping[str, ad.Var], h: ad.Var,
                          source: int, relation: Relation, target: int) -> ad.Var:
    [score] = distmult_scores(params, h, [EdgeSample(source, relation, target, 1)])
    return score.sum()  # (1,) -> scalar


# ---------------------------------------------------------------------------
# Document classification


def init_attention(store: ad.ParameterStore, rng: np.random.Generator, dim: int) -> None:
    store.add("attend/w", ad.glorot(rng, (1, 2 * dim)))
    store.add("attend/b", np.zeros(1))


def attend_document(params: Mapping[str, ad.Var], h: ad.Var,
                    query: ad.Var) -> tuple[ad.Var, ad.Var]:
    """Self-attention pool: a_i = ReLU(W [h_i; q] + b), alpha = softmax(a),
    document vector = sum_i alpha_i h_i. Returns (h_d, alpha)."""
    n = h.shape[0]
    if n == 0:
        raise ValueError("cannot attend over an empty graph")
    paired = ad.concat([h, ad.broadcast_rows(query, n)], axis=1)
    a = (paired @ params["attend/w"].transpose() + params["attend/b"]).relu()
    alpha = a.softmax(axis=0)
    h_doc = alpha.transpose() @ h
    return h_doc, alpha
