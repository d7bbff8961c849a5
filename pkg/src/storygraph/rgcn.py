"""Relational graph convolution over narrative graphs.

Each layer applies one weight matrix per relation type plus an optional
self-loop matrix; incoming messages are averaged per relation and passed
through ReLU. Message direction follows edge direction (in-neighbors by
default, configurable).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import autodiff as ad
from .graph import RELATIONS, NarrativeGraph, Relation

SELF_LOOP = "self"


@dataclass(frozen=True)
class RgcnConfig:
    layers: int = 2
    hidden_dim: int = 128
    self_loop: bool = True
    in_neighbors: bool = True  # messages arrive along edge direction


def init_rgcn(store: ad.ParameterStore, rng: np.random.Generator,
              in_dim: int, config: RgcnConfig) -> None:
    d_in = in_dim
    for layer in range(config.layers):
        for relation in RELATIONS:
            store.add(f"rgcn/{layer}/{relation.value}",
                      ad.glorot(rng, (config.hidden_dim, d_in)))
        if config.self_loop:
            store.add(f"rgcn/{layer}/{SELF_LOOP}",
                      ad.glorot(rng, (config.hidden_dim, d_in)))
        d_in = config.hidden_dim


def relation_adjacency(graph: NarrativeGraph,
                       in_neighbors: bool = True,
                       exclude: frozenset | None = None) -> dict[Relation, np.ndarray]:
    """Degree-normalized dense adjacency per relation.

    A[i, u] = 1/z_i when u sends a message to i under the relation, with z_i
    the number of such senders. ``exclude`` drops specific edges (used when
    masking sampled edges out of message passing).
    """
    n = len(graph.nodes)
    adj: dict[Relation, np.ndarray] = {}
    for edge in graph.edges:
        if exclude is not None and edge in exclude:
            continue
        receiver, sender = (edge.target, edge.source) if in_neighbors \
            else (edge.source, edge.target)
        mat = adj.setdefault(edge.relation, np.zeros((n, n)))
        mat[receiver, sender] = 1.0
    for mat in adj.values():
        degree = mat.sum(axis=1, keepdims=True)
        np.divide(mat, degree, out=mat, where=degree > 0)
    return adj


def rgcn_layer_forward(params: Mapping[str, ad.Var],
                       layer: int,
                       adjacency: Mapping[Relation, np.ndarray],
                       h: ad.Var,
                       self_loop: bool = True) -> ad.Var:
    """One convolution: ReLU( sum_r A_r (H W_r^T) [+ H W_self^T] )."""
    acc: ad.Var | None = None
    for relation in RELATIONS:
        mat = adjacency.get(relation)
        if mat is None:
            continue
        term = ad.Var(mat) @ (h @ params[f"rgcn/{layer}/{relation.value}"].transpose())
        acc = term if acc is None else acc + term
    if self_loop:
        term = h @ params[f"rgcn/{layer}/{SELF_LOOP}"].transpose()
        acc = term if acc is None else acc + term
    if acc is None:
        out_dim = params[f"rgcn/{layer}/{Relation.NEXT.value}"].shape[0]
        acc = ad.Var(np.zeros((h.shape[0], out_dim)))
    return acc.relu()


def contextualize(params: Mapping[str, ad.Var],
                  graph: NarrativeGraph,
                  node_vectors: ad.Var,
                  config: RgcnConfig,
                  exclude_edges: frozenset | None = None) -> ad.Var:
    """Apply the full layer stack; a 0-layer stack is the identity."""
    adjacency = relation_adjacency(graph, config.in_neighbors, exclude_edges)
    h = node_vectors
    for layer in range(config.layers):
        h = rgcn_layer_forward(params, layer, adjacency, h, config.self_loop)
    return h
