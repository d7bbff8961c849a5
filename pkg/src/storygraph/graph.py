"""Entity-event narrative graphs: typed-edge construction from annotated
documents plus positive/negative edge sampling for link prediction.

Nodes are (entity, sentence) pairs; the eight public relation types carry a
fixed sampling distribution used both for drawing training positives and for
edge-type loss weights.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Document
from .errors import DataError, NumericError


class Relation(Enum):
    NEXT = "Next"
    CNEXT = "CNext"
    BEFORE = "Before"
    AFTER = "After"
    SYNC = "Sync"
    CONTRAST = "Contrast"
    REASON = "Reason"
    RESULT = "Result"


RELATIONS: tuple[Relation, ...] = tuple(Relation)

# Sampling distribution over relation types for link-prediction positives.
SAMPLING_RATES: dict[Relation, float] = {
    Relation.NEXT: 0.50,
    Relation.CNEXT: 0.20,
    Relation.BEFORE: 0.05,
    Relation.AFTER: 0.05,
    Relation.SYNC: 0.05,
    Relation.CONTRAST: 0.05,
    Relation.REASON: 0.05,
    Relation.RESULT: 0.05,
}

# Minimal high-precision connective lexicon mapping surfaces to discourse
# relations; unmapped surfaces produce no edges.
CONNECTIVE_RELATIONS: dict[str, Relation] = {
    "before": Relation.BEFORE,
    "after": Relation.AFTER,
    "once": Relation.AFTER,
    "while": Relation.SYNC,
    "meanwhile": Relation.SYNC,
    "when": Relation.SYNC,
    "but": Relation.CONTRAST,
    "however": Relation.CONTRAST,
    "though": Relation.CONTRAST,
    "because": Relation.REASON,
    "since": Relation.REASON,
    "so": Relation.RESULT,
    "thus": Relation.RESULT,
    "therefore": Relation.RESULT,
}

DEFAULT_MAX_NODES = 60


@dataclass(frozen=True)
class GraphNode:
    node_id: int
    entity_name: str
    sentence_index: int
    span: tuple[int, int]  # first mention span in the sentence


@dataclass(frozen=True)
class TypedEdge:
    source: int
    relation: Relation
    target: int


# Relation is not orderable; edge collections sort with this key.
def edge_key(edge: TypedEdge) -> tuple[int, int, int]:
    return (RELATIONS.index(edge.relation), edge.source, edge.target)


@dataclass
class NarrativeGraph:
    doc_id: str
    nodes: tuple[GraphNode, ...]
    edges: tuple[TypedEdge, ...]

    def __post_init__(self):
        self.edges = tuple(sorted(self.edges, key=edge_key))
        self._edge_set = frozenset(self.edges)
        n = len(self.nodes)
        for e in self.edges:
            if not (0 <= e.source < n and 0 <= e.target < n):
                raise DataError(f"{self.doc_id}: edge {e} references a missing node")

    def has_edge(self, source: int, relation: Relation, target: int) -> bool:
        return TypedEdge(source, relation, target) in self._edge_set

    def edges_of(self, relation: Relation) -> list[TypedEdge]:
        return [e for e in self.edges if e.relation is relation]

    def node_for(self, entity_name: str, sentence_index: int) -> GraphNode | None:
        for node in self.nodes:
            if node.entity_name == entity_name and node.sentence_index == sentence_index:
                return node
        return None


@dataclass(frozen=True)
class EdgeSample:
    source: int
    relation: Relation
    target: int
    label: int  # 1 positive, 0 negative


def _nodes_from_document(doc: Document) -> list[GraphNode]:
    # one node per (entity, sentence); keep the first mention span;
    # ids contiguous in sentence order, then chain order
    first_span: dict[tuple[int, int], tuple[int, int]] = {}
    for ci, chain in enumerate(doc.chains):
        for sent_idx, start, end in chain.mentions:
            key = (sent_idx, ci)
            if key not in first_span:
                first_span[key] = (start, end)
    nodes = []
    for node_id, (sent_idx, ci) in enumerate(sorted(first_span)):
        start, end = first_span[(sent_idx, ci)]
        nodes.append(GraphNode(node_id, doc.chains[ci].entity_name, sent_idx, (start, end)))
    return nodes


def extract_discourse_relations(
    doc: Document,
    nodes: Sequence[GraphNode],
    lexicon: Mapping[str, Relation] | None = None,
) -> list[TypedEdge]:
    """Map connective annotations to typed edges.

    Sentence-initial connectives in sentence k connect every node of k-1 to
    every node of k. Medial connectives connect nodes left of the connective
    span to nodes right of it within the same sentence.
    """
    lexicon = CONNECTIVE_RELATIONS if lexicon is None else lexicon
    by_sentence: dict[int, list[GraphNode]] = {}
    for node in nodes:
        by_sentence.setdefault(node.sentence_index, []).append(node)
    edges = []
    for conn in doc.connectives:
        relation = lexicon.get(conn.surface)
        if relation is None:
            continue
        k = conn.sentence_index
        if conn.position == "sentence-initial":
            for src in by_sentence.get(k - 1, ()):
                for dst in by_sentence.get(k, ()):
                    edges.append(TypedEdge(src.node_id, relation, dst.node_id))
        else:
            here = by_sentence.get(k, ())
            left = [n for n in here if n.span[0] < conn.start]
            right = [n for n in here if n.span[0] >= conn.end]
            for src in left:
                for dst in right:
                    if src.node_id != dst.node_id:
                        edges.append(TypedEdge(src.node_id, relation, dst.node_id))
    return edges


def build_graph(
    doc: Document,
    max_nodes: int = DEFAULT_MAX_NODES,
    connective_lexicon: Mapping[str, Relation] | None = None,
) -> NarrativeGraph:
    """Deterministic graph construction from one document.

    Next edges connect every node of sentence i to every node of sentence
    i+1; CNext edges connect consecutive nodes of the same coreference chain;
    discourse edges come from the connective lexicon. When the node count
    exceeds ``max_nodes``, the earliest nodes are kept and edges touching
    dropped nodes are removed.
    """
    nodes = _nodes_from_document(doc)
    edges: set[TypedEdge] = set()

    by_sentence: dict[int, list[GraphNode]] = {}
    for node in nodes:
        by_sentence.setdefault(node.sentence_index, []).append(node)
    for i in sorted(by_sentence):
        for src in by_sentence[i]:
            for dst in by_sentence.get(i + 1, ()):
                edges.add(TypedEdge(src.node_id, Relation.NEXT, dst.node_id))

    by_entity: dict[str, list[GraphNode]] = {}
    for node in nodes:
        by_entity.setdefault(node.entity_name, []).append(node)
    for chain_nodes in by_entity.values():
        chain_nodes.sort(key=lambda n: n.sentence_index)
        for a, b in zip(chain_nodes, chain_nodes[1:]):
            edges.add(TypedEdge(a.node_id, Relation.CNEXT, b.node_id))

    edges.update(extract_discourse_relations(doc, nodes, connective_lexicon))

    if len(nodes) > max_nodes:
        nodes = nodes[:max_nodes]
        keep = {n.node_id for n in nodes}
        edges = {e for e in edges if e.source in keep and e.target in keep}

    return NarrativeGraph(doc_id=doc.doc_id, nodes=tuple(nodes), edges=tuple(edges))


def sample_training_edges(
    graph: NarrativeGraph,
    sample_rate: float,
    distribution: Mapping[Relation, float] | None = None,
    rng: np.random.Generator | None = None,
) -> list[EdgeSample]:
    """Draw ceil(sample_rate * |E|) positive samples without replacement.

    Each draw first picks a relation type from the distribution, then a
    uniform remaining edge of that type; exhausted or absent types fall back
    to the renormalized distribution over the rest.
    """
    if not 0 < sample_rate <= 1:
        raise ValueError(f"sample_rate must be in (0, 1], got {sample_rate}")
    distribution = SAMPLING_RATES if distribution is None else distribution
    rng = rng or np.random.default_rng()
    if not graph.edges:
        return []
    pools: dict[Relation, list[TypedEdge]] = {r: [] for r in RELATIONS}
    for edge in graph.edges:  # already canonically sorted
        pools[edge.relation].append(edge)
    want = math.ceil(sample_rate * len(graph.edges))
    samples: list[EdgeSample] = []
    rates = np.array([distribution[r] for r in RELATIONS], dtype=np.float64)
    for _ in range(want):
        avail = np.array([len(pools[r]) > 0 for r in RELATIONS])
        probs = np.where(avail, rates, 0.0)
        probs /= probs.sum()
        relation = RELATIONS[rng.choice(len(RELATIONS), p=probs)]
        pool = pools[relation]
        # swap-pop keeps the uniform draw O(1) without replacement
        idx = int(rng.integers(len(pool)))
        pool[idx], pool[-1] = pool[-1], pool[idx]
        edge = pool.pop()
        samples.append(EdgeSample(edge.source, edge.relation, edge.target, 1))
    return samples


_CORRUPT_ATTEMPTS = 100


def corrupt_edge(
    graph: NarrativeGraph,
    positive: EdgeSample | TypedEdge,
    rng: np.random.Generator,
) -> EdgeSample:
    """Negative sample from one positive by replacing a uniformly chosen
    component (source, relation, or target) with a resampled one so the
    resulting triple is absent from the graph."""
    i, r, j = positive.source, positive.relation, positive.target
    if not graph.has_edge(i, r, j):
        raise ValueError(f"({i}, {r.value}, {j}) is not an edge of {graph.doc_id}")
    n = len(graph.nodes)
    component = int(rng.integers(3))
    for _ in range(3):
        for _ in range(_CORRUPT_ATTEMPTS):
            if component == 0:
                cand = (int(rng.integers(n)), r, j)
            elif component == 1:
                cand = (i, RELATIONS[int(rng.integers(len(RELATIONS)))], j)
            else:
                cand = (i, r, int(rng.integers(n)))
            if not graph.has_edge(*cand) and cand != (i, r, j):
                return EdgeSample(cand[0], cand[1], cand[2], 0)
        component = (component + 1) % 3
    raise NumericError(
        f"{graph.doc_id}: could not corrupt ({i}, {r.value}, {j}); graph too dense"
    )


# ---------------------------------------------------------------------------
# Graph dump file: one graph per line


def graph_to_json(graph: NarrativeGraph) -> dict:
    return {
        "doc_id": graph.doc_id,
        "nodes": [
            {"id": n.node_id, "entity": n.entity_name,
             "sentence": n.sentence_index, "span": list(n.span)}
            for n in graph.nodes
        ],
        "edges": [[e.source, e.relation.value, e.target] for e in graph.edges],
    }


def graph_from_json(raw: dict) -> NarrativeGraph:
    try:
        nodes = tuple(
            GraphNode(int(n["id"]), n["entity"], int(n["sentence"]),
                      (int(n["span"][0]), int(n["span"][1])))
            for n in raw["nodes"]
        )
        edges = tuple(
            TypedEdge(int(s), Relation(r), int(t)) for s, r, t in raw["edges"]
        )
        return NarrativeGraph(doc_id=str(raw["doc_id"]), nodes=nodes, edges=edges)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed graph record: {exc}") from exc


def write_graphs(graphs: Iterable[NarrativeGraph], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for graph in graphs:
            fh.write(json.dumps(graph_to_json(graph)) + "\n")


def load_graphs(path) -> list[NarrativeGraph]:
    graphs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            graphs.append(graph_from_json(raw))
    return graphs
