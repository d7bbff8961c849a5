"""Cross-module invariants that don't belong to a single unit-test file."""

import numpy as np
from hypothesis import given, settings, strategies as st

from storygraph import autodiff as ad
from storygraph import heads
from storygraph.autodiff import ParameterStore, Tape, Var
from storygraph.corpus import DEFAULT_LEXICON
from storygraph.encoding import (ExternalEmbeddingTable, MAX_INPUT_TOKENS,
                                 assemble_node_input, external_node_vectors,
                                 init_external_projection)
from storygraph.fixtures import sentiment_cue_corpus
from storygraph.graph import (GraphNode, NarrativeGraph, Relation, TypedEdge,
                              build_graph)
from storygraph.inference import PolarityGroups, ground_rules, parse_rules
from storygraph.rgcn import RgcnConfig, contextualize, init_rgcn
from storygraph.training import ModelConfig, TrainConfig, pretrain_sentiment


def test_external_projection_passes_finite_difference():
    rng = np.random.default_rng(0)
    store = ParameterStore()
    init_external_projection(store, rng, ext_dim=10, out_dim=4)
    config = RgcnConfig(layers=2, hidden_dim=4)
    init_rgcn(store, rng, 4, config)
    heads.init_classifier(store, rng, "node_head", 4, 4, 3)
    nodes = tuple(GraphNode(i, f"e{i}", i, (0, 1)) for i in range(3))
    graph = NarrativeGraph("g", nodes, (TypedEdge(0, Relation.NEXT, 1),
                                        TypedEdge(1, Relation.CNEXT, 2)))
    table = ExternalEmbeddingTable(dim=10, vectors={
        ("g", i): rng.normal(size=10) for i in range(3)})
    gold = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])

    def loss(params):
        v = external_node_vectors(params, table, graph, 4)
        h = contextualize(params, graph, v, config)
        return heads.multilabel_bce(
            heads.classifier_forward(params, "node_head", h), gold)

    err = ad.finite_difference_check(loss, store, rng=np.random.default_rng(1))
    assert err < 1e-4


def test_adding_edge_only_changes_reachable_nodes():
    # one layer left: an extra edge u -> v may only move v's representation
    rng = np.random.default_rng(2)
    config = RgcnConfig(layers=1, hidden_dim=5, self_loop=True)
    store = ParameterStore()
    init_rgcn(store, rng, 5, config)
    nodes = tuple(GraphNode(i, f"e{i}", i, (0, 1)) for i in range(4))
    base_edges = (TypedEdge(0, Relation.NEXT, 1),)
    h = rng.normal(size=(4, 5))

    def out(edges):
        graph = NarrativeGraph("g", nodes, edges)
        return contextualize(store.bind(Tape()), graph, Var(h), config).data

    before = out(base_edges)
    after = out(base_edges + (TypedEdge(2, Relation.REASON, 3),))
    changed = np.abs(after - before).max(axis=1) > 0
    assert not changed[0] and not changed[1] and not changed[2]
    assert changed[3]


def test_grounding_counts_closed_form():
    polarity = PolarityGroups(positive=frozenset({"joy", "trust", "anticipation",
                                                  "surprise"}),
                              negative=frozenset({"fear", "sadness", "anger",
                                                  "disgust"}))
    rules = parse_rules("weighted: Entity(E) => Plut(E, L)\n"
                        "hard: Plut(E, P) & Pos(P) & !Pos(Q) => !Plut(E, Q)\n")
    for m in (1, 2, 5, 9):
        nodes = tuple(GraphNode(i, "a", i, (0, 1)) for i in range(m))
        graph = NarrativeGraph("g", nodes, ())
        program = ground_rules(rules, graph, polarity=polarity)
        assert len(program.variables) == m * 8
        assert len(program.weighted) == m * 8
        assert len(program.hard) == m * 4 * 4


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 200), st.integers(0, 5), st.integers(1, 8))
def test_node_input_budget_property(fill, extra_sentences, n_labels):
    from storygraph.corpus import CorefChain, Document, Sentence, PLUTCHIK_LABELS
    n_sentences = 1 + extra_sentences
    sentences = []
    for i in range(n_sentences):
        tokens = ["alice"] + [f"w{i}x{j}" for j in range(fill)]
        sentences.append(Sentence(i, " ".join(tokens), tuple(tokens)))
    doc = Document("d", tuple(sentences),
                   (CorefChain("alice", tuple((i, 0, 1) for i in range(n_sentences))),))
    node = GraphNode(0, "alice", 0, (0, 1))
    labels = PLUTCHIK_LABELS[:n_labels]
    ni = assemble_node_input(doc, node, labels)
    assert ni.total_tokens() <= MAX_INPUT_TOKENS
    # the label sentence is always intact
    assert ni.label_sentence[:3] == ("alice", "is", labels[0].split()[0])
    assert ni.label_sentence[-1] == "."


def test_sentiment_pretraining_deterministic():
    docs = sentiment_cue_corpus(n_docs=6, seed=3)
    graphs = [build_graph(d) for d in docs]
    config = TrainConfig(objective="sentiment", lr=1e-3, batch_size=32,
                         epochs=2, seed=11)
    mc = ModelConfig(embed_dim=10, hidden_dim=10)
    a, _ = pretrain_sentiment(docs, graphs, DEFAULT_LEXICON, config, mc)
    b, _ = pretrain_sentiment(docs, graphs, DEFAULT_LEXICON, config, mc)
    for name in a.store.names():
        assert np.array_equal(a.store.get(name), b.store.get(name))
