import json
import os

import numpy as np
import pytest

from storygraph.corpus import DEFAULT_LEXICON, sentiment_label
from storygraph.errors import DataError
from storygraph.fixtures import (cue_task_corpus, desire_corpus,
                                 planted_rule_corpus, sentiment_cue_corpus)
from storygraph.graph import build_graph
from storygraph.training import (ModelConfig, TrainConfig, load_checkpoint,
                                 new_model, node_embeddings, predict_documents,
                                 predict_nodes, pretrain_link, pretrain_sentiment,
                                 save_checkpoint, train_downstream,
                                 transfer_pretrained)

SMALL = ModelConfig(embed_dim=12, hidden_dim=12)


def _link_setup(n_docs=4, seed=0):
    docs = planted_rule_corpus(n_docs=n_docs, seed=seed)
    graphs = [build_graph(d) for d in docs]
    return docs, graphs


def test_lr_zero_parameters_unchanged():
    docs, graphs = _link_setup(n_docs=1)
    config = TrainConfig(objective="link", lr=0.0, batch_size=8, epochs=1, seed=3,
                         adam=__import__("storygraph.autodiff", fromlist=["AdamConfig"])
                         .AdamConfig(lr=0.0, weight_decay=0.0))
    model, _ = pretrain_link(docs, graphs, config, SMALL)
    fresh = new_model(docs, SMALL, "link", 3)
    for name in fresh.store.names():
        assert np.array_equal(model.store.get(name), fresh.store.get(name)), name


def test_fixed_seed_identical_checkpoints(tmp_path):
    docs, graphs = _link_setup()
    config = TrainConfig(objective="link", lr=1e-3, batch_size=32, epochs=2, seed=7)
    a, ha = pretrain_link(docs, graphs, config, SMALL)
    b, hb = pretrain_link(docs, graphs, config, SMALL)
    for name in a.store.names():
        assert np.array_equal(a.store.get(name), b.store.get(name)), name
    save_checkpoint(a, ha, tmp_path / "a")
    save_checkpoint(b, hb, tmp_path / "b")
    for fname in sorted(os.listdir(tmp_path / "a")):
        assert (tmp_path / "a" / fname).read_bytes() == \
            (tmp_path / "b" / fname).read_bytes(), fname


def test_link_loss_non_increasing_first_epochs():
    # averaged over 3 seeds, the first five epochs do not increase the loss
    docs, graphs = _link_setup(n_docs=10, seed=2)
    curves = []
    for seed in (0, 1, 2):
        config = TrainConfig(objective="link", lr=1e-3, batch_size=64,
                             epochs=5, seed=seed)
        _, history = pretrain_link(docs, graphs, config, SMALL)
        curves.append([h.loss for h in history])
    mean = np.mean(curves, axis=0)
    assert all(mean[i + 1] <= mean[i] + 1e-9 for i in range(4))


def test_empty_corpus_rejected():
    config = TrainConfig(objective="link", seed=0)
    with pytest.raises(DataError):
        pretrain_link([], [], config, SMALL)


def test_sentiment_separable_toy_learns():
    docs = sentiment_cue_corpus(n_docs=24, seed=4)
    graphs = [build_graph(d) for d in docs]
    config = TrainConfig(objective="sentiment", lr=5e-3, batch_size=64,
                         epochs=60, seed=1)
    model, history = pretrain_sentiment(docs, graphs, DEFAULT_LEXICON, config,
                                        ModelConfig(embed_dim=24, hidden_dim=24))
    predictions = predict_nodes(model, docs)
    correct = total = 0
    for p in predictions:
        doc = next(d for d in docs if d.doc_id == p.doc_id)
        gold = sentiment_label(doc.sentences[p.sentence].tokens, DEFAULT_LEXICON)
        total += 1
        correct += p.decisions == frozenset({gold})
    assert correct / total >= 0.99


def test_sentiment_degenerate_constant_prediction():
    docs = sentiment_cue_corpus(n_docs=8, seed=5)
    # strip polarity cues: every sentence neutral
    from storygraph.corpus import Sentence, Document
    neutral_docs = []
    for d in docs:
        sentences = tuple(
            Sentence(s.index, s.text.replace("happy", "week").replace("sad", "week"),
                     tuple("week" if t in ("happy", "sad") else t for t in s.tokens))
            for s in d.sentences)
        neutral_docs.append(Document(d.doc_id, sentences, d.chains, d.connectives))
    graphs = [build_graph(d) for d in neutral_docs]
    config = TrainConfig(objective="sentiment", lr=1e-3, batch_size=32,
                         epochs=5, seed=2)
    model, _ = pretrain_sentiment(neutral_docs, graphs, DEFAULT_LEXICON, config, SMALL)
    predictions = predict_nodes(model, neutral_docs)
    assert {p.decisions for p in predictions} == {frozenset({"neutral"})}


# -- downstream --------------------------------------------------------------


def _downstream_config(**kw):
    defaults = dict(objective="plutchik", lr=2e-3, batch_size=32, epochs=10,
                    warmup_steps=0, warmup_proportion=None, patience=10, seed=5)
    defaults.update(kw)
    return TrainConfig(**defaults)


def test_overfit_small_subset():
    docs = cue_task_corpus("plutchik", n_docs=6, seed=11)
    config = _downstream_config(epochs=200, patience=200)
    model, _ = train_downstream("plutchik", docs, [], config,
                                ModelConfig(embed_dim=32, hidden_dim=32))
    from storygraph.training import evaluate_node_task
    assert evaluate_node_task(model, docs).micro[2] >= 99.0


def test_patience_one_constant_metric_stops_after_two_epochs():
    docs = cue_task_corpus("plutchik", n_docs=4, seed=12)
    dev = cue_task_corpus("plutchik", n_docs=2, seed=13)
    config = _downstream_config(lr=0.0, epochs=50, patience=1)
    _, history = train_downstream("plutchik", docs, dev, config, SMALL)
    assert len(history) == 2


def test_early_stop_returns_best_not_last():
    docs = cue_task_corpus("plutchik", n_docs=10, seed=14)
    dev = cue_task_corpus("plutchik", n_docs=5, seed=15)
    config = _downstream_config(epochs=12, patience=3)
    model, history = train_downstream("plutchik", docs, dev, config, SMALL)
    from storygraph.training import evaluate_node_task
    final = evaluate_node_task(model, dev).macro[2]
    best = max(h.metric for h in history)
    assert final == pytest.approx(best)


def test_pretrain_transfer_keeps_encoder_fresh_heads():
    docs, graphs = _link_setup(n_docs=5, seed=6)
    config = TrainConfig(objective="link", lr=1e-3, batch_size=32, epochs=2, seed=9)
    pretrained, _ = pretrain_link(docs, graphs, config, SMALL)

    task_docs = cue_task_corpus("plutchik", n_docs=4, seed=16)
    model = new_model(task_docs, SMALL, "plutchik", 9, vocab=dict(pretrained.vocab))
    transfer_pretrained(model, pretrained)
    for name in model.store.names():
        if name.startswith(("encoder/", "rgcn/")):
            assert np.array_equal(model.store.get(name), pretrained.store.get(name))
    fresh = new_model(task_docs, SMALL, "plutchik", 9, vocab=dict(pretrained.vocab))
    for name in model.store.names():
        if name.startswith("node_head/"):
            assert np.array_equal(model.store.get(name), fresh.store.get(name))


def test_transfer_task_mismatch_rejected():
    maslow_docs = cue_task_corpus("maslow", n_docs=3, seed=17)
    plutchik_docs = cue_task_corpus("plutchik", n_docs=3, seed=17)
    config = _downstream_config(objective="maslow", epochs=1)
    maslow_model, _ = train_downstream("maslow", maslow_docs, [], config, SMALL)
    target = new_model(plutchik_docs, SMALL, "plutchik", 0)
    with pytest.raises(DataError, match="maslow"):
        transfer_pretrained(target, maslow_model)


def test_desire_document_task_trains():
    docs = desire_corpus(n_docs=20, seed=18)
    dev = desire_corpus(n_docs=10, seed=19)
    config = _downstream_config(objective="desire", epochs=40, lr=5e-3, patience=40)
    model, history = train_downstream("desire", docs, dev, config, SMALL)
    from storygraph.training import evaluate_document_task
    report = evaluate_document_task(model, docs)
    assert report.macro[2] > 75.0
    predictions = predict_documents(model, docs)
    assert len(predictions) == len(docs)
    assert all(p.decision in ("fulfilled", "unfulfilled") for p in predictions)


# -- checkpoints -------------------------------------------------------------


def test_checkpoint_round_trip_identical_predictions(tmp_path):
    docs = cue_task_corpus("plutchik", n_docs=4, seed=20)
    config = _downstream_config(epochs=3)
    model, history = train_downstream("plutchik", docs, [], config, SMALL)
    save_checkpoint(model, history, tmp_path / "ckpt")
    loaded, history2 = load_checkpoint(tmp_path / "ckpt")
    save_checkpoint(loaded, history2, tmp_path / "ckpt2")
    loaded2, _ = load_checkpoint(tmp_path / "ckpt2")
    p1 = predict_nodes(loaded, docs)
    p2 = predict_nodes(loaded2, docs)
    for a, b in zip(p1, p2):
        assert a.scores == b.scores and a.decisions == b.decisions
    emb1 = node_embeddings(loaded, docs[0], build_graph(docs[0]))
    emb2 = node_embeddings(loaded2, docs[0], build_graph(docs[0]))
    assert np.array_equal(emb1, emb2)


def test_checkpoint_truncated_array_names_parameter(tmp_path):
    docs, graphs = _link_setup(n_docs=2, seed=1)
    config = TrainConfig(objective="link", lr=1e-3, batch_size=16, epochs=1, seed=4)
    model, history = pretrain_link(docs, graphs, config, SMALL)
    save_checkpoint(model, history, tmp_path / "ckpt")
    target = tmp_path / "ckpt" / "encoder__proj_w.bin"
    target.write_bytes(target.read_bytes()[:-8])
    with pytest.raises(DataError, match="encoder/proj_w"):
        load_checkpoint(tmp_path / "ckpt")


def test_checkpoint_unknown_parameter_rejected(tmp_path):
    docs, graphs = _link_setup(n_docs=2, seed=1)
    config = TrainConfig(objective="link", lr=1e-3, batch_size=16, epochs=1, seed=4)
    model, history = pretrain_link(docs, graphs, config, SMALL)
    save_checkpoint(model, history, tmp_path / "ckpt")
    manifest_path = tmp_path / "ckpt" / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    (tmp_path / "ckpt" / "bogus.bin").write_bytes(np.zeros(4, "<f4").tobytes())
    manifest["params"].append({"name": "bogus", "shape": [4], "file": "bogus.bin"})
    manifest_path.write_text(json.dumps(manifest))
    with pytest.raises(DataError, match="unknown"):
        load_checkpoint(tmp_path / "ckpt")


def test_checkpoint_missing_parameter_rejected(tmp_path):
    docs, graphs = _link_setup(n_docs=2, seed=1)
    config = TrainConfig(objective="link", lr=1e-3, batch_size=16, epochs=1, seed=4)
    model, history = pretrain_link(docs, graphs, config, SMALL)
    save_checkpoint(model, history, tmp_path / "ckpt")
    manifest_path = tmp_path / "ckpt" / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    manifest["params"] = [p for p in manifest["params"]
                          if p["name"] != "encoder/proj_b"]
    manifest_path.write_text(json.dumps(manifest))
    with pytest.raises(DataError, match="missing"):
        load_checkpoint(tmp_path / "ckpt")
