import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from storygraph.errors import DataError
from storygraph.estimators import (DesireClassifier, GraphBuilder,
                                   LinkPretrainer, MentalStateClassifier,
                                   SentimentPretrainer)
from storygraph.fixtures import (cue_task_corpus, desire_corpus,
                                 planted_rule_corpus)
from storygraph.graph import NarrativeGraph
from storygraph.validation import check_documents


def test_graph_builder_transform():
    docs = planted_rule_corpus(n_docs=3, seed=0)
    builder = GraphBuilder(max_nodes=10)
    graphs = builder.fit(docs).transform(docs)
    assert len(graphs) == 3
    assert all(isinstance(g, NarrativeGraph) for g in graphs)
    assert all(len(g.nodes) <= 10 for g in graphs)


def test_graph_builder_get_params_and_clone():
    builder = GraphBuilder(max_nodes=17)
    assert builder.get_params() == {"max_nodes": 17}
    assert clone(builder).max_nodes == 17


def test_check_documents_rejects_non_documents():
    with pytest.raises(DataError, match="Document"):
        check_documents(["not a document"])


def test_classifier_requires_fit_before_predict():
    clf = MentalStateClassifier()
    with pytest.raises(NotFittedError):
        clf.predict(planted_rule_corpus(n_docs=1, seed=0))


def test_classifier_fit_predict_score():
    docs = cue_task_corpus("plutchik", n_docs=8, seed=3)
    clf = MentalStateClassifier(task="plutchik", embed_dim=16, hidden_dim=16,
                                lr=2e-3, epochs=30, batch_size=32, seed=1)
    clf.fit(docs)
    predictions = clf.predict(docs)
    assert predictions, "no node predictions"
    probs = clf.predict_proba(docs)
    assert probs.shape == (len(predictions), 8)
    assert np.all((probs >= 0) & (probs <= 1))
    assert 0.0 <= clf.score(docs) <= 1.0


def test_classifier_rejects_unlabeled_documents():
    clf = MentalStateClassifier(task="maslow")
    with pytest.raises(DataError, match="maslow"):
        clf.fit(planted_rule_corpus(n_docs=2, seed=0))


def test_classifier_params_round_trip():
    clf = MentalStateClassifier(task="reiss", lr=1e-3, seed=9)
    params = clf.get_params()
    assert params["task"] == "reiss" and params["lr"] == 1e-3
    other = clone(clf)
    assert other.get_params() == params


def test_link_pretrainer_saves_checkpoint(tmp_path):
    docs = planted_rule_corpus(n_docs=3, seed=4)
    pre = LinkPretrainer(embed_dim=12, hidden_dim=12, epochs=2,
                         batch_size=32, lr=1e-3, seed=2)
    pre.fit(docs)
    pre.save(tmp_path / "ckpt")
    from storygraph.training import load_checkpoint
    model, history = load_checkpoint(tmp_path / "ckpt")
    assert model.task == "link"
    assert len(history) == 2


def test_sentiment_pretrainer_runs():
    docs = planted_rule_corpus(n_docs=3, seed=5)
    pre = SentimentPretrainer(embed_dim=12, hidden_dim=12, epochs=2,
                              batch_size=32, seed=3)
    pre.fit(docs)
    assert pre.model_.task == "sentiment"


def test_desire_classifier_fit_predict():
    docs = desire_corpus(n_docs=12, seed=6)
    clf = DesireClassifier(embed_dim=12, hidden_dim=12, epochs=10, lr=2e-3,
                           batch_size=16, seed=4)
    clf.fit(docs)
    decisions = clf.predict(docs)
    assert set(decisions) <= {"fulfilled", "unfulfilled"}
    probs = clf.predict_proba(docs)
    assert np.allclose(probs.sum(axis=1), 1.0)


def test_pipeline_init_from_checkpoint(tmp_path):
    corpus_docs = planted_rule_corpus(n_docs=4, seed=7)
    LinkPretrainer(embed_dim=12, hidden_dim=12, epochs=2, batch_size=32,
                   lr=1e-3, seed=5).fit(corpus_docs).save(tmp_path / "pretrained")
    docs = cue_task_corpus("plutchik", n_docs=4, seed=8)
    clf = MentalStateClassifier(task="plutchik", embed_dim=12, hidden_dim=12,
                                epochs=3, batch_size=32, seed=6,
                                init_checkpoint=str(tmp_path / "pretrained"))
    clf.fit(docs)
    assert clf.predict(docs)
