"""scikit-learn style wrappers over the training pipeline.

X is always a sequence of :class:`storygraph.corpus.Document`; task labels
ride on the documents themselves (``task_payload``), so ``y`` is accepted but
ignored, as in sklearn text pipelines whose targets live in the input records.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import training
from .corpus import SentimentLexicon, DEFAULT_LEXICON
from .graph import DEFAULT_MAX_NODES, build_graph
from .training import ModelConfig, TrainConfig
from .validation import (check_documents, check_labeled_documents,
                         check_is_fitted)


class GraphBuilder(BaseEstimator, TransformerMixin):
    """Documents -> narrative graphs; stateless, fit is a no-op."""

    def __init__(self, max_nodes=DEFAULT_MAX_NODES):
        self.max_nodes = max_nodes

    def fit(self, X, y=None):
        check_documents(X)
        return self

    def transform(self, X):
        return [build_graph(doc, self.max_nodes) for doc in check_documents(X)]


class _ModelConfigMixin:
    def _model_config(self) -> ModelConfig:
        return ModelConfig(
            embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim,
            rgcn_layers=self.rgcn_layers,
            max_nodes=self.max_nodes,
        )


class LinkPretrainer(BaseEstimator, _ModelConfigMixin):
    """Link-prediction pre-training over a document corpus."""

    def __init__(self, embed_dim=128, hidden_dim=128, rgcn_layers=2,
                 max_nodes=DEFAULT_MAX_NODES, lr=1e-4, batch_size=256,
                 epochs=100, sample_rate=0.2, seed=0):
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.rgcn_layers = rgcn_layers
        self.max_nodes = max_nodes
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.sample_rate = sample_rate
        self.seed = seed

    def fit(self, X, y=None):
        docs = check_documents(X)
        graphs = [build_graph(doc, self.max_nodes) for doc in docs]
        config = TrainConfig(objective="link", lr=self.lr,
                             batch_size=self.batch_size, epochs=self.epochs,
                             sample_rate=self.sample_rate, seed=self.seed)
        self.model_, self.history_ = training.pretrain_link(
            docs, graphs, config, self._model_config())
        return self

    def save(self, path):
        check_is_fitted(self)
        training.save_checkpoint(self.model_, self.history_, path)


class MentalStateClassifier(BaseEstimator, _ModelConfigMixin):
    """Multi-label node classifier for one mental-state task."""

    def __init__(self, task="plutchik", embed_dim=128, hidden_dim=128,
                 rgcn_layers=2, max_nodes=DEFAULT_MAX_NODES, lr=2e-4,
                 batch_size=256, epochs=100, warmup_steps=0, patience=10,
                 seed=0, init_checkpoint=None):
        self.task = task
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.rgcn_layers = rgcn_layers
        self.max_nodes = max_nodes
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.warmup_steps = warmup_steps
        self.patience = patience
        self.seed = seed
        self.init_checkpoint = init_checkpoint

    def _train_config(self) -> TrainConfig:
        return TrainConfig(objective=self.task, lr=self.lr,
                           batch_size=self.batch_size, epochs=self.epochs,
                           warmup_steps=self.warmup_steps,
                           warmup_proportion=None, patience=self.patience,
                           seed=self.seed)

    def fit(self, X, y=None, dev=None):
        docs = check_labeled_documents(X, self.task)
        dev_docs = check_labeled_documents(dev, self.task) if dev is not None else []
        init = None
        if self.init_checkpoint is not None:
            init, _ = training.load_checkpoint(self.init_checkpoint)
        self.model_, self.history_ = training.train_downstream(
            self.task, docs, dev_docs, self._train_config(),
            self._model_config(), init=init)
        return self

    def predict(self, X):
        """Active label set per (doc, entity, sentence) node."""
        check_is_fitted(self)
        return training.predict_nodes(self.model_, check_documents(X))

    def predict_proba(self, X):
        """(n_nodes, n_labels) sigmoid scores, node order as in predict()."""
        check_is_fitted(self)
        predictions = training.predict_nodes(self.model_, check_documents(X))
        labels = self.model_.labels
        return np.array([[p.scores[lab] for lab in labels] for p in predictions])

    def score(self, X, y=None):
        """Micro-averaged F1 (in [0, 1]) against the documents' own labels."""
        check_is_fitted(self)
        docs = check_labeled_documents(X, self.task)
        report = training.evaluate_node_task(self.model_, docs)
        return report.micro[2] / 100.0

    def save(self, path):
        check_is_fitted(self)
        training.save_checkpoint(self.model_, self.history_, path)


class DesireClassifier(BaseEstimator, _ModelConfigMixin):
    """Document-level desire-fulfillment classifier."""

    def __init__(self, embed_dim=128, hidden_dim=128, rgcn_layers=2,
                 max_nodes=DEFAULT_MAX_NODES, lr=2e-4, batch_size=256,
                 epochs=100, warmup_steps=0, patience=10, seed=0,
                 init_checkpoint=None):
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.rgcn_layers = rgcn_layers
        self.max_nodes = max_nodes
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.warmup_steps = warmup_steps
        self.patience = patience
        self.seed = seed
        self.init_checkpoint = init_checkpoint

    def fit(self, X, y=None, dev=None):
        docs = check_labeled_documents(X, "desire")
        dev_docs = check_labeled_documents(dev, "desire") if dev is not None else []
        config = TrainConfig(objective="desire", lr=self.lr,
                             batch_size=self.batch_size, epochs=self.epochs,
                             warmup_steps=self.warmup_steps,
                             warmup_proportion=None, patience=self.patience,
                             seed=self.seed)
        init = None
        if self.init_checkpoint is not None:
            init, _ = training.load_checkpoint(self.init_checkpoint)
        self.model_, self.history_ = training.train_downstream(
            "desire", docs, dev_docs, config, self._model_config(), init=init)
        return self

    def predict(self, X):
        check_is_fitted(self)
        return [p.decision for p in
                training.predict_documents(self.model_, check_documents(X))]

    def predict_proba(self, X):
        check_is_fitted(self)
        predictions = training.predict_documents(self.model_, check_documents(X))
        labels = self.model_.labels
        return np.array([[p.scores[lab] for lab in labels] for p in predictions])

    def score(self, X, y=None):
        check_is_fitted(self)
        docs = check_labeled_documents(X, "desire")
        report = training.evaluate_document_task(self.model_, docs)
        return report.macro[2] / 100.0


class SentimentPretrainer(BaseEstimator, _ModelConfigMixin):
    """Weakly supervised node-sentiment pre-training."""

    def __init__(self, embed_dim=128, hidden_dim=128, rgcn_layers=2,
                 max_nodes=DEFAULT_MAX_NODES, lr=1e-4, batch_size=256,
                 epochs=100, seed=0, lexicon: SentimentLexicon | None = None):
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.rgcn_layers = rgcn_layers
        self.max_nodes = max_nodes
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.lexicon = lexicon

    def fit(self, X, y=None):
        docs = check_documents(X)
        graphs = [build_graph(doc, self.max_nodes) for doc in docs]
        config = TrainConfig(objective="sentiment", lr=self.lr,
                             batch_size=self.batch_size, epochs=self.epochs,
                             seed=self.seed)
        self.model_, self.history_ = training.pretrain_sentiment(
            docs, graphs, self.lexicon or DEFAULT_LEXICON, config,
            self._model_config())
        return self

    def save(self, path):
        check_is_fitted(self)
        training.save_checkpoint(self.model_, self.history_, path)
