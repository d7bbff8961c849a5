"""Training: link-prediction and node-sentiment pre-training, downstream
task training with validation-based model selection, and checkpoint I/O.

One document's graph is a micro-batch; gradients accumulate until the
configured batch size is reached, then a single Adam step runs with a linear
warm-up schedule.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from . import encoding, heads, rgcn
from .autodiff import AdamConfig, ParameterStore, Tape
from .corpus import (Document, SentimentLexicon, normalize_tokens,
                     sentiment_label, task_vocabulary)
from .errors import DataError
from .graph import NarrativeGraph, build_graph, corrupt_edge, sample_training_edges
from .metrics import MetricsReport, prf1

NODE_TASKS = ("maslow", "reiss", "plutchik")
SENTIMENT_CLASSES = ("negative", "neutral", "positive")


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 128
    hidden_dim: int = 128
    rgcn_layers: int = 2
    self_loop: bool = True
    in_neighbors: bool = True
    edge_weight_mode: str = "rate"
    encoder: str = "bag"  # or "external"
    external_dim: int | None = None
    max_nodes: int = 60

    def rgcn_config(self) -> rgcn.RgcnConfig:
        return rgcn.RgcnConfig(layers=self.rgcn_layers, hidden_dim=self.hidden_dim,
                               self_loop=self.self_loop, in_neighbors=self.in_neighbors)


@dataclass
class TrainConfig:
    objective: str
    lr: float = 1e-4
    batch_size: int = 256
    epochs: int = 100
    warmup_proportion: float | None = 0.06  # pre-training default
    warmup_steps: int | None = None         # downstream default 5000
    patience: int = 10
    seed: int = 0
    sample_rate: float = 0.2
    mask_sampled_edges: bool = False
    adam: AdamConfig = field(default_factory=AdamConfig)

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.lr < 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("learning rate, batch size and epochs must be positive")


@dataclass
class GraphModel:
    """Parameters plus everything needed to rebuild the forward pass."""
    config: ModelConfig
    store: ParameterStore
    vocab: dict[str, int]
    task: str | None = None
    labels: tuple[str, ...] | None = None

    def label_vocabulary(self) -> tuple[str, ...] | None:
        return self.labels


def _label_sentence_tokens() -> list[str]:
    tokens = {"is", ",", "."}
    for task in ("maslow", "reiss", "plutchik", "desire", "sentiment"):
        for label in task_vocabulary(task):
            tokens.update(normalize_tokens(label))
    return sorted(tokens)


def _new_store(docs: Sequence[Document], config: ModelConfig,
               rng: np.random.Generator,
               vocab: dict[str, int] | None = None
               ) -> tuple[ParameterStore, dict[str, int]]:
    if vocab is None:
        vocab = encoding.build_vocabulary(docs, extra_tokens=_label_sentence_tokens())
    store = ParameterStore()
    if config.encoder == "bag":
        encoding.init_bag_encoder(store, rng, len(vocab), config.embed_dim,
                                  config.hidden_dim)
    elif config.encoder == "external":
        if config.external_dim is None:
            raise DataError("external encoder requires external_dim")
        encoding.init_external_projection(store, rng, config.external_dim,
                                          config.hidden_dim)
    else:
        raise DataError(f"unknown encoder kind '{config.encoder}'")
    rgcn.init_rgcn(store, rng, config.hidden_dim, config.rgcn_config())
    return store, vocab


def new_model(docs: Sequence[Document], config: ModelConfig, objective: str,
              seed: int, vocab: dict[str, int] | None = None) -> GraphModel:
    """Fresh model for an objective: link, sentiment, a node task, or desire."""
    rng = np.random.default_rng(seed)
    store, vocab = _new_store(docs, config, rng, vocab)
    if objective == "link":
        heads.init_distmult(store, rng, config.hidden_dim)
        return GraphModel(config, store, vocab, task="link", labels=None)
    if objective == "sentiment":
        heads.init_classifier(store, rng, "node_head", config.hidden_dim,
                              config.hidden_dim, len(SENTIMENT_CLASSES))
        return GraphModel(config, store, vocab, task="sentiment",
                          labels=SENTIMENT_CLASSES)
    if objective in NODE_TASKS:
        labels = task_vocabulary(objective)
        heads.init_classifier(store, rng, "node_head", config.hidden_dim,
                              config.hidden_dim, len(labels))
        return GraphModel(config, store, vocab, task=objective, labels=labels)
    if objective == "desire":
        labels = task_vocabulary("desire")
        heads.init_attention(store, rng, config.hidden_dim)
        heads.init_classifier(store, rng, "doc_head", config.hidden_dim,
                              config.hidden_dim, len(labels))
        return GraphModel(config, store, vocab, task="desire", labels=labels)
    raise DataError(f"unknown objective '{objective}'")


TRANSFER_PREFIXES = ("encoder/", "rgcn/", "distmult/")


def transfer_pretrained(model: GraphModel, pretrained: GraphModel) -> None:
    """Copy encoder/R-GCN (and DistMult when present) weights; heads stay fresh."""
    if pretrained.task in NODE_TASKS or pretrained.task == "desire":
        if pretrained.task != model.task:
            raise DataError(
                f"checkpoint was trained for task '{pretrained.task}', "
                f"cannot initialize task '{model.task}'"
            )
    for name in pretrained.store.names():
        if not name.startswith(TRANSFER_PREFIXES):
            continue
        if name in model.store:
            src = pretrained.store.get(name)
            dst = model.store.get(name)
            if src.shape != dst.shape:
                raise DataError(
                    f"checkpoint parameter '{name}' has shape {src.shape}, "
                    f"model expects {dst.shape}"
                )
            model.store.set(name, src)


# ---------------------------------------------------------------------------
# Forward passes


def node_matrix(model: GraphModel, params: Mapping[str, ad.Var], doc: Document,
                graph: NarrativeGraph,
                external: encoding.ExternalEmbeddingTable | None = None) -> ad.Var:
    if model.config.encoder == "external":
        if external is None:
            raise DataError("model uses external embeddings but none were provided")
        return encoding.external_node_vectors(params, external, graph,
                                              model.config.hidden_dim)
    inputs = [
        encoding.assemble_node_input(doc, node, model.label_vocabulary())
        for node in graph.nodes
    ]
    return encoding.encode_bag(params, inputs, model.vocab)


def contextualized(model: GraphModel, params: Mapping[str, ad.Var], doc: Document,
                   graph: NarrativeGraph,
                   external: encoding.ExternalEmbeddingTable | None = None,
                   exclude_edges: frozenset | None = None) -> ad.Var:
    v = node_matrix(model, params, doc, graph, external)
    return rgcn.contextualize(params, graph, v, model.config.rgcn_config(),
                              exclude_edges)


def node_embeddings(model: GraphModel, doc: Document, graph: NarrativeGraph,
                    external: encoding.ExternalEmbeddingTable | None = None) -> np.ndarray:
    """Contextualized node vectors with no gradient bookkeeping kept."""
    params = model.store.bind(Tape())
    return contextualized(model, params, doc, graph, external).data.copy()


def _query_vector(model: GraphModel, params: Mapping[str, ad.Var],
                  doc: Document, graph: NarrativeGraph,
                  external: encoding.ExternalEmbeddingTable | None) -> ad.Var:
    """Desire-expression query: bag-encode the desire sentence alone, or mean
    the external embeddings of its nodes (all nodes as fallback)."""
    sent_idx = doc.task_payload.desire_sentence
    if model.config.encoder == "bag":
        tokens = doc.sentences[sent_idx].tokens
        query_input = encoding.NodeInput(sentence=tokens, context=tokens,
                                         label_sentence=())
        return encoding.encode_bag(params, [query_input], model.vocab)
    data = np.stack([external.lookup(graph.doc_id, n.node_id) for n in graph.nodes])
    here = [i for i, n in enumerate(graph.nodes) if n.sentence_index == sent_idx]
    pooled = data[here].mean(axis=0) if here else data.mean(axis=0)
    raw = ad.Var(pooled[None, :])
    if external.dim == model.config.hidden_dim:
        return raw
    return raw @ params["encoder/ext_w"].transpose() + params["encoder/ext_b"]


# ---------------------------------------------------------------------------
# The optimization loop


class _Accumulator:
    """Sums per-graph gradients and steps once per ``batch_size`` examples."""

    def __init__(self, store: ParameterStore, config: TrainConfig, total_steps: int):
        self.store = store
        self.config = config
        self.grads: dict[str, np.ndarray] = {}
        self.examples = 0
        self.micro_batches = 0
        if config.warmup_steps is not None:
            self.warmup = config.warmup_steps
        elif config.warmup_proportion:
            self.warmup = max(1, round(config.warmup_proportion * total_steps))
        else:
            self.warmup = 0

    def add(self, grads: Mapping[str, np.ndarray], n_examples: int) -> None:
        for name, g in grads.items():
            if name in self.grads:
                self.grads[name] += g
            else:
                self.grads[name] = g.copy()
        self.examples += n_examples
        self.micro_batches += 1
        if self.examples >= self.config.batch_size:
            self.step()

    def step(self) -> None:
        if not self.micro_batches:
            return
        scale = 1.0 / self.micro_batches
        grads = {name: g * scale for name, g in self.grads.items()}
        lr = self.config.lr
        if self.warmup:
            lr *= min(1.0, (self.store.step + 1) / self.warmup)
        ad.adam_update(self.store, grads, replace(self.config.adam, lr=lr))
        self.grads.clear()
        self.examples = 0
        self.micro_batches = 0


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    metric: float | None = None


# ---------------------------------------------------------------------------
# Pre-training objectives


def pretrain_link(docs: Sequence[Document], graphs: Sequence[NarrativeGraph],
                  config: TrainConfig, model_config: ModelConfig,
                  external: encoding.ExternalEmbeddingTable | None = None
                  ) -> tuple[GraphModel, list[EpochRecord]]:
    """Link-prediction pre-training: per graph per epoch, sample positive
    edges by the relation distribution, corrupt one negative per positive,
    and optimize the DistMult edge loss."""
    if not docs:
        raise DataError("empty corpus")
    if len(docs) != len(graphs):
        raise DataError("documents and graphs are not aligned")
    model = new_model(docs, model_config, "link", config.seed)
    type_weights = heads.edge_type_weights(model_config.edge_weight_mode)
    rng = np.random.default_rng(config.seed)
    usable = [i for i, g in enumerate(graphs) if g.edges]

    per_graph = [2 * math.ceil(config.sample_rate * len(graphs[i].edges)) for i in usable]
    steps_per_epoch = max(1, math.ceil(sum(per_graph) / config.batch_size))
    acc = _Accumulator(model.store, config, steps_per_epoch * config.epochs)

    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(usable))
        losses = []
        for pos in order:
            doc, graph = docs[usable[pos]], graphs[usable[pos]]
            positives = sample_training_edges(graph, config.sample_rate, rng=rng)
            samples = list(positives)
            for p in positives:
                samples.append(corrupt_edge(graph, p, rng))
            tape = Tape()
            params = model.store.bind(tape)
            exclude = None
            if config.mask_sampled_edges:
                from .graph import TypedEdge
                exclude = frozenset(TypedEdge(p.source, p.relation, p.target)
                                    for p in positives)
            h = contextualized(model, params, doc, graph, external, exclude)
            loss = heads.link_loss(params, h, samples, type_weights)
            grads = ad.backward(loss, params)
            acc.add(grads, len(samples))
            losses.append(float(loss.data))
        acc.step()
        history.append(EpochRecord(epoch=epoch, loss=float(np.mean(losses))))
    return model, history


def pretrain_sentiment(docs: Sequence[Document], graphs: Sequence[NarrativeGraph],
                       lexicon: SentimentLexicon, config: TrainConfig,
                       model_config: ModelConfig,
                       external: encoding.ExternalEmbeddingTable | None = None
                       ) -> tuple[GraphModel, list[EpochRecord]]:
    """Weakly supervised 3-class node sentiment with inverse-frequency
    weighted cross-entropy."""
    if not docs:
        raise DataError("empty corpus")
    model = new_model(docs, model_config, "sentiment", config.seed)
    rng = np.random.default_rng(config.seed)

    node_labels: list[list[int]] = []
    all_labels = []
    for doc, graph in zip(docs, graphs):
        ids = [
            SENTIMENT_CLASSES.index(
                sentiment_label(doc.sentences[n.sentence_index].tokens, lexicon))
            for n in graph.nodes
        ]
        node_labels.append(ids)
        all_labels.extend(ids)
    class_weights = heads.inverse_frequency_weights(all_labels, len(SENTIMENT_CLASSES))

    usable = [i for i, g in enumerate(graphs) if g.nodes]
    steps_per_epoch = max(1, math.ceil(
        sum(len(graphs[i].nodes) for i in usable) / config.batch_size))
    acc = _Accumulator(model.store, config, steps_per_epoch * config.epochs)

    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(usable))
        losses = []
        for pos in order:
            doc, graph = docs[usable[pos]], graphs[usable[pos]]
            tape = Tape()
            params = model.store.bind(tape)
            h = contextualized(model, params, doc, graph, external)
            logits = heads.classifier_forward(params, "node_head", h)
            loss = heads.multiclass_ce(logits, node_labels[usable[pos]], class_weights)
            grads = ad.backward(loss, params)
            acc.add(grads, len(graph.nodes))
            losses.append(float(loss.data))
        acc.step()
        history.append(EpochRecord(epoch=epoch, loss=float(np.mean(losses))))
    return model, history


# ---------------------------------------------------------------------------
# Downstream training


@dataclass
class NodePrediction:
    doc_id: str
    node_id: int
    entity: str
    sentence: int
    scores: dict[str, float]
    decisions: frozenset[str]


@dataclass
class DocPrediction:
    doc_id: str
    scores: dict[str, float]
    decision: str


DECISION_THRESHOLD = 0.5


def predict_nodes(model: GraphModel, docs: Sequence[Document],
                  external: encoding.ExternalEmbeddingTable | None = None
                  ) -> list[NodePrediction]:
    if model.task not in NODE_TASKS and model.task != "sentiment":
        raise DataError(f"model task '{model.task}' does not predict node labels")
    out = []
    for doc in docs:
        graph = build_graph(doc, model.config.max_nodes)
        if not graph.nodes:
            continue
        params = model.store.bind(Tape())
        h = contextualized(model, params, doc, graph, external)
        logits = heads.classifier_forward(params, "node_head", h).data
        if model.task == "sentiment":
            probs = np.exp(logits - logits.max(axis=1, keepdims=True))
            probs /= probs.sum(axis=1, keepdims=True)
            for node, row in zip(graph.nodes, probs):
                best = model.labels[int(row.argmax())]
                out.append(NodePrediction(
                    doc.doc_id, node.node_id, node.entity_name, node.sentence_index,
                    dict(zip(model.labels, row.tolist())), frozenset({best})))
        else:
            probs = 1.0 / (1.0 + np.exp(-logits))
            for node, row in zip(graph.nodes, probs):
                active = frozenset(
                    lab for lab, p in zip(model.labels, row) if p >= DECISION_THRESHOLD)
                out.append(NodePrediction(
                    doc.doc_id, node.node_id, node.entity_name, node.sentence_index,
                    dict(zip(model.labels, row.tolist())), active))
    return out


def predict_documents(model: GraphModel, docs: Sequence[Document],
                      external: encoding.ExternalEmbeddingTable | None = None
                      ) -> list[DocPrediction]:
    if model.task != "desire":
        raise DataError(f"model task '{model.task}' does not predict document labels")
    out = []
    for doc in docs:
        graph = build_graph(doc, model.config.max_nodes)
        if not graph.nodes:
            warnings.warn(f"{doc.doc_id}: no entity nodes; skipping")
            continue
        params = model.store.bind(Tape())
        h = contextualized(model, params, doc, graph, external)
        query = _query_vector(model, params, doc, graph, external)
        h_doc, _ = heads.attend_document(params, h, query)
        logits = heads.classifier_forward(params, "doc_head", h_doc).data[0]
        probs = np.exp(logits - logits.max())
        probs /= probs.sum()
        out.append(DocPrediction(
            doc.doc_id, dict(zip(model.labels, probs.tolist())),
            model.labels[int(probs.argmax())]))
    return out


def gold_node_pairs(docs: Sequence[Document], predictions: Sequence[NodePrediction]
                    ) -> list[tuple[frozenset[str], frozenset[str]]]:
    """Align predictions with gold (entity, sentence) label sets."""
    pred_by_key = {(p.doc_id, p.entity, p.sentence): p.decisions for p in predictions}
    pairs = []
    for doc in docs:
        if doc.task_payload is None:
            continue
        for (entity, sent), gold in doc.task_payload.node_labels:
            pred = pred_by_key.get((doc.doc_id, entity, sent), frozenset())
            pairs.append((gold, pred))
    return pairs


def evaluate_node_task(model: GraphModel, docs: Sequence[Document],
                       external: encoding.ExternalEmbeddingTable | None = None
                       ) -> MetricsReport:
    predictions = predict_nodes(model, docs, external)
    return prf1(gold_node_pairs(docs, predictions), model.labels)


def evaluate_document_task(model: GraphModel, docs: Sequence[Document],
                           external: encoding.ExternalEmbeddingTable | None = None
                           ) -> MetricsReport:
    predictions = predict_documents(model, docs, external)
    pred_by_doc = {p.doc_id: p.decision for p in predictions}
    pairs = []
    for doc in docs:
        if doc.task_payload is None or doc.task_payload.task != "desire":
            continue
        pred = pred_by_doc.get(doc.doc_id)
        pairs.append((frozenset({doc.task_payload.doc_label}),
                      frozenset({pred}) if pred else frozenset()))
    return prf1(pairs, model.labels)


def _labeled_node_ids(doc: Document, graph: NarrativeGraph,
                      labels: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Target node ids and gold bit matrix for one document."""
    ids, bits = [], []
    for (entity, sent), gold in doc.task_payload.node_labels:
        node = graph.node_for(entity, sent)
        if node is None:
            continue  # dropped by max-node truncation
        ids.append(node.node_id)
        bits.append([1.0 if lab in gold else 0.0 for lab in labels])
    return np.asarray(ids, dtype=np.intp), np.asarray(bits, dtype=np.float64)


def train_downstream(task: str, train_docs: Sequence[Document],
                     dev_docs: Sequence[Document], config: TrainConfig,
                     model_config: ModelConfig,
                     init: GraphModel | None = None,
                     external: encoding.ExternalEmbeddingTable | None = None
                     ) -> tuple[GraphModel, list[EpochRecord]]:
    """Task training with per-epoch validation and early stopping.

    Selection metric: macro-averaged F1 over labels (node tasks) or averaged
    per-class F1 (desire). Returns the best model by that metric.
    """
    if task not in NODE_TASKS and task != "desire":
        raise DataError(f"unknown downstream task '{task}'")
    if not train_docs:
        raise DataError("empty training corpus")
    # bag-encoder embeddings are tied to their vocabulary, so a pre-trained
    # model pins the vocabulary of any model initialized from it
    vocab = dict(init.vocab) if init is not None and init.config.encoder == "bag" else None
    model = new_model(train_docs, model_config, task, config.seed, vocab=vocab)
    if init is not None:
        transfer_pretrained(model, init)
    rng = np.random.default_rng(config.seed)

    train_graphs = [build_graph(doc, model_config.max_nodes) for doc in train_docs]
    usable = []
    for i, (doc, graph) in enumerate(zip(train_docs, train_graphs)):
        if doc.task_payload is None or doc.task_payload.task != task:
            raise DataError(f"{doc.doc_id}: missing '{task}' labels")
        if graph.nodes:
            usable.append(i)

    if task == "desire":
        desire_ids = {i: task_vocabulary("desire").index(train_docs[i].task_payload.doc_label)
                      for i in usable}
        class_weights = heads.inverse_frequency_weights(
            [desire_ids[i] for i in usable], 2)
        per_doc = [1] * len(usable)
    else:
        per_doc = [max(1, len(train_docs[i].task_payload.node_labels)) for i in usable]
    steps_per_epoch = max(1, math.ceil(sum(per_doc) / config.batch_size))
    acc = _Accumulator(model.store, config, steps_per_epoch * config.epochs)

    best_metric, best_snapshot, best_epoch = -math.inf, model.store.snapshot(), -1
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(usable))
        losses = []
        for pos in order:
            i = usable[pos]
            doc, graph = train_docs[i], train_graphs[i]
            tape = Tape()
            params = model.store.bind(tape)
            if task == "desire":
                h = contextualized(model, params, doc, graph, external)
                query = _query_vector(model, params, doc, graph, external)
                h_doc, _ = heads.attend_document(params, h, query)
                logits = heads.classifier_forward(params, "doc_head", h_doc)
                loss = heads.multiclass_ce(logits, [desire_ids[i]], class_weights)
                n_examples = 1
            else:
                ids, bits = _labeled_node_ids(doc, graph, model.labels)
                if not len(ids):
                    continue
                h = contextualized(model, params, doc, graph, external)
                logits = heads.classifier_forward(
                    params, "node_head", ad.gather_rows(h, ids))
                loss = heads.multilabel_bce(logits, bits)
                n_examples = len(ids)
            grads = ad.backward(loss, params)
            acc.add(grads, n_examples)
            losses.append(float(loss.data))
        acc.step()
        if dev_docs:
            report = (evaluate_document_task(model, dev_docs, external)
                      if task == "desire"
                      else evaluate_node_task(model, dev_docs, external))
            metric = report.macro[2]
        else:
            metric = -float(np.mean(losses)) if losses else -math.inf
        history.append(EpochRecord(epoch=epoch,
                                   loss=float(np.mean(losses)) if losses else math.nan,
                                   metric=metric))
        if metric > best_metric:
            best_metric, best_snapshot, best_epoch = metric, model.store.snapshot(), epoch
        elif epoch - best_epoch >= config.patience:
            break
    model.store.restore(best_snapshot)
    return model, history


# ---------------------------------------------------------------------------
# Checkpoints


def _config_to_json(model: GraphModel) -> dict:
    vocab_tokens = [None] * len(model.vocab)
    for tok, idx in model.vocab.items():
        vocab_tokens[idx - 1] = tok
    return {
        "model": asdict(model.config),
        "task": model.task,
        "labels": list(model.labels) if model.labels else None,
        "vocab": vocab_tokens,
    }


def save_checkpoint(model: GraphModel, history: Sequence[EpochRecord], path) -> None:
    """Directory checkpoint: manifest + one raw little-endian f32 array per
    parameter."""
    os.makedirs(path, exist_ok=True)
    params = []
    for name in model.store.names():
        value = model.store.get(name)
        fname = name.replace("/", "__") + ".bin"
        with open(os.path.join(path, fname), "wb") as fh:
            fh.write(value.astype("<f4").tobytes())
        params.append({"name": name, "shape": list(value.shape), "file": fname})
    manifest = {
        "format": 1,
        "dtype": "f32",
        "optimizer_step": model.store.step,
        "config": _config_to_json(model),
        "history": [asdict(h) for h in history],
        "params": params,
    }
    with open(os.path.join(path, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


def load_checkpoint(path) -> tuple[GraphModel, list[EpochRecord]]:
    manifest_path = os.path.join(path, "manifest.json")
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read checkpoint manifest {manifest_path}: {exc}") from exc
    config = ModelConfig(**manifest["config"]["model"])
    vocab = {tok: i + 1 for i, tok in enumerate(manifest["config"]["vocab"])}
    labels = manifest["config"]["labels"]
    store = ParameterStore()
    for entry in manifest["params"]:
        fpath = os.path.join(path, entry["file"])
        shape = tuple(entry["shape"])
        expected = int(np.prod(shape)) * 4
        try:
            with open(fpath, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise DataError(f"checkpoint array missing for '{entry['name']}'") from exc
        if len(raw) != expected:
            raise DataError(
                f"checkpoint array for '{entry['name']}' has {len(raw)} bytes, "
                f"expected {expected}"
            )
        store.add(entry["name"],
                  np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape))
    store.step = int(manifest.get("optimizer_step", 0))
    model = GraphModel(config=config, store=store, vocab=vocab,
                       task=manifest["config"]["task"],
                       labels=tuple(labels) if labels else None)
    _check_parameter_set(model)
    history = [EpochRecord(**h) for h in manifest.get("history", [])]
    return model, history


def _check_parameter_set(model: GraphModel) -> None:
    """The stored parameter set must match what the architecture defines."""
    rng = np.random.default_rng(0)
    reference = ParameterStore()
    config = model.config
    if config.encoder == "bag":
        encoding.init_bag_encoder(reference, rng, len(model.vocab),
                                  config.embed_dim, config.hidden_dim)
    else:
        encoding.init_external_projection(reference, rng, config.external_dim,
                                          config.hidden_dim)
    rgcn.init_rgcn(reference, rng, config.hidden_dim, config.rgcn_config())
    task = model.task
    if task == "link":
        heads.init_distmult(reference, rng, config.hidden_dim)
    elif task == "sentiment" or task in NODE_TASKS:
        heads.init_classifier(reference, rng, "node_head", config.hidden_dim,
                              config.hidden_dim, len(model.labels))
    elif task == "desire":
        heads.init_attention(reference, rng, config.hidden_dim)
        heads.init_classifier(reference, rng, "doc_head", config.hidden_dim,
                              config.hidden_dim, len(model.labels))
    expected = set(reference.names())
    actual = {n for n in model.store.names() if not n.startswith("potential/")}
    unknown = actual - expected
    missing = expected - actual
    if unknown:
        raise DataError(f"checkpoint contains unknown parameters: {sorted(unknown)[:5]}")
    if missing:
        raise DataError(f"checkpoint is missing parameters: {sorted(missing)[:5]}")
