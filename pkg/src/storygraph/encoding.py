"""Node inputs and initial node vectors.

A node input has three parts: the node's sentence, the context (all sentences
its entity appears in), and an artificial label sentence listing every
candidate label. The built-in bag encoder mean-pools token embeddings per
part and projects; externally computed embeddings can be swapped in through
the exchange-file loader.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .corpus import Document, build_label_sentence, normalize_tokens
from .errors import DataError
from .graph import GraphNode, NarrativeGraph

MAX_INPUT_TOKENS = 160
UNK_ID = 0


@dataclass(frozen=True)
class NodeInput:
    sentence: tuple[str, ...]
    context: tuple[str, ...]
    label_sentence: tuple[str, ...]

    def total_tokens(self) -> int:
        return len(self.sentence) + len(self.context) + len(self.label_sentence)


def assemble_node_input(
    doc: Document,
    node: GraphNode,
    label_vocabulary: Sequence[str] | None = None,
    budget: int = MAX_INPUT_TOKENS,
) -> NodeInput:
    """Build (sentence, context, label sentence) for one node.

    The label sentence is never truncated; the context is cut from the right
    first, then the sentence, until the total fits the token budget.
    """
    s = doc.sentences[node.sentence_index].tokens
    chain = doc.chain_for(node.entity_name)
    if chain is None:
        raise DataError(f"{doc.doc_id}: no chain for entity '{node.entity_name}'")
    ctx_sentences = sorted({m[0] for m in chain.mentions})
    ctx: tuple[str, ...] = ()
    for idx in ctx_sentences:
        ctx = ctx + doc.sentences[idx].tokens
    label: tuple[str, ...] = ()
    if label_vocabulary is not None:
        label = normalize_tokens(build_label_sentence(node.entity_name, label_vocabulary))
    if len(label) >= budget:
        raise DataError(
            f"label sentence ({len(label)} tokens) exceeds the {budget}-token budget"
        )
    room = budget - len(label)
    if len(s) + len(ctx) > room:
        ctx = ctx[:max(0, room - len(s))]
        if len(s) + len(ctx) > room:
            s = s[:room]
    return NodeInput(sentence=s, context=ctx, label_sentence=label)


def build_vocabulary(docs: Sequence[Document],
                     extra_tokens: Sequence[str] = ()) -> dict[str, int]:
    """Token -> row index, sorted for reproducibility; index 0 is UNK."""
    tokens = set(extra_tokens)
    for doc in docs:
        for sent in doc.sentences:
            tokens.update(sent.tokens)
        for chain in doc.chains:
            tokens.update(normalize_tokens(chain.entity_name))
    return {tok: i + 1 for i, tok in enumerate(sorted(tokens))}


def token_ids(tokens: Sequence[str], vocab: Mapping[str, int]) -> np.ndarray:
    return np.array([vocab.get(t, UNK_ID) for t in tokens], dtype=np.intp)


def init_bag_encoder(store: ad.ParameterStore, rng: np.random.Generator,
                     vocab_size: int, embed_dim: int, out_dim: int) -> None:
    store.add("encoder/embeddings", rng.normal(0.0, 0.1, size=(vocab_size + 1, embed_dim)))
    store.add("encoder/proj_w", ad.glorot(rng, (out_dim, 3 * embed_dim)))
    store.add("encoder/proj_b", np.zeros(out_dim))


def encode_bag(params: Mapping[str, ad.Var],
               node_inputs: Sequence[NodeInput],
               vocab: Mapping[str, int]) -> ad.Var:
    """ReLU(W [mean(s); mean(ctx); mean(L)] + b) per node -> (n, d) matrix."""
    table = params["encoder/embeddings"]
    embed_dim = table.shape[1]
    rows = []
    for node_input in node_inputs:
        parts = []
        for segment in (node_input.sentence, node_input.context, node_input.label_sentence):
            if segment:
                ids = token_ids(segment, vocab)
                pool = ad.Var(np.full((1, len(ids)), 1.0 / len(ids)))
                parts.append(pool @ ad.gather_rows(table, ids))
            else:
                parts.append(ad.Var(np.zeros((1, embed_dim))))
        rows.append(ad.concat(parts, axis=1))
    stacked = ad.concat(rows, axis=0)
    return (stacked @ params["encoder/proj_w"].transpose() + params["encoder/proj_b"]).relu()


@dataclass
class ExternalEmbeddingTable:
    dim: int
    vectors: dict[tuple[str, int], np.ndarray]  # (doc_id, node_id) -> f64 vector

    def lookup(self, doc_id: str, node_id: int) -> np.ndarray:
        try:
            return self.vectors[(doc_id, node_id)]
        except KeyError:
            raise DataError(f"no external embedding for ({doc_id}, {node_id})") from None


def load_external_embeddings(
    path,
    expected: set[tuple[str, int]] | None = None,
) -> ExternalEmbeddingTable:
    """Read the embedding exchange file.

    Format: a header line ``#dim <d>`` followed by one record per line,
    ``doc_id<TAB>node_id<TAB>f1 f2 ... fd``. When ``expected`` node keys are
    given, the table must cover exactly those nodes.
    """
    vectors: dict[tuple[str, int], np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("#dim"):
            raise DataError(f"{path}: missing '#dim <d>' header line")
        try:
            dim = int(header.split()[1])
        except (IndexError, ValueError) as exc:
            raise DataError(f"{path}: malformed header '{header}'") from exc
        if dim < 0:
            raise DataError(f"{path}: dimension must be non-negative, got {dim}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 tab-separated fields")
            doc_id, node_str, vec_str = fields
            try:
                key = (doc_id, int(node_str))
                vec = np.array([float(x) for x in vec_str.split()], dtype=np.float64)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if vec.shape[0] != dim:
                raise DataError(
                    f"{path}:{lineno}: vector for {key} has dimension "
                    f"{vec.shape[0]}, header declares {dim}"
                )
            if key in vectors:
                raise DataError(f"{path}:{lineno}: duplicate entry for {key}")
            vectors[key] = vec
    if expected is not None:
        missing = sorted(expected - set(vectors))
        extra = sorted(set(vectors) - expected)
        if missing or extra:
            raise DataError(
                f"{path}: embedding table mismatch; missing={missing[:5]} extra={extra[:5]}"
            )
    return ExternalEmbeddingTable(dim=dim, vectors=vectors)


def _format_f32(x: float) -> str:
    # 9 significant digits round-trip binary32 exactly
    return f"{np.float32(x):.9g}"


def write_external_embeddings(
    rows: Sequence[tuple[str, int, np.ndarray]], path
) -> None:
    """Inverse of :func:`load_external_embeddings` (f32 precision on disk)."""
    if not rows:
        dims = set()
    else:
        dims = {len(vec) for _, _, vec in rows}
        if len(dims) > 1:
            raise DataError(f"ragged embedding dimensions: {sorted(dims)}")
    dim = dims.pop() if dims else 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#dim {dim}\n")
        for doc_id, node_id, vec in rows:
            txt = " ".join(_format_f32(v) for v in vec)
            fh.write(f"{doc_id}\t{node_id}\t{txt}\n")


def external_node_vectors(
    params: Mapping[str, ad.Var],
    table: ExternalEmbeddingTable,
    graph: NarrativeGraph,
    out_dim: int,
) -> ad.Var:
    """Stack external vectors for a graph; project when dimensions differ."""
    data = np.stack([table.lookup(graph.doc_id, n.node_id) for n in graph.nodes])
    raw = ad.Var(data)
    if table.dim == out_dim:
        return raw
    return raw @ params["encoder/ext_w"].transpose() + params["encoder/ext_b"]


def init_external_projection(store: ad.ParameterStore, rng: np.random.Generator,
                             ext_dim: int, out_dim: int) -> None:
    if ext_dim != out_dim:
        store.add("encoder/ext_w", ad.glorot(rng, (out_dim, ext_dim)))
        store.add("encoder/ext_b", np.zeros(out_dim))
