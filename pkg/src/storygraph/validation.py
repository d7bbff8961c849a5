"""Input validation helpers shared by the estimator API and the CLI."""

from __future__ import annotations

from sklearn.exceptions import NotFittedError

from .corpus import Document
from .errors import DataError
from .graph import NarrativeGraph


def check_documents(X) -> list[Document]:
    docs = list(X)
    for i, doc in enumerate(docs):
        if not isinstance(doc, Document):
            raise DataError(
                f"X[{i}] is {type(doc).__name__}, expected storygraph.corpus.Document"
            )
    return docs


def check_labeled_documents(X, task: str) -> list[Document]:
    docs = check_documents(X)
    for doc in docs:
        if doc.task_payload is None or doc.task_payload.task != task:
            raise DataError(f"{doc.doc_id}: missing '{task}' labels")
    return docs


def check_graphs(X) -> list[NarrativeGraph]:
    graphs = list(X)
    for i, graph in enumerate(graphs):
        if not isinstance(graph, NarrativeGraph):
            raise DataError(
                f"X[{i}] is {type(graph).__name__}, expected NarrativeGraph"
            )
    return graphs


def check_is_fitted(estimator, attribute: str = "model_") -> None:
    if getattr(estimator, attribute, None) is None:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted; call fit() first"
        )
