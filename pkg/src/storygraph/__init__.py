"""storygraph: entity-based narrative graphs with relational graph
convolution training and joint symbolic MAP inference."""

__version__ = "0.1.0"

from .corpus import Document, Sentence, CorefChain, load_corpus, write_corpus
from .graph import NarrativeGraph, Relation, build_graph
from .estimators import (GraphBuilder, LinkPretrainer, MentalStateClassifier,
                         DesireClassifier, SentimentPretrainer)

__all__ = [
    "Document", "Sentence", "CorefChain", "load_corpus", "write_corpus",
    "NarrativeGraph", "Relation", "build_graph",
    "GraphBuilder", "LinkPretrainer", "MentalStateClassifier",
    "DesireClassifier", "SentimentPretrainer",
    "__version__",
]
