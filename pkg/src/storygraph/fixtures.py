"""Deterministic synthetic corpora for tests, acceptance checks, and demos.

Every generator takes a seed and produces documents that satisfy all corpus
invariants, with enough structural regularity for the learning checks: the
planted-rule corpus ties edges to entity identity and sentence order, the cue
corpora tie labels to specific tokens.
"""

from __future__ import annotations

import numpy as np

from .corpus import (CorefChain, ConnectiveAnnotation, Document, Sentence,
                     TaskLabels)

ENTITY_POOL = ("alice", "bob", "carol", "dave", "erin", "frank")
MARKERS = ("first", "second", "third", "fourth", "fifth", "sixth")
VERBS = ("walked", "looked", "waited", "paused", "turned", "listened", "stood")
PLACES = ("garden", "market", "river", "library", "station", "kitchen")
INITIAL_CONNECTIVES = ("because", "but", "so", "before", "after", "while")


def _make_sentence(index: int, tokens: list[str]) -> Sentence:
    return Sentence(index=index, text=" ".join(tokens), tokens=tuple(tokens))


def _doc_from_token_rows(doc_id: str, rows: list[list[str]],
                         entities: list[str],
                         connectives: list[ConnectiveAnnotation] = (),
                         payload: TaskLabels | None = None) -> Document:
    sentences = tuple(_make_sentence(i, row) for i, row in enumerate(rows))
    chains = []
    for entity in entities:
        mentions = []
        for i, row in enumerate(rows):
            if entity in row:
                pos = row.index(entity)
                mentions.append((i, pos, pos + 1))
        if mentions:
            chains.append(CorefChain(entity_name=entity, mentions=tuple(mentions)))
    return Document(doc_id=doc_id, sentences=sentences, chains=tuple(chains),
                    connectives=tuple(connectives), task_payload=payload)


def planted_rule_corpus(n_docs: int = 50, seed: int = 0,
                        n_sentences: int = 5) -> list[Document]:
    """Stories whose edges follow the construction rules exactly: coreference
    edges only between same-entity nodes, adjacency edges between marked
    consecutive sentences. Used for link-prediction learnability."""
    rng = np.random.default_rng(seed)
    docs = []
    for d in range(n_docs):
        n_entities = int(rng.integers(2, 4))
        entities = [str(e) for e in rng.choice(ENTITY_POOL, size=n_entities, replace=False)]
        # each character spans a contiguous run of sentences (its arc), so
        # chain-successor edges follow sentence adjacency within the run
        present: list[list[str]] = [[] for _ in range(n_sentences)]
        for e in entities:
            run = int(rng.integers(3, n_sentences + 1))
            start = int(rng.integers(0, n_sentences - run + 1))
            for i in range(start, start + run):
                present[i].append(e)
        for i in range(n_sentences):
            if not present[i]:
                present[i].append(entities[int(rng.integers(n_entities))])
        rows = []
        connectives = []
        for i in range(n_sentences):
            tokens: list[str] = []
            if rng.random() < 0.3 and i > 0:
                surface = str(rng.choice(INITIAL_CONNECTIVES))
                tokens.append(surface)
                connectives.append(ConnectiveAnnotation(
                    sentence_index=i, start=0, end=1, surface=surface,
                    position="sentence-initial"))
            tokens.append(MARKERS[i])
            for e in sorted(present[i]):
                tokens.append(e)
            tokens.append(str(rng.choice(VERBS)))
            tokens.extend(["near", "the", str(rng.choice(PLACES)), "."])
            rows.append(tokens)
        docs.append(_doc_from_token_rows(f"planted-{d:03d}", rows, entities,
                                         connectives))
    return docs


# Cue profiles: token -> consistent mental-state labels. Maslow/Reiss pairs
# respect the refinement table; Plutchik labels stay within one polarity.
CUE_PROFILES = {
    "trophy": {"maslow": {"esteem"}, "reiss": {"competition", "status"},
               "plutchik": {"joy", "anticipation"}},
    "fever": {"maslow": {"stability"}, "reiss": {"health"},
              "plutchik": {"fear", "sadness"}},
    "supper": {"maslow": {"physiological"}, "reiss": {"food"},
               "plutchik": {"joy"}},
    "reunion": {"maslow": {"love"}, "reiss": {"contact", "family"},
                "plutchik": {"joy", "trust"}},
    "telescope": {"maslow": {"spiritual growth"}, "reiss": {"curiosity"},
                  "plutchik": {"surprise", "anticipation"}},
    "burglar": {"maslow": {"stability"}, "reiss": {"order", "tranquility"},
                "plutchik": {"anger", "fear"}},
}


def cue_task_corpus(task: str, n_docs: int = 40, seed: int = 0,
                    n_sentences: int = 3) -> list[Document]:
    """Node-labeled stories where the cue token in each sentence determines
    every mentioned character's labels for the given task."""
    rng = np.random.default_rng(seed)
    cues = sorted(CUE_PROFILES)
    docs = []
    for d in range(n_docs):
        n_entities = int(rng.integers(1, 3))
        entities = [str(e) for e in rng.choice(ENTITY_POOL, size=n_entities, replace=False)]
        rows = []
        node_labels = []
        for i in range(n_sentences):
            cue = cues[int(rng.integers(len(cues)))]
            who = sorted(
                e for e in entities
                if rng.random() < 0.8 or len(entities) == 1
            ) or [entities[0]]
            tokens = [MARKERS[i]] + who + ["saw", "the", cue, "."]
            rows.append(tokens)
            for e in who:
                node_labels.append(((e, i), frozenset(CUE_PROFILES[cue][task])))
        payload = TaskLabels(task=task, node_labels=tuple(node_labels))
        docs.append(_doc_from_token_rows(f"cue-{task}-{d:03d}", rows, entities,
                                         payload=payload))
    return docs


def sentiment_cue_corpus(n_docs: int = 30, seed: int = 0,
                         n_sentences: int = 3) -> list[Document]:
    """Stories whose sentence polarity is a deterministic function of a single
    lexicon token (happy / sad / lamp for neutral)."""
    rng = np.random.default_rng(seed)
    words = ("happy", "sad", "lamp")
    docs = []
    for d in range(n_docs):
        entities = [str(rng.choice(ENTITY_POOL))]
        rows = []
        for i in range(n_sentences):
            word = words[int(rng.integers(len(words)))]
            rows.append([MARKERS[i], entities[0], "felt", word, "today", "."])
        docs.append(_doc_from_token_rows(f"senti-{d:03d}", rows, entities))
    return docs


def desire_corpus(n_docs: int = 40, seed: int = 0) -> list[Document]:
    """Desire-fulfillment stories: the outcome token in the final sentence
    decides the document label; the desire expression is sentence 0."""
    rng = np.random.default_rng(seed)
    docs = []
    for d in range(n_docs):
        entity = str(rng.choice(ENTITY_POOL))
        fulfilled = bool(rng.integers(2))
        goal = str(rng.choice(PLACES))
        rows = [
            [entity, "wanted", "to", "reach", "the", goal, "."],
            [MARKERS[1], entity, str(rng.choice(VERBS)), "onward", "."],
            [entity, "finally", "succeeded" if fulfilled else "failed", "."],
        ]
        payload = TaskLabels(task="desire",
                             doc_label="fulfilled" if fulfilled else "unfulfilled",
                             desire_sentence=0)
        docs.append(_doc_from_token_rows(f"desire-{d:03d}", rows, [entity],
                                         payload=payload))
    return docs


def order_sensitive_corpus(task: str = "plutchik", n_docs: int = 200,
                           seed: int = 0, n_sentences: int = 4) -> list[Document]:
    """Stories where the label depends only on token ORDER: every sentence is
    '<e> was not <A> but <B> .' with {A, B} = {happy, calm}, so bag-of-words
    features are identical across the two classes."""
    rng = np.random.default_rng(seed)
    docs = []
    for d in range(n_docs):
        entity = str(rng.choice(ENTITY_POOL))
        rows = []
        node_labels = []
        for i in range(n_sentences):
            felt_happy = bool(rng.integers(2))
            a, b = ("calm", "happy") if felt_happy else ("happy", "calm")
            rows.append([entity, "was", "not", a, "but", b, "."])
            labels = frozenset({"joy"}) if felt_happy else frozenset({"trust"})
            node_labels.append(((entity, i), labels))
        payload = TaskLabels(task=task, node_labels=tuple(node_labels))
        docs.append(_doc_from_token_rows(f"order-{d:03d}", rows, [entity],
                                         payload=payload))
    return docs


def symbolic_corpus(n_docs: int = 30, seed: int = 0,
                    n_sentences: int = 2) -> dict[str, list[Document]]:
    """Aligned per-task corpora over the same stories, for potential training
    and joint inference. Returns {task: documents} with matching doc ids.

    Two-sentence stories keep transition-rule ground programs at chain
    length 2, where exact MAP stays fast; pass a larger ``n_sentences`` for
    inter-label-only rule sets."""
    rng = np.random.default_rng(seed)
    cues = sorted(CUE_PROFILES)
    per_task: dict[str, list[Document]] = {t: [] for t in ("maslow", "reiss", "plutchik")}
    for d in range(n_docs):
        n_entities = int(rng.integers(1, 3))
        entities = [str(e) for e in rng.choice(ENTITY_POOL, size=n_entities, replace=False)]
        rows = []
        sentence_cues = []
        for i in range(n_sentences):
            cue = cues[int(rng.integers(len(cues)))]
            sentence_cues.append(cue)
            rows.append([MARKERS[i]] + sorted(entities) + ["saw", "the", cue, "."])
        for task in per_task:
            node_labels = []
            for i, cue in enumerate(sentence_cues):
                for e in entities:
                    node_labels.append(((e, i), frozenset(CUE_PROFILES[cue][task])))
            payload = TaskLabels(task=task, node_labels=tuple(node_labels))
            per_task[task].append(_doc_from_token_rows(
                f"joint-{d:03d}", rows, entities, payload=payload))
    return per_task


def three_document_corpus(seed: int = 7) -> list[Document]:
    """Small mixed corpus for exchange-format conformance checks."""
    docs = planted_rule_corpus(n_docs=3, seed=seed)
    return [Document(doc_id=f"fixture-{i}", sentences=d.sentences, chains=d.chains,
                     connectives=d.connectives, task_payload=None)
            for i, d in enumerate(docs)]


FIXTURE_KINDS = {
    "planted": lambda seed: planted_rule_corpus(seed=seed),
    "cue-maslow": lambda seed: cue_task_corpus("maslow", seed=seed),
    "cue-reiss": lambda seed: cue_task_corpus("reiss", seed=seed),
    "cue-plutchik": lambda seed: cue_task_corpus("plutchik", seed=seed),
    "sentiment": lambda seed: sentiment_cue_corpus(seed=seed),
    "desire": lambda seed: desire_corpus(seed=seed),
    "order": lambda seed: order_sensitive_corpus(seed=seed),
    "three-doc": lambda seed: three_document_corpus(seed=seed),
}
