"""Annotated story documents: ingestion, label-vote aggregation, label
sentences, and lexicon-based sentiment labeling.

The corpus file format is line-delimited JSON, one document per line (see
README for the schema). All operations here are pure over immutable
documents.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import DataError

TASKS = ("maslow", "reiss", "plutchik", "desire")

# Canonical label vocabularies, alphabetical within each task so label
# sentences and score vectors are reproducible.
MASLOW_LABELS = ("esteem", "love", "physiological", "spiritual growth", "stability")
REISS_LABELS = (
    "approval", "belonging", "competition", "contact", "curiosity", "family",
    "food", "health", "honor", "idealism", "independence", "order", "power",
    "rest", "romance", "savings", "serenity", "status", "tranquility",
)
PLUTCHIK_LABELS = (
    "anger", "anticipation", "disgust", "fear", "joy", "sadness", "surprise", "trust",
)
DESIRE_LABELS = ("fulfilled", "unfulfilled")
SENTIMENT_LABELS = ("negative", "neutral", "positive")

ANNOTATOR_COUNT = 3

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def normalize_tokens(text: str) -> tuple[str, ...]:
    """Lowercase and split, keeping punctuation as separate tokens."""
    return tuple(_TOKEN_RE.findall(text.lower()))


def task_vocabulary(task: str) -> tuple[str, ...]:
    try:
        return {
            "maslow": MASLOW_LABELS,
            "reiss": REISS_LABELS,
            "plutchik": PLUTCHIK_LABELS,
            "desire": DESIRE_LABELS,
            "sentiment": SENTIMENT_LABELS,
        }[task]
    except KeyError:
        raise DataError(f"unknown task '{task}'") from None


@dataclass(frozen=True)
class Sentence:
    index: int
    text: str
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class CorefChain:
    entity_name: str
    mentions: tuple[tuple[int, int, int], ...]  # (sentence_index, start, end)


@dataclass(frozen=True)
class ConnectiveAnnotation:
    sentence_index: int
    start: int
    end: int
    surface: str
    position: str  # "sentence-initial" | "medial"


@dataclass(frozen=True)
class TaskLabels:
    task: str
    # mental-state tasks: (entity_name, sentence_index) -> active label set
    node_labels: tuple[tuple[tuple[str, int], frozenset[str]], ...] = ()
    # per (entity, sentence): label -> 3 annotator flags/ratings
    raw_votes: tuple[tuple[tuple[str, int], tuple[tuple[str, tuple[float, ...]], ...]], ...] = ()
    doc_label: str | None = None          # desire only
    desire_sentence: int | None = None    # desire only

    def labels_for(self, entity: str, sentence: int) -> frozenset[str] | None:
        for key, labels in self.node_labels:
            if key == (entity, sentence):
                return labels
        return None


@dataclass(frozen=True)
class Document:
    doc_id: str
    sentences: tuple[Sentence, ...]
    chains: tuple[CorefChain, ...]
    connectives: tuple[ConnectiveAnnotation, ...] = ()
    task_payload: TaskLabels | None = None

    def chain_for(self, entity_name: str) -> CorefChain | None:
        for chain in self.chains:
            if chain.entity_name == entity_name:
                return chain
        return None


# ---------------------------------------------------------------------------
# Validation and (de)serialization


def _validate_document(doc: Document, connective_surfaces: frozenset[str]) -> None:
    did = doc.doc_id
    for pos, sent in enumerate(doc.sentences):
        if sent.index != pos:
            raise DataError(
                f"{did}: sentences[{pos}].index = {sent.index}, expected contiguous 0-based order"
            )
        if normalize_tokens(sent.text) != sent.tokens:
            raise DataError(
                f"{did}: sentences[{pos}].tokens do not match the normalized text"
            )
    n = len(doc.sentences)
    seen_entities = set()
    for ci, chain in enumerate(doc.chains):
        if chain.entity_name in seen_entities:
            raise DataError(f"{did}: duplicate chain for entity '{chain.entity_name}'")
        seen_entities.add(chain.entity_name)
        if not chain.mentions:
            raise DataError(f"{did}: chains[{ci}] has no mentions")
        if list(chain.mentions) != sorted(chain.mentions, key=lambda m: (m[0], m[1])):
            raise DataError(f"{did}: chains[{ci}].mentions not sorted")
        for mi, (sent_idx, start, end) in enumerate(chain.mentions):
            if not 0 <= sent_idx < n:
                raise DataError(
                    f"{did}: chains[{ci}].mentions[{mi}] cites sentence {sent_idx} "
                    f"in a {n}-sentence story"
                )
            ntok = len(doc.sentences[sent_idx].tokens)
            if not (0 <= start < end <= ntok):
                raise DataError(
                    f"{did}: chains[{ci}].mentions[{mi}] span [{start},{end}) "
                    f"outside {ntok} tokens"
                )
    for ki, conn in enumerate(doc.connectives):
        if not 0 <= conn.sentence_index < n:
            raise DataError(f"{did}: connectives[{ki}] cites sentence {conn.sentence_index}")
        ntok = len(doc.sentences[conn.sentence_index].tokens)
        if not (0 <= conn.start < conn.end <= ntok):
            raise DataError(f"{did}: connectives[{ki}] span outside the sentence")
        if conn.surface != conn.surface.lower():
            raise DataError(f"{did}: connectives[{ki}].surface must be lowercase")
        if conn.surface not in connective_surfaces:
            raise DataError(
                f"{did}: connectives[{ki}].surface '{conn.surface}' not in the connective lexicon"
            )
        if conn.position not in ("sentence-initial", "medial"):
            raise DataError(f"{did}: connectives[{ki}].position '{conn.position}'")
    payload = doc.task_payload
    if payload is None:
        return
    if payload.task not in TASKS:
        raise DataError(f"{did}: labels.task '{payload.task}'")
    if payload.task == "desire":
        if payload.doc_label not in DESIRE_LABELS:
            raise DataError(f"{did}: desire label '{payload.doc_label}'")
        if payload.desire_sentence is None or not 0 <= payload.desire_sentence < n:
            raise DataError(f"{did}: desire_sentence {payload.desire_sentence}")
        return
    vocab = set(task_vocabulary(payload.task))
    mentioned = {
        (chain.entity_name, m[0]) for chain in doc.chains for m in chain.mentions
    }
    for key, labels in payload.node_labels:
        if key not in mentioned:
            raise DataError(
                f"{did}: labels for {key} do not match any (entity, sentence) mention"
            )
        bad = set(labels) - vocab
        if bad:
            raise DataError(f"{did}: labels {sorted(bad)} outside the {payload.task} vocabulary")
    for key, votes in payload.raw_votes:
        for label, values in votes:
            if payload.task == "plutchik" and any(not 0 <= v <= 5 for v in values):
                raise DataError(f"{did}: plutchik rating outside [0,5] for {key}/{label}")


def _labels_to_json(payload: TaskLabels | None) -> dict | None:
    if payload is None:
        return None
    if payload.task == "desire":
        return {
            "task": "desire",
            "label": payload.doc_label,
            "desire_sentence": payload.desire_sentence,
        }
    nodes = []
    votes_by_key = dict(payload.raw_votes)
    for (entity, sent), labels in payload.node_labels:
        node = {"entity": entity, "sentence": sent, "labels": sorted(labels)}
        if (entity, sent) in votes_by_key:
            node["votes"] = {lab: list(vals) for lab, vals in votes_by_key[(entity, sent)]}
        nodes.append(node)
    return {"task": payload.task, "nodes": nodes}


def _labels_from_json(raw: dict | None) -> TaskLabels | None:
    if raw is None:
        return None
    task = raw.get("task")
    if task == "desire":
        return TaskLabels(task="desire", doc_label=raw.get("label"),
                          desire_sentence=raw.get("desire_sentence"))
    node_labels = []
    raw_votes = []
    for node in raw.get("nodes", []):
        key = (node["entity"], int(node["sentence"]))
        node_labels.append((key, frozenset(node.get("labels", []))))
        if "votes" in node:
            raw_votes.append((key, tuple(
                (lab, tuple(float(v) for v in vals))
                for lab, vals in sorted(node["votes"].items())
            )))
    return TaskLabels(task=task, node_labels=tuple(node_labels), raw_votes=tuple(raw_votes))


def document_to_json(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "sentences": [
            {"index": s.index, "text": s.text, "tokens": list(s.tokens)}
            for s in doc.sentences
        ],
        "chains": [
            {"entity": c.entity_name, "mentions": [list(m) for m in c.mentions]}
            for c in doc.chains
        ],
        "connectives": [
            {"sent": k.sentence_index, "start": k.start, "end": k.end,
             "surface": k.surface, "position": k.position}
            for k in doc.connectives
        ],
        "labels": _labels_to_json(doc.task_payload),
    }


def document_from_json(raw: dict) -> Document:
    try:
        doc = Document(
            doc_id=str(raw["doc_id"]),
            sentences=tuple(
                Sentence(index=int(s["index"]), text=s["text"], tokens=tuple(s["tokens"]))
                for s in raw["sentences"]
            ),
            chains=tuple(
                CorefChain(
                    entity_name=c["entity"],
                    mentions=tuple(tuple(int(x) for x in m) for m in c["mentions"]),
                )
                for c in raw.get("chains", [])
            ),
            connectives=tuple(
                ConnectiveAnnotation(
                    sentence_index=int(k["sent"]), start=int(k["start"]),
                    end=int(k["end"]), surface=k["surface"], position=k["position"],
                )
                for k in raw.get("connectives", [])
            ),
            task_payload=_labels_from_json(raw.get("labels")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed document record: {exc}") from exc
    return doc


def load_corpus(path, connective_surfaces: frozenset[str] | None = None) -> list[Document]:
    """Read a line-delimited corpus file, validating every document."""
    from .graph import CONNECTIVE_RELATIONS  # default lexicon lives with the graph builder

    surfaces = connective_surfaces or frozenset(CONNECTIVE_RELATIONS)
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            doc = document_from_json(raw)
            _validate_document(doc, surfaces)
            docs.append(doc)
    return docs


def write_corpus(docs: Iterable[Document], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(document_to_json(doc)) + "\n")


# ---------------------------------------------------------------------------
# Vote aggregation and label sentences


def aggregate_votes(raw_votes: Mapping[str, Sequence[float]], task: str) -> frozenset[str]:
    """Resolve 3-annotator votes into an active label set.

    maslow/reiss: a label is active when flagged by at least 2 of 3
    annotators. plutchik: ratings in [0, 5]; active when the mean is >= 2.
    """
    if task not in ("maslow", "reiss", "plutchik"):
        raise DataError(f"vote aggregation undefined for task '{task}'")
    active = set()
    for label, votes in raw_votes.items():
        if len(votes) != ANNOTATOR_COUNT:
            raise DataError(
                f"label '{label}': expected {ANNOTATOR_COUNT} annotator votes, got {len(votes)}"
            )
        if task == "plutchik":
            if any(not 0 <= v <= 5 for v in votes):
                raise DataError(f"label '{label}': plutchik rating outside [0,5]")
            if sum(votes) / ANNOTATOR_COUNT >= 2.0:
                active.add(label)
        else:
            if sum(1 for v in votes if v) >= 2:
                active.add(label)
    return frozenset(active)


def build_label_sentence(entity_name: str, vocabulary: Sequence[str]) -> str:
    """Template '<entity> is <l1>, <l2>, ..., <lk>.' over ALL candidate labels."""
    if not vocabulary:
        raise DataError("label sentence needs a non-empty vocabulary")
    return f"{entity_name} is {', '.join(vocabulary)}."


# ---------------------------------------------------------------------------
# Sentiment lexicon

NEGATION_WINDOW = 3


@dataclass(frozen=True)
class SentimentLexicon:
    scores: Mapping[str, float]
    negations: frozenset[str]
    t_pos: float = 0.05
    t_neg: float = -0.05

    def __post_init__(self):
        if not self.t_neg < 0 < self.t_pos:
            raise DataError(f"thresholds must satisfy t_neg < 0 < t_pos, got "
                            f"({self.t_neg}, {self.t_pos})")

    def negate(self) -> "SentimentLexicon":
        return SentimentLexicon(
            scores={w: -s for w, s in self.scores.items()},
            negations=self.negations, t_pos=self.t_pos, t_neg=self.t_neg,
        )


def sentiment_label(tokens: Sequence[str], lexicon: SentimentLexicon) -> str:
    """Polarity of a token sequence: lexicon hits, negation flips within a
    3-token window, normalized by sqrt of the token count."""
    if not tokens:
        return "neutral"
    total = 0.0
    for i, tok in enumerate(tokens):
        score = lexicon.scores.get(tok)
        if score is None:
            continue
        window = tokens[max(0, i - NEGATION_WINDOW):i]
        if any(w in lexicon.negations for w in window):
            score = -score
        total += score
    total /= math.sqrt(len(tokens))
    if total >= lexicon.t_pos:
        return "positive"
    if total <= lexicon.t_neg:
        return "negative"
    return "neutral"


def load_lexicon(path) -> SentimentLexicon:
    """External lexicon file: {"scores": {...}, "negations": [...],
    "thresholds": [t_neg, t_pos]}."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        t_neg, t_pos = raw.get("thresholds", (-0.05, 0.05))
        return SentimentLexicon(
            scores={str(w): float(s) for w, s in raw["scores"].items()},
            negations=frozenset(raw.get("negations", DEFAULT_NEGATIONS)),
            t_pos=float(t_pos), t_neg=float(t_neg),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed lexicon file {path}: {exc}") from exc


DEFAULT_NEGATIONS = frozenset({
    "not", "no", "never", "none", "nobody", "nothing", "neither", "nor",
    "n't", "cannot", "without", "hardly", "barely", "scarcely", "rarely",
    "seldom", "lacking", "lacks", "lack",
})

# Compact general-purpose polarity lexicon used for weak sentiment labels.
_POSITIVE = {
    "good": 0.6, "great": 0.8, "excellent": 0.9, "amazing": 0.85, "awesome": 0.85,
    "wonderful": 0.85, "fantastic": 0.85, "terrific": 0.8, "superb": 0.85,
    "happy": 0.8, "happier": 0.75, "happiest": 0.85, "happily": 0.7, "glad": 0.7,
    "joy": 0.8, "joyful": 0.85, "joyous": 0.8, "delight": 0.8, "delighted": 0.85,
    "delightful": 0.8, "pleased": 0.7, "pleasant": 0.65, "pleasure": 0.7,
    "love": 0.85, "loved": 0.8, "loves": 0.8, "loving": 0.75, "lovely": 0.75,
    "adore": 0.8, "adored": 0.8, "like": 0.4, "liked": 0.45, "likes": 0.4,
    "enjoy": 0.65, "enjoyed": 0.7, "enjoys": 0.65, "fun": 0.6, "funny": 0.5,
    "smile": 0.6, "smiled": 0.6, "smiling": 0.6, "laugh": 0.6, "laughed": 0.6,
    "laughter": 0.65, "cheer": 0.6, "cheered": 0.65, "cheerful": 0.7,
    "excited": 0.7, "exciting": 0.7, "excitement": 0.7, "thrilled": 0.8,
    "thrilling": 0.7, "eager": 0.5, "hope": 0.5, "hoped": 0.45, "hopeful": 0.6,
    "proud": 0.7, "pride": 0.6, "confident": 0.6, "brave": 0.6, "bold": 0.4,
    "calm": 0.45, "calmly": 0.4, "peaceful": 0.6, "peace": 0.6, "relaxed": 0.55,
    "relief": 0.55, "relieved": 0.6, "comfort": 0.5, "comfortable": 0.55,
    "safe": 0.5, "secure": 0.5, "warm": 0.4, "kind": 0.55, "kindness": 0.6,
    "gentle": 0.5, "friendly": 0.6, "friend": 0.45, "friends": 0.45,
    "win": 0.65, "won": 0.7, "winner": 0.7, "wins": 0.65, "victory": 0.75,
    "success": 0.7, "successful": 0.7, "succeed": 0.65, "succeeded": 0.7,
    "achieve": 0.6, "achieved": 0.65, "achievement": 0.65, "accomplish": 0.6,
    "accomplished": 0.65, "reward": 0.6, "rewarded": 0.65, "prize": 0.6,
    "best": 0.7, "better": 0.5, "favorite": 0.65, "perfect": 0.8,
    "beautiful": 0.75, "beauty": 0.65, "bright": 0.45, "shine": 0.4,
    "celebrate": 0.7, "celebrated": 0.7, "celebration": 0.7, "party": 0.4,
    "gift": 0.5, "thank": 0.55, "thanks": 0.55, "thankful": 0.65,
    "grateful": 0.7, "generous": 0.6, "helpful": 0.55, "help": 0.35,
    "helped": 0.4, "support": 0.45, "supported": 0.5, "encourage": 0.55,
    "encouraged": 0.6, "inspire": 0.6, "inspired": 0.65, "impressed": 0.6,
    "impressive": 0.65, "trust": 0.55, "trusted": 0.6, "honest": 0.55,
    "fresh": 0.35, "healthy": 0.5, "heal": 0.45, "healed": 0.5,
    "rich": 0.45, "wealth": 0.5, "lucky": 0.6, "fortunate": 0.6,
    "satisfied": 0.6, "satisfying": 0.6, "content": 0.5, "bliss": 0.8,
    "ecstatic": 0.9, "overjoyed": 0.9, "elated": 0.85, "cheery": 0.65,
}
_NEGATIVE = {
    "bad": -0.6, "terrible": -0.85, "horrible": -0.85, "awful": -0.8,
    "dreadful": -0.8, "worst": -0.8, "worse": -0.55, "poor": -0.5,
    "sad": -0.75, "sadder": -0.7, "saddest": -0.8, "sadly": -0.6,
    "unhappy": -0.75, "sorrow": -0.7, "grief": -0.75, "miserable": -0.8,
    "misery": -0.75, "depressed": -0.8, "depressing": -0.7, "gloomy": -0.6,
    "cry": -0.6, "cried": -0.65, "crying": -0.65, "tears": -0.55, "weep": -0.65,
    "angry": -0.75, "anger": -0.7, "mad": -0.65, "furious": -0.85, "rage": -0.8,
    "annoyed": -0.55, "annoying": -0.55, "irritated": -0.55, "frustrated": -0.65,
    "frustrating": -0.6, "upset": -0.6, "bitter": -0.55, "resent": -0.6,
    "hate": -0.85, "hated": -0.8, "hates": -0.8, "hateful": -0.8,
    "disgust": -0.75, "disgusted": -0.75, "disgusting": -0.8, "gross": -0.6,
    "fear": -0.7, "feared": -0.65, "fearful": -0.7, "afraid": -0.7,
    "scared": -0.7, "scary": -0.6, "terrified": -0.85, "terrifying": -0.8,
    "frightened": -0.7, "panic": -0.7, "panicked": -0.7, "dread": -0.7,
    "nervous": -0.5, "anxious": -0.55, "anxiety": -0.6, "worry": -0.55,
    "worried": -0.6, "worrying": -0.55, "stress": -0.55, "stressed": -0.6,
    "hurt": -0.6, "hurts": -0.6, "pain": -0.65, "painful": -0.7, "ache": -0.5,
    "sick": -0.6, "ill": -0.55, "illness": -0.6, "disease": -0.6, "injured": -0.6,
    "injury": -0.6, "wound": -0.55, "die": -0.8, "died": -0.8, "death": -0.8,
    "dead": -0.75, "kill": -0.8, "killed": -0.8, "lose": -0.55, "lost": -0.6,
    "loss": -0.6, "loser": -0.65, "fail": -0.7, "failed": -0.7, "failure": -0.75,
    "broke": -0.5, "broken": -0.6, "break": -0.4, "ruin": -0.7, "ruined": -0.75,
    "destroy": -0.75, "destroyed": -0.75, "damage": -0.6, "damaged": -0.6,
    "wrong": -0.5, "mistake": -0.5, "error": -0.45, "problem": -0.45,
    "trouble": -0.5, "difficult": -0.4, "hard": -0.25, "struggle": -0.5,
    "struggled": -0.5, "suffer": -0.7, "suffered": -0.7, "suffering": -0.75,
    "cruel": -0.75, "mean": -0.45, "rude": -0.55, "selfish": -0.55,
    "lonely": -0.65, "alone": -0.35, "abandon": -0.65, "abandoned": -0.7,
    "reject": -0.6, "rejected": -0.65, "ashamed": -0.65, "shame": -0.6,
    "embarrassed": -0.6, "embarrassing": -0.55, "guilt": -0.55, "guilty": -0.55,
    "jealous": -0.55, "envy": -0.5, "regret": -0.6, "regretted": -0.6,
    "disappoint": -0.65, "disappointed": -0.7, "disappointing": -0.65,
    "disaster": -0.75, "tragedy": -0.75, "tragic": -0.7, "crisis": -0.6,
    "danger": -0.6, "dangerous": -0.6, "threat": -0.6, "steal": -0.65,
    "stole": -0.65, "stolen": -0.65, "theft": -0.6, "cheat": -0.65,
    "cheated": -0.65, "lie": -0.5, "lied": -0.55, "liar": -0.6,
    "ugly": -0.6, "dirty": -0.45, "filthy": -0.6, "nasty": -0.6,
    "boring": -0.45, "bored": -0.45, "tired": -0.4, "exhausted": -0.55,
}

DEFAULT_LEXICON = SentimentLexicon(
    scores={**_POSITIVE, **_NEGATIVE},
    negations=DEFAULT_NEGATIONS,
)
