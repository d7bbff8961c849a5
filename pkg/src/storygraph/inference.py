"""Joint symbolic inference over character mental-state predictions.

Rules are horn clauses over a fixed predicate set. Weighted rules get their
clause weights from neural potentials (feed-forward nets over frozen node
embeddings, trained with local per-rule objectives); hard rules become
boolean constraints. MAP inference finds the exact argmax assignment by
branch-and-bound with an independent-clause upper bound, with exhaustive
enumeration as the small-program path.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import autodiff as ad
from . import heads
from .autodiff import ParameterStore, Tape
from .corpus import Document, task_vocabulary
from .errors import DataError, NumericError
from .graph import GraphNode, NarrativeGraph, build_graph
from .training import GraphModel, node_embeddings

STATE_PREDICATES = {"Maslow": "maslow", "Reiss": "reiss", "Plut": "plutchik"}
PREDICATE_OF_TASK = {v: k for k, v in STATE_PREDICATES.items()}
OBSERVED_PREDICATES = ("Entity", "HasNext", "Align", "Pos")
EXHAUSTIVE_LIMIT = 20


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[str, ...]
    negated: bool = False


@dataclass(frozen=True)
class Rule:
    body: tuple[Atom, ...]
    head: Atom
    kind: str  # "weighted" | "hard"
    schema: str = ""       # filled by classification
    task: str | None = None

    def potential_id(self) -> str | None:
        if self.kind != "weighted":
            return None
        return f"{self.schema}:{self.task}"


_ATOM_RE = re.compile(r"(¬|!)?\s*([A-Za-z]+)\s*\(([^()]*)\)")


def _parse_atom(text: str) -> Atom:
    match = _ATOM_RE.fullmatch(text.strip())
    if match is None:
        raise DataError(f"cannot parse atom '{text.strip()}'")
    neg, pred, args = match.groups()
    if pred not in STATE_PREDICATES and pred not in OBSERVED_PREDICATES:
        raise DataError(f"unknown predicate '{pred}'")
    return Atom(predicate=pred,
                args=tuple(a.strip() for a in args.split(",") if a.strip()),
                negated=bool(neg))


def parse_rules(text: str) -> list[Rule]:
    """Parse a rule file: lines of '<weighted|hard>: body => head' where the
    body is a conjunction (∧ or &) of possibly negated (¬ or !) atoms."""
    rules = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            marker, clause = line.split(":", 1)
        except ValueError:
            raise DataError(f"rules:{lineno}: missing weighted/hard marker") from None
        marker = marker.strip().lower()
        if marker not in ("weighted", "hard"):
            raise DataError(f"rules:{lineno}: unknown marker '{marker}'")
        clause = clause.replace("⇒", "=>").replace("∧", "&").replace("¬", "!")
        if "=>" not in clause:
            raise DataError(f"rules:{lineno}: not a horn clause (missing =>)")
        body_text, head_text = clause.split("=>", 1)
        body = tuple(_parse_atom(a) for a in body_text.split("&"))
        head = _parse_atom(head_text)
        rules.append(_classify_rule(Rule(body=body, head=head, kind=marker), lineno))
    return rules


def _classify_rule(rule: Rule, lineno: int) -> Rule:
    """Recognize the supported rule schemas; anything else is rejected."""
    preds = [a.predicate for a in rule.body]
    head = rule.head
    if rule.kind == "weighted":
        if preds == ["Entity"] and head.predicate in STATE_PREDICATES and not head.negated:
            return replace(rule, schema="unary", task=STATE_PREDICATES[head.predicate])
        if (len(rule.body) == 2 and preds[0] in STATE_PREDICATES
                and preds[1] == "HasNext" and head.predicate == preds[0]
                and not head.negated and not rule.body[0].negated):
            return replace(rule, schema="transition", task=STATE_PREDICATES[preds[0]])
        raise DataError(f"rules:{lineno}: unsupported weighted rule shape")
    if (len(rule.body) == 2 and {preds[0], head.predicate} == {"Maslow", "Reiss"}
            and preds[1] == "Align" and rule.body[1].negated and head.negated):
        return replace(rule, schema="alignment")
    if (len(rule.body) == 3 and preds[0] == "Plut" and preds[1] == "Pos"
            and preds[2] == "Pos" and rule.body[2].negated
            and head.predicate == "Plut" and head.negated):
        return replace(rule, schema="polarity")
    raise DataError(f"rules:{lineno}: unsupported hard rule shape")


# ---------------------------------------------------------------------------
# Ground programs


@dataclass(frozen=True)
class GroundVariable:
    task: str
    mention: tuple[str, int]  # (entity, sentence)
    label: str


@dataclass(frozen=True)
class GroundClause:
    """Disjunction of literals; (index, True) means the variable itself."""
    literals: tuple[tuple[int, bool], ...]
    weight: float | None = None  # None marks a hard constraint
    origin: tuple = ()


@dataclass
class GroundProgram:
    variables: list[GroundVariable]
    weighted: list[GroundClause]
    hard: list[GroundClause]

    def value_of(self, assignment: Sequence[bool]) -> float:
        return sum(c.weight for c in self.weighted
                   if _clause_satisfied(c, assignment))


def _clause_satisfied(clause: GroundClause, assignment: Sequence[bool]) -> bool:
    return any(bool(assignment[i]) == sign for i, sign in clause.literals)


@dataclass(frozen=True)
class AlignTable:
    pairs: frozenset[tuple[str, str]]  # aligned (maslow label, reiss label)

    def aligned(self, maslow_label: str, reiss_label: str) -> bool:
        return (maslow_label, reiss_label) in self.pairs


def load_alignment(path) -> AlignTable:
    """JSON mapping each Maslow need to the Reiss motives it refines into.
    Every Reiss motive must appear under exactly one need."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    pairs = set()
    seen: dict[str, str] = {}
    for maslow_label, reiss_labels in raw.items():
        if maslow_label not in task_vocabulary("maslow"):
            raise DataError(f"alignment: unknown Maslow label '{maslow_label}'")
        for reiss_label in reiss_labels:
            if reiss_label not in task_vocabulary("reiss"):
                raise DataError(f"alignment: unknown Reiss label '{reiss_label}'")
            if reiss_label in seen:
                raise DataError(
                    f"alignment: '{reiss_label}' appears under both "
                    f"'{seen[reiss_label]}' and '{maslow_label}'")
            seen[reiss_label] = maslow_label
            pairs.add((maslow_label, reiss_label))
    missing = set(task_vocabulary("reiss")) - set(seen)
    if missing:
        raise DataError(f"alignment: Reiss labels missing: {sorted(missing)}")
    return AlignTable(pairs=frozenset(pairs))


@dataclass(frozen=True)
class PolarityGroups:
    positive: frozenset[str]
    negative: frozenset[str]


def load_polarity(path) -> PolarityGroups:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    pos, neg = frozenset(raw["positive"]), frozenset(raw["negative"])
    vocab = set(task_vocabulary("plutchik"))
    if not pos or not neg or (pos | neg) - vocab or pos & neg:
        raise DataError("polarity groups must be disjoint non-empty Plutchik subsets")
    return PolarityGroups(positive=pos, negative=neg)


def _mentions_of(graph: NarrativeGraph) -> list[tuple[str, int]]:
    return [(n.entity_name, n.sentence_index) for n in graph.nodes]


def hasnext_pairs(graph: NarrativeGraph) -> list[tuple[int, int]]:
    """Indices of mention pairs of the same character in consecutive sentences."""
    index = {(n.entity_name, n.sentence_index): i for i, n in enumerate(graph.nodes)}
    pairs = []
    for i, node in enumerate(graph.nodes):
        follower = index.get((node.entity_name, node.sentence_index + 1))
        if follower is not None:
            pairs.append((i, follower))
    return pairs


def ground_rules(rules: Sequence[Rule], graph: NarrativeGraph,
                 alignment: AlignTable | None = None,
                 polarity: PolarityGroups | None = None) -> GroundProgram:
    """Instantiate the rule set over a story's mentions.

    One boolean variable per (task, mention, label); weights stay zero until
    :func:`score_rules` fills them.
    """
    mentions = _mentions_of(graph)
    tasks = sorted({r.task for r in rules if r.task},
                   key=("maslow", "reiss", "plutchik").index)
    variables: list[GroundVariable] = []
    var_index: dict[tuple[str, int, str], int] = {}
    for m_idx in range(len(mentions)):
        for task in tasks:
            for label in task_vocabulary(task):
                var_index[(task, m_idx, label)] = len(variables)
                variables.append(GroundVariable(task, mentions[m_idx], label))

    weighted: list[GroundClause] = []
    hard: list[GroundClause] = []
    hard_seen: set[frozenset] = set()
    next_pairs = hasnext_pairs(graph)

    for rule in rules:
        if rule.schema == "unary":
            for m_idx in range(len(mentions)):
                for label in task_vocabulary(rule.task):
                    var = var_index[(rule.task, m_idx, label)]
                    weighted.append(GroundClause(
                        literals=((var, True),), weight=0.0,
                        origin=("unary", rule.task, m_idx, label)))
        elif rule.schema == "transition":
            labels = task_vocabulary(rule.task)
            for i, j in next_pairs:
                for l_i in labels:
                    for l_j in labels:
                        weighted.append(GroundClause(
                            literals=((var_index[(rule.task, i, l_i)], False),
                                      (var_index[(rule.task, j, l_j)], True)),
                            weight=0.0,
                            origin=("transition", rule.task, i, j, l_i, l_j)))
        elif rule.schema == "alignment":
            if alignment is None:
                raise DataError("alignment rule present but no alignment table given")
            if "maslow" not in tasks or "reiss" not in tasks:
                continue
            for m_idx in range(len(mentions)):
                for ml in task_vocabulary("maslow"):
                    for rl in task_vocabulary("reiss"):
                        if alignment.aligned(ml, rl):
                            continue
                        lits = ((var_index[("maslow", m_idx, ml)], False),
                                (var_index[("reiss", m_idx, rl)], False))
                        key = frozenset(lits)
                        if key not in hard_seen:
                            hard_seen.add(key)
                            hard.append(GroundClause(
                                literals=lits, origin=("alignment", m_idx, ml, rl)))
        elif rule.schema == "polarity":
            if polarity is None:
                raise DataError("polarity rule present but no polarity groups given")
            if "plutchik" not in tasks:
                continue
            for m_idx in range(len(mentions)):
                for p in sorted(polarity.positive):
                    for q in sorted(polarity.negative):
                        lits = ((var_index[("plutchik", m_idx, p)], False),
                                (var_index[("plutchik", m_idx, q)], False))
                        key = frozenset(lits)
                        if key not in hard_seen:
                            hard_seen.add(key)
                            hard.append(GroundClause(
                                literals=lits, origin=("polarity", m_idx, p, q)))
    return GroundProgram(variables=variables, weighted=weighted, hard=hard)


# ---------------------------------------------------------------------------
# Potentials


POTENTIAL_EPOCHS = 200


@dataclass
class PotentialConfig:
    lr: float = 1e-3
    patience: int = 5
    epochs: int = POTENTIAL_EPOCHS
    hidden_dim: int = 128
    seed: int = 0


@dataclass
class StoryFeatures:
    """Frozen per-story inputs to potential scoring and training."""
    doc_id: str
    embeddings: np.ndarray                      # (n_mentions, d)
    mentions: list[tuple[str, int]]
    gold: dict[str, list[frozenset[str] | None]]  # task -> per-mention labels
    pairs: list[tuple[int, int]]                # HasNext index pairs


def story_features(model: GraphModel, docs: Sequence[Document],
                   tasks: Sequence[str], external=None) -> list[StoryFeatures]:
    out = []
    for doc in docs:
        graph = build_graph(doc, model.config.max_nodes)
        if not graph.nodes:
            continue
        emb = node_embeddings(model, doc, graph, external)
        gold: dict[str, list[frozenset[str] | None]] = {}
        payload = doc.task_payload
        for task in tasks:
            per_mention: list[frozenset[str] | None] = []
            for node in graph.nodes:
                labels = None
                if payload is not None and payload.task == task:
                    labels = payload.labels_for(node.entity_name, node.sentence_index)
                per_mention.append(labels)
            gold[task] = per_mention
        out.append(StoryFeatures(doc.doc_id, emb, _mentions_of(graph), gold,
                                 hasnext_pairs(graph)))
    return out


def _sgd_fit(store: ParameterStore, prefix: str, x_train: np.ndarray,
             y_train: np.ndarray, x_dev: np.ndarray, y_dev: np.ndarray,
             config: PotentialConfig) -> None:
    """Plain gradient descent on BCE with early stopping on the dev loss."""
    best = np.inf
    best_snapshot = store.snapshot()
    since_best = 0
    for _ in range(config.epochs):
        tape = Tape()
        params = store.bind(tape)
        loss = heads.multilabel_bce(
            heads.classifier_forward(params, prefix, ad.Var(x_train)), y_train)
        grads = ad.backward(loss, params)
        for name in store.names():
            if name.startswith(prefix):
                store.get(name)[...] -= config.lr * grads[name]
        dev_params = store.bind(Tape())
        dev_loss = float(heads.multilabel_bce(
            heads.classifier_forward(dev_params, prefix, ad.Var(x_dev)), y_dev).data)
        if dev_loss < best:
            best, best_snapshot, since_best = dev_loss, store.snapshot(), 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break
    store.restore(best_snapshot)


def train_potentials(stories_train: Sequence[StoryFeatures],
                     stories_dev: Sequence[StoryFeatures],
                     tasks: Sequence[str], config: PotentialConfig,
                     store: ParameterStore | None = None,
                     with_transitions: bool = True) -> ParameterStore:
    """Fit unary (and optionally transition) potentials per task, each with
    its own local cross-entropy objective over frozen embeddings."""
    rng = np.random.default_rng(config.seed)
    store = store if store is not None else ParameterStore()

    def collect(stories, task):
        xs, ys = [], []
        labels = task_vocabulary(task)
        for story in stories:
            for m_idx, gold in enumerate(story.gold.get(task, [])):
                if gold is None:
                    continue
                xs.append(story.embeddings[m_idx])
                ys.append([1.0 if lab in gold else 0.0 for lab in labels])
        if not xs:
            return None, None
        return np.asarray(xs), np.asarray(ys)

    def collect_pairs(stories, task):
        xs, ys = [], []
        labels = task_vocabulary(task)
        n = len(labels)
        for story in stories:
            golds = story.gold.get(task, [])
            for i, j in story.pairs:
                gi, gj = golds[i], golds[j]
                if gi is None or gj is None:
                    continue
                xs.append(np.concatenate([story.embeddings[i], story.embeddings[j]]))
                grid = np.zeros((n, n))
                for a, la in enumerate(labels):
                    for b, lb in enumerate(labels):
                        grid[a, b] = float(la in gi and lb in gj)
                ys.append(grid.reshape(-1))
        if not xs:
            return None, None
        return np.asarray(xs), np.asarray(ys)

    for task in tasks:
        labels = task_vocabulary(task)
        dim = stories_train[0].embeddings.shape[1]
        x_train, y_train = collect(stories_train, task)
        if x_train is None:
            raise DataError(f"no labeled mentions for task '{task}'")
        x_dev, y_dev = collect(stories_dev, task)
        if x_dev is None:
            x_dev, y_dev = x_train, y_train
        prefix = f"potential/{task}/unary"
        store.drop(prefix)
        heads.init_classifier(store, rng, prefix, dim, config.hidden_dim, len(labels))
        _sgd_fit(store, prefix, x_train, y_train, x_dev, y_dev, config)

        if not with_transitions:
            continue
        xp_train, yp_train = collect_pairs(stories_train, task)
        if xp_train is None:
            warnings.warn(
                f"task '{task}': no consecutive labeled mention pairs; "
                f"transition rules disabled")
            continue
        xp_dev, yp_dev = collect_pairs(stories_dev, task)
        if xp_dev is None:
            xp_dev, yp_dev = xp_train, yp_train
        prefix = f"potential/{task}/transition"
        store.drop(prefix)
        heads.init_classifier(store, rng, prefix, 2 * dim, config.hidden_dim,
                              len(labels) ** 2)
        _sgd_fit(store, prefix, xp_train, yp_train, xp_dev, yp_dev, config)
    return store


class PotentialScorer:
    """Clause weights for one story from trained potential heads."""

    def __init__(self, store: ParameterStore, story: StoryFeatures):
        self.store = store
        self.story = story
        self._unary: dict[str, np.ndarray] = {}
        self._transition: dict[str, dict[tuple[int, int], np.ndarray]] = {}

    def has_transition(self, task: str) -> bool:
        return f"potential/{task}/transition/w1" in self.store

    def _unary_logits(self, task: str) -> np.ndarray:
        if task not in self._unary:
            params = self.store.bind(Tape())
            logits = heads.classifier_forward(
                params, f"potential/{task}/unary", ad.Var(self.story.embeddings))
            self._unary[task] = logits.data
        return self._unary[task]

    def _transition_logits(self, task: str, i: int, j: int) -> np.ndarray:
        cache = self._transition.setdefault(task, {})
        if (i, j) not in cache:
            x = np.concatenate([self.story.embeddings[i], self.story.embeddings[j]])
            params = self.store.bind(Tape())
            logits = heads.classifier_forward(
                params, f"potential/{task}/transition", ad.Var(x[None, :]))
            n = len(task_vocabulary(task))
            cache[(i, j)] = logits.data.reshape(n, n)
        return cache[(i, j)]

    def weight(self, origin: tuple) -> float:
        kind, task = origin[0], origin[1]
        labels = task_vocabulary(task)
        if kind == "unary":
            _, _, m_idx, label = origin
            if f"potential/{task}/unary/w1" not in self.store:
                raise DataError(f"no embedding/potential for task '{task}'")
            return float(self._unary_logits(task)[m_idx, labels.index(label)])
        _, _, i, j, l_i, l_j = origin
        grid = self._transition_logits(task, i, j)
        return float(grid[labels.index(l_i), labels.index(l_j)])


def score_rules(program: GroundProgram, scorer: PotentialScorer) -> GroundProgram:
    """Fill every weighted clause's weight from the neural potentials."""
    weighted = [replace(c, weight=scorer.weight(c.origin)) for c in program.weighted]
    return GroundProgram(variables=program.variables, weighted=weighted,
                         hard=program.hard)


# ---------------------------------------------------------------------------
# MAP inference


def map_inference(program: GroundProgram,
                  exhaustive_limit: int = EXHAUSTIVE_LIMIT) -> np.ndarray:
    """Exact argmax of the summed satisfied-clause weights subject to all
    hard clauses. Ties break toward all-false, then lexicographic order.

    The objective decomposes over clause-connected components, which are
    solved independently (the per-component lexicographic tie-break composes
    to the global one). Components below ``exhaustive_limit`` variables are
    enumerated; larger ones run branch-and-bound with an independent-clause
    bound.
    """
    n = len(program.variables)
    if n == 0:
        return np.zeros(0, dtype=bool)
    if n < exhaustive_limit:
        return _exhaustive_argmax(program)
    assignment = np.zeros(n, dtype=bool)
    for var_ids, sub in _connected_components(program):
        if len(var_ids) < exhaustive_limit:
            assignment[var_ids] = _exhaustive_argmax(sub)
        else:
            assignment[var_ids] = _branch_and_bound(sub)
    return assignment


def _connected_components(program: GroundProgram
                          ) -> list[tuple[np.ndarray, GroundProgram]]:
    """Split into sub-programs with disjoint variable supports."""
    n = len(program.variables)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    clauses = list(program.weighted) + list(program.hard)
    for clause in clauses:
        first = clause.literals[0][0]
        for var, _ in clause.literals[1:]:
            union(first, var)
    members: dict[int, list[int]] = {}
    for v in range(n):
        members.setdefault(find(v), []).append(v)
    out = []
    for root in sorted(members):
        var_ids = np.array(members[root], dtype=np.intp)
        local = {v: i for i, v in enumerate(members[root])}
        sub = GroundProgram(
            variables=[program.variables[v] for v in members[root]],
            weighted=[GroundClause(tuple((local[v], s) for v, s in c.literals),
                                   c.weight, c.origin)
                      for c in program.weighted
                      if find(c.literals[0][0]) == root],
            hard=[GroundClause(tuple((local[v], s) for v, s in c.literals),
                               None, c.origin)
                  for c in program.hard
                  if find(c.literals[0][0]) == root],
        )
        out.append((var_ids, sub))
    return out


def _exhaustive_argmax(program: GroundProgram) -> np.ndarray:
    n = len(program.variables)
    count = 1 << n
    shifts = (n - 1 - np.arange(n))[None, :]
    bits = ((np.arange(count)[:, None] >> shifts) & 1).astype(bool)

    def satisfied(clause):
        sat = np.zeros(count, dtype=bool)
        for var, sign in clause.literals:
            sat |= bits[:, var] == sign
        return sat

    objective = np.zeros(count)
    for clause in program.weighted:
        objective += clause.weight * satisfied(clause)
    feasible = np.ones(count, dtype=bool)
    for clause in program.hard:
        feasible &= satisfied(clause)
    if not feasible.any():
        raise NumericError("hard constraints are infeasible")
    objective[~feasible] = -np.inf
    return bits[int(np.argmax(objective))].copy()


# The incremental bound accumulates float error up to ~n_clauses * max|w| * eps;
# pruning keeps this much slack so only provably-not-better subtrees are cut,
# and leaf values are recomputed in canonical clause order so exact ties keep
# the first (lexicographically smallest) assignment found.
_BOUND_SLACK = 1e-9


def _branch_and_bound(program: GroundProgram) -> np.ndarray:
    n = len(program.variables)
    clauses = list(program.weighted) + list(program.hard)
    occurrences: list[list[tuple[int, bool]]] = [[] for _ in range(n)]
    for ci, clause in enumerate(clauses):
        for var, sign in clause.literals:
            occurrences[var].append((ci, sign))
    weights = [c.weight for c in clauses]
    is_hard = [c.weight is None for c in clauses]

    assignment = np.full(n, -1, dtype=np.int8)
    unassigned = [len(c.literals) for c in clauses]
    sat_count = [0] * len(clauses)
    current = 0.0
    potential = sum(max(w, 0.0) for w in weights if w is not None)
    best_value = -np.inf
    best_assignment: np.ndarray | None = None

    def set_var(var: int, value: bool) -> tuple[float, float, bool]:
        """Apply one assignment; returns (d_current, d_potential, feasible)."""
        nonlocal current, potential
        d_cur = d_pot = 0.0
        feasible = True
        assignment[var] = int(value)
        for ci, sign in occurrences[var]:
            unassigned[ci] -= 1
            if sign == value:
                sat_count[ci] += 1
                if sat_count[ci] == 1 and not is_hard[ci]:
                    d_cur += weights[ci]
                    d_pot -= max(weights[ci], 0.0)
            if sat_count[ci] == 0 and unassigned[ci] == 0:
                if is_hard[ci]:
                    feasible = False
                else:
                    d_pot -= max(weights[ci], 0.0)
        current += d_cur
        potential += d_pot
        return d_cur, d_pot, feasible

    def unset_var(var: int, value: bool, d_cur: float, d_pot: float) -> None:
        nonlocal current, potential
        assignment[var] = -1
        for ci, sign in occurrences[var]:
            unassigned[ci] += 1
            if sign == value:
                sat_count[ci] -= 1
        current -= d_cur
        potential -= d_pot

    def dfs(var: int) -> None:
        nonlocal best_value, best_assignment
        if current + potential <= best_value - _BOUND_SLACK:
            return
        if var == n:
            value = program.value_of(assignment.astype(bool))
            if value > best_value:
                best_value = value
                best_assignment = assignment.astype(bool).copy()
            return
        for value in (False, True):
            d_cur, d_pot, feasible = set_var(var, value)
            if feasible:
                dfs(var + 1)
            unset_var(var, value, d_cur, d_pot)

    import sys
    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, n + 100))
    try:
        dfs(0)
    finally:
        sys.setrecursionlimit(old_limit)
    if best_assignment is None:
        raise NumericError("hard constraints are infeasible")
    return best_assignment


# ---------------------------------------------------------------------------
# End-to-end joint prediction


@dataclass
class JointPrediction:
    doc_id: str
    # task -> mention -> active labels
    decisions: dict[str, dict[tuple[str, int], frozenset[str]]]


def infer_stories(rules: Sequence[Rule], stories: Sequence[StoryFeatures],
                  potentials: ParameterStore,
                  alignment: AlignTable | None = None,
                  polarity: PolarityGroups | None = None) -> list[JointPrediction]:
    """Ground, score, and solve MAP for each story."""
    out = []
    for story in stories:
        scorer = PotentialScorer(potentials, story)
        usable_rules = []
        for rule in rules:
            if rule.schema == "transition" and not scorer.has_transition(rule.task):
                warnings.warn(f"transition potential for '{rule.task}' missing; "
                              f"rule skipped")
                continue
            usable_rules.append(rule)
        graph_like = _StoryGraphView(story)
        program = ground_rules(usable_rules, graph_like, alignment, polarity)
        program = score_rules(program, scorer)
        assignment = map_inference(program)
        decisions: dict[str, dict[tuple[str, int], set[str]]] = {}
        for var, active in zip(program.variables, assignment):
            per_task = decisions.setdefault(var.task, {})
            per_task.setdefault(var.mention, set())
            if active:
                per_task[var.mention].add(var.label)
        out.append(JointPrediction(
            doc_id=story.doc_id,
            decisions={
                task: {m: frozenset(labs) for m, labs in per_task.items()}
                for task, per_task in decisions.items()
            }))
    return out


class _StoryGraphView:
    """Adapter exposing the node/mention structure ground_rules expects."""

    def __init__(self, story: StoryFeatures):
        self.doc_id = story.doc_id
        self.nodes = tuple(
            GraphNode(i, entity, sentence, (0, 1))
            for i, (entity, sentence) in enumerate(story.mentions)
        )


def count_hard_violations(predictions: Sequence[JointPrediction],
                          alignment: AlignTable,
                          polarity: PolarityGroups) -> int:
    """Independent audit of joint predictions against the hard constraints."""
    violations = 0
    for pred in predictions:
        maslow = pred.decisions.get("maslow", {})
        reiss = pred.decisions.get("reiss", {})
        plut = pred.decisions.get("plutchik", {})
        for mention in set(maslow) | set(reiss):
            for ml in maslow.get(mention, ()):
                for rl in reiss.get(mention, ()):
                    if not alignment.aligned(ml, rl):
                        violations += 1
        for mention, labels in plut.items():
            pos = labels & polarity.positive
            neg = labels & polarity.negative
            violations += len(pos) * len(neg)
    return violations
