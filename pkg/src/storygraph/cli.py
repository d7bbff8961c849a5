"""Command-line entry point.

Subcommands cover the whole pipeline: build-graph, pretrain, train,
train-potentials, infer, eval, analyze, export-fixtures. Every run writes a
manifest recording the package version, seed, resolved flags, and input file
digests. Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from importlib.resources import files as package_files

import numpy as np

from . import __version__
from . import fixtures, inference, metrics, training
from .corpus import (DEFAULT_LEXICON, load_corpus, load_lexicon,
                     task_vocabulary, write_corpus)
from .encoding import load_external_embeddings
from .errors import DataError, NumericError, StorygraphError
from .graph import DEFAULT_MAX_NODES, build_graph, load_graphs, write_graphs
from .training import ModelConfig, TrainConfig


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _sha256(path) -> str:
    digest = hashlib.sha256()
    if os.path.isdir(path):
        for name in sorted(os.listdir(path)):
            sub = os.path.join(path, name)
            if os.path.isfile(sub):
                digest.update(name.encode())
                digest.update(bytes.fromhex(_sha256(sub)))
        return digest.hexdigest()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(args, input_paths: list, default_stem: str) -> None:
    flags = {k: v for k, v in sorted(vars(args).items())
             if k not in ("func", "manifest")}
    manifest = {
        "version": __version__,
        "command": args.command,
        "seed": getattr(args, "seed", None),
        "flags": {k: str(v) if v is not None else None for k, v in flags.items()},
        "inputs": {str(p): _sha256(p) for p in input_paths if p and os.path.exists(p)},
    }
    path = args.manifest or f"{default_stem}.manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


def _data_path(name: str) -> str:
    return str(package_files("storygraph.data").joinpath(name))


def _model_config(args) -> ModelConfig:
    external = getattr(args, "embeddings", None) is not None
    return ModelConfig(
        embed_dim=args.embed_dim,
        hidden_dim=args.hidden_dim,
        rgcn_layers=args.rgcn_layers,
        max_nodes=args.max_nodes,
        encoder="external" if external else "bag",
        external_dim=getattr(args, "_external_dim", None),
    )


def _add_model_flags(parser) -> None:
    parser.add_argument("--embed-dim", type=int, default=128, dest="embed_dim")
    parser.add_argument("--hidden-dim", type=int, default=128, dest="hidden_dim")
    parser.add_argument("--rgcn-layers", type=int, default=2, dest="rgcn_layers")
    parser.add_argument("--max-nodes", type=int, default=DEFAULT_MAX_NODES,
                        dest="max_nodes")
    parser.add_argument("--embeddings", default=None,
                        help="external embedding exchange file (replaces the bag encoder)")


def _load_external(args, docs):
    if getattr(args, "embeddings", None) is None:
        return None
    expected = set()
    for doc in docs:
        graph = build_graph(doc, args.max_nodes)
        expected.update((doc.doc_id, n.node_id) for n in graph.nodes)
    table = load_external_embeddings(args.embeddings, expected)
    args._external_dim = table.dim
    return table


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_build_graph(args) -> int:
    docs = load_corpus(args.input)
    graphs = [build_graph(doc, args.max_nodes) for doc in docs]
    write_graphs(graphs, args.output)
    _write_manifest(args, [args.input], args.output)
    print(f"wrote {len(graphs)} graphs to {args.output}")
    return 0


def _cmd_pretrain(args) -> int:
    docs = load_corpus(args.corpus)
    if args.graphs:
        graphs = load_graphs(args.graphs)
    else:
        graphs = [build_graph(doc, args.max_nodes) for doc in docs]
    external = _load_external(args, docs)
    config = TrainConfig(
        objective=args.objective, lr=args.lr, batch_size=args.batch_size,
        epochs=args.epochs, warmup_proportion=args.warmup_proportion,
        seed=args.seed, sample_rate=args.sample_rate,
        mask_sampled_edges=args.mask_sampled_edges,
    )
    model_config = _model_config(args)
    if args.objective == "link":
        model, history = training.pretrain_link(docs, graphs, config,
                                                model_config, external)
    else:
        lexicon = load_lexicon(args.lexicon) if args.lexicon else DEFAULT_LEXICON
        model, history = training.pretrain_sentiment(docs, graphs, lexicon,
                                                     config, model_config, external)
    training.save_checkpoint(model, history, args.out)
    _write_manifest(args, [args.corpus, args.graphs, args.embeddings], args.out)
    print(f"pre-trained '{args.objective}' for {len(history)} epochs; "
          f"final loss {history[-1].loss:.4f}; checkpoint at {args.out}")
    return 0


def _cmd_train(args) -> int:
    train_docs = load_corpus(args.train)
    dev_docs = load_corpus(args.dev) if args.dev else []
    external = _load_external(args, train_docs + dev_docs)
    init = None
    if args.init:
        init, _ = training.load_checkpoint(args.init)
    config = TrainConfig(
        objective=args.task, lr=args.lr, batch_size=args.batch_size,
        epochs=args.epochs, warmup_steps=args.warmup_steps,
        warmup_proportion=None, patience=args.patience, seed=args.seed,
    )
    model, history = training.train_downstream(
        args.task, train_docs, dev_docs, config, _model_config(args),
        init=init, external=external)
    training.save_checkpoint(model, history, args.out)
    best = max((h.metric for h in history if h.metric is not None), default=None)
    print(f"trained '{args.task}' for {len(history)} epochs"
          + (f"; best validation metric {best:.2f}" if best is not None else ""))
    if args.test:
        test_docs = load_corpus(args.test)
        if args.task == "desire":
            report = training.evaluate_document_task(model, test_docs, external)
        else:
            report = training.evaluate_node_task(model, test_docs, external)
        _print_report(report, args.task)
    if args.pred_out:
        _write_predictions(model, args, external)
    _write_manifest(args, [args.train, args.dev, args.test, args.init,
                           args.embeddings], args.out)
    return 0


def _write_predictions(model, args, external) -> None:
    docs = load_corpus(args.test or args.dev or args.train)
    with open(args.pred_out, "w", encoding="utf-8") as fh:
        if args.task == "desire":
            for p in training.predict_documents(model, docs, external):
                fh.write(json.dumps({
                    "doc_id": p.doc_id, "task": "desire",
                    "scores": p.scores, "decision": p.decision}) + "\n")
        else:
            for p in training.predict_nodes(model, docs, external):
                fh.write(json.dumps({
                    "doc_id": p.doc_id, "task": args.task, "node_id": p.node_id,
                    "entity": p.entity, "sentence": p.sentence,
                    "scores": p.scores, "decisions": sorted(p.decisions)}) + "\n")


def _cmd_train_potentials(args) -> int:
    model, _ = training.load_checkpoint(args.ckpt)
    tasks = [t.strip() for t in args.tasks.split(",") if t.strip()]
    train_by_task = _parse_task_files(args.train, tasks, "--train")
    dev_by_task = _parse_task_files(args.dev or [], tasks, "--dev", required=False)
    store = model.store
    config = inference.PotentialConfig(lr=args.lr, patience=args.patience,
                                       epochs=args.epochs, seed=args.seed)
    for task in tasks:
        train_stories = inference.story_features(
            model, load_corpus(train_by_task[task]), [task])
        dev_path = dev_by_task.get(task)
        dev_stories = (inference.story_features(model, load_corpus(dev_path), [task])
                       if dev_path else train_stories)
        inference.train_potentials(train_stories, dev_stories, [task], config,
                                   store=store,
                                   with_transitions=not args.no_transitions)
    training.save_checkpoint(model, [], args.out)
    _write_manifest(args, [args.ckpt] + list(train_by_task.values()), args.out)
    print(f"trained potentials for {', '.join(tasks)}; checkpoint at {args.out}")
    return 0


def _parse_task_files(entries, tasks, flag, required=True) -> dict[str, str]:
    out = {}
    for entry in entries:
        if "=" not in entry:
            raise DataError(f"{flag} expects TASK=PATH, got '{entry}'")
        task, path = entry.split("=", 1)
        if task not in tasks:
            raise DataError(f"{flag}: task '{task}' not listed in --tasks")
        out[task] = path
    if required:
        missing = [t for t in tasks if t not in out]
        if missing:
            raise DataError(f"{flag} missing for tasks: {', '.join(missing)}")
    return out


def _cmd_infer(args) -> int:
    model, _ = training.load_checkpoint(args.ckpt)
    with open(args.symbolic, encoding="utf-8") as fh:
        rules = inference.parse_rules(fh.read())
    alignment = inference.load_alignment(args.alignment or _data_path("alignment.json"))
    polarity = inference.load_polarity(args.polarity or _data_path("polarity.json"))
    docs = load_corpus(args.input)
    tasks = sorted({r.task for r in rules if r.task})
    stories = inference.story_features(model, docs, tasks)
    predictions = inference.infer_stories(rules, stories, model.store,
                                          alignment, polarity)
    with open(args.out, "w", encoding="utf-8") as fh:
        for pred in predictions:
            fh.write(json.dumps({
                "doc_id": pred.doc_id,
                "decisions": {
                    task: [
                        {"entity": entity, "sentence": sentence,
                         "labels": sorted(labels)}
                        for (entity, sentence), labels in sorted(per.items())
                    ]
                    for task, per in sorted(pred.decisions.items())
                },
            }) + "\n")
    violations = inference.count_hard_violations(predictions, alignment, polarity)
    _write_manifest(args, [args.ckpt, args.symbolic, args.input], args.out)
    print(f"inferred {len(predictions)} stories; hard-constraint violations: "
          f"{violations}")
    return 0


def _cmd_eval(args) -> int:
    gold_docs = load_corpus(args.gold)
    rows = []
    with open(args.pred, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    if not rows:
        raise DataError(f"{args.pred}: no prediction rows")
    task = rows[0].get("task")
    labels = task_vocabulary(task)
    if task == "desire":
        pred_by_doc = {r["doc_id"]: r["decision"] for r in rows}
        pairs = []
        for doc in gold_docs:
            if doc.task_payload is None:
                continue
            pred = pred_by_doc.get(doc.doc_id)
            pairs.append((frozenset({doc.task_payload.doc_label}),
                          frozenset({pred}) if pred else frozenset()))
    else:
        pred_by_key = {
            (r["doc_id"], r["entity"], r["sentence"]): frozenset(r["decisions"])
            for r in rows
        }
        pairs = []
        for doc in gold_docs:
            if doc.task_payload is None or doc.task_payload.task != task:
                continue
            for (entity, sent), gold in doc.task_payload.node_labels:
                pred = pred_by_key.get((doc.doc_id, entity, sent), frozenset())
                pairs.append((gold, pred))
    if not pairs:
        raise DataError("no aligned prediction/gold pairs")
    report = metrics.prf1(pairs, labels)
    _print_report(report, task, macro=args.macro)
    _write_manifest(args, [args.pred, args.gold], "storygraph-eval")
    return 0


def _print_report(report: metrics.MetricsReport, task: str, macro: bool = False) -> None:
    print(f"task: {task}")
    print(f"{'label':>16}  {'precision':>9}  {'recall':>9}  {'f1':>9}")
    for label, (p, r, f) in report.per_label.items():
        print(f"{label:>16}  {p:9.2f}  {r:9.2f}  {f:9.2f}")
    p, r, f = report.micro
    print(f"{'micro':>16}  {p:9.2f}  {r:9.2f}  {f:9.2f}")
    p, r, f = report.macro
    print(f"{'macro':>16}  {p:9.2f}  {r:9.2f}  {f:9.2f}")
    chosen = report.macro if macro else report.micro
    print(f"F1 {chosen[2]:.2f}")


def _cmd_analyze(args) -> int:
    model, _ = training.load_checkpoint(args.ckpt)
    docs = load_corpus(args.corpus)
    tags = {}
    if args.tags:
        with open(args.tags, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    row = json.loads(line)
                    tags[(row["doc_id"], int(row["node_id"]))] = (
                        row.get("verb", ""), row.get("label", ""))
    rows = []
    for doc in docs:
        graph = build_graph(doc, model.config.max_nodes)
        if not graph.nodes:
            continue
        emb = training.node_embeddings(model, doc, graph)
        for node, vec in zip(graph.nodes, emb):
            verb, label = tags.get((doc.doc_id, node.node_id), ("", ""))
            rows.append((doc.doc_id, node.node_id, verb, label, vec))
    metrics.write_embedding_dump(rows, args.dump)
    print(f"dumped {len(rows)} embeddings to {args.dump}")
    rng = np.random.default_rng(args.seed)
    for name, idx in (("verb", 2), ("label", 3)):
        tagged = [(row[4], row[idx]) for row in rows if row[idx]]
        if len(tagged) >= args.kmeans_k * args.folds:
            vectors = np.stack([v for v, _ in tagged])
            labels = [t for _, t in tagged]
            pur = metrics.cluster_purity(vectors, labels, args.kmeans_k,
                                         args.folds, rng)
            acc = metrics.knn_classify(vectors, labels, args.knn_k, args.folds)
            print(f"{name}: cluster purity {pur:.4f}, knn accuracy {acc:.4f}")
    _write_manifest(args, [args.ckpt, args.corpus, args.tags], args.dump)
    return 0


def _cmd_export_fixtures(args) -> int:
    if args.kind == "symbolic":
        per_task = fixtures.symbolic_corpus(seed=args.seed)
        for task, docs in per_task.items():
            path = f"{args.out}.{task}.jsonl"
            write_corpus(docs, path)
            print(f"wrote {len(docs)} documents to {path}")
    else:
        if args.kind not in fixtures.FIXTURE_KINDS:
            raise DataError(
                f"unknown fixture kind '{args.kind}'; choose from "
                f"{', '.join(sorted(fixtures.FIXTURE_KINDS))}, symbolic")
        docs = fixtures.FIXTURE_KINDS[args.kind](args.seed)
        write_corpus(docs, args.out)
        print(f"wrote {len(docs)} documents to {args.out}")
    _write_manifest(args, [], str(args.out))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> tuple[_Parser, list[argparse.ArgumentParser]]:
    parser = _Parser(prog="storygraph",
                     description="entity-based narrative graph pipeline")
    parser.add_argument("--manifest", default=None,
                        help="run manifest path (default: <out>.manifest.json)")
    parser.add_argument("--config", default=None,
                        help="JSON file of flag defaults; explicit flags override")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = []

    p = sub.add_parser("build-graph", help="corpus -> narrative graph dump")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--max-nodes", type=int, default=DEFAULT_MAX_NODES,
                   dest="max_nodes")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_build_graph)
    subparsers.append(p)

    p = sub.add_parser("pretrain", help="link or sentiment pre-training")
    p.add_argument("--objective", choices=("link", "sentiment"), required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--graphs", default=None,
                   help="graph dump (default: build from the corpus)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=256, dest="batch_size")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--warmup-proportion", type=float, default=0.06,
                   dest="warmup_proportion")
    p.add_argument("--sample-rate", type=float, default=0.2, dest="sample_rate")
    p.add_argument("--mask-sampled-edges", action="store_true",
                   dest="mask_sampled_edges")
    p.add_argument("--lexicon", default=None)
    _add_model_flags(p)
    p.set_defaults(func=_cmd_pretrain)
    subparsers.append(p)

    p = sub.add_parser("train", help="downstream task training")
    p.add_argument("--task", choices=("maslow", "reiss", "plutchik", "desire"),
                   required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", default=None)
    p.add_argument("--test", default=None)
    p.add_argument("--init", default=None, help="pre-training checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--pred-out", default=None, dest="pred_out")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--batch-size", type=int, default=256, dest="batch_size")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--warmup-steps", type=int, default=5000, dest="warmup_steps")
    p.add_argument("--patience", type=int, default=10)
    _add_model_flags(p)
    p.set_defaults(func=_cmd_train)
    subparsers.append(p)

    p = sub.add_parser("train-potentials",
                       help="fit rule potentials over frozen embeddings")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--tasks", required=True, help="comma-separated task list")
    p.add_argument("--train", action="append", required=True,
                   help="TASK=PATH, repeatable")
    p.add_argument("--dev", action="append", default=None, help="TASK=PATH")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--epochs", type=int, default=inference.POTENTIAL_EPOCHS)
    p.add_argument("--no-transitions", action="store_true", dest="no_transitions")
    p.set_defaults(func=_cmd_train_potentials)
    subparsers.append(p)

    p = sub.add_parser("infer", help="joint symbolic MAP inference")
    p.add_argument("--symbolic", required=True, help="rule file")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alignment", default=None)
    p.add_argument("--polarity", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_infer)
    subparsers.append(p)

    p = sub.add_parser("eval", help="score a prediction dump against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--macro", action="store_true")
    p.set_defaults(func=_cmd_eval)
    subparsers.append(p)

    p = sub.add_parser("analyze", help="embedding dump + purity/KNN analysis")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--dump", required=True)
    p.add_argument("--tags", default=None)
    p.add_argument("--kmeans-k", type=int, default=5, dest="kmeans_k")
    p.add_argument("--knn-k", type=int, default=5, dest="knn_k")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_analyze)
    subparsers.append(p)

    p = sub.add_parser("export-fixtures", help="write synthetic fixture corpora")
    p.add_argument("--kind", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_export_fixtures)
    subparsers.append(p)

    return parser, subparsers


def _apply_config(path: str, parser: _Parser,
                  subparsers: list[argparse.ArgumentParser]) -> None:
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(config, dict):
        raise DataError(f"config {path} must be a JSON object of flag defaults")
    known = {a.dest for p in [parser, *subparsers] for a in p._actions}
    unknown = set(config) - known
    if unknown:
        raise DataError(f"config {path}: unknown flags {sorted(unknown)}")
    for p in [parser, *subparsers]:
        for action in p._actions:
            if action.dest in config:
                action.default = config[action.dest]
                action.required = False


def dispatch(argv=None) -> int:
    parser, subparsers = build_parser()
    try:
        raw = list(sys.argv[1:]) if argv is None else list(argv)
        if "--config" in raw:
            config_path = raw[raw.index("--config") + 1]
            _apply_config(config_path, parser, subparsers)
        args = parser.parse_args(raw)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except StorygraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
