import json
import os

from storygraph.cli import dispatch
from storygraph.corpus import TaskLabels, write_corpus
from storygraph.fixtures import cue_task_corpus, planted_rule_corpus


def _write(tmp_path, name, docs):
    path = tmp_path / name
    write_corpus(docs, path)
    return str(path)


def test_unknown_subcommand_usage_exit(capsys):
    assert dispatch(["frobnicate"]) == 1
    assert "usage error" in capsys.readouterr().err


def test_missing_flag_usage_exit():
    assert dispatch(["build-graph", "--input", "x"]) == 1


def test_build_graph_empty_corpus(tmp_path, capsys):
    src = tmp_path / "empty.jsonl"
    src.write_text("")
    out = tmp_path / "graphs.jsonl"
    assert dispatch(["build-graph", "--input", str(src), "--output", str(out)]) == 0
    assert out.read_text() == ""
    assert (tmp_path / "graphs.jsonl.manifest.json").exists()


def test_build_graph_missing_file_data_exit(tmp_path):
    assert dispatch(["build-graph", "--input", str(tmp_path / "nope.jsonl"),
                     "--output", str(tmp_path / "out")]) == 2


def test_build_graph_writes_graphs_and_manifest(tmp_path):
    src = _write(tmp_path, "corpus.jsonl", planted_rule_corpus(n_docs=3, seed=1))
    out = tmp_path / "graphs.jsonl"
    assert dispatch(["build-graph", "--input", src, "--output", str(out),
                     "--max-nodes", "60"]) == 0
    lines = [l for l in out.read_text().splitlines() if l]
    assert len(lines) == 3
    manifest = json.loads((tmp_path / "graphs.jsonl.manifest.json").read_text())
    assert src in manifest["inputs"]
    assert manifest["command"] == "build-graph"


def test_eval_prints_f1_75(tmp_path, capsys):
    # 3 TP, 1 FP, 1 FN over plutchik decisions
    docs = cue_task_corpus("plutchik", n_docs=2, seed=3)
    doc = docs[0]
    keys = [k for k, _ in doc.task_payload.node_labels]
    gold_sets = {
        keys[0]: frozenset({"joy"}),
        keys[1]: frozenset({"trust", "fear"}),
        keys[2]: frozenset({"anger"}),
    }
    payload = TaskLabels(task="plutchik", node_labels=tuple(
        (k, gold_sets.get(k, frozenset())) for k in keys))
    from dataclasses import replace
    gold_doc = replace(doc, task_payload=payload)
    gold = _write(tmp_path, "gold.jsonl", [gold_doc])

    decisions = {
        keys[0]: ["joy"],                  # TP
        keys[1]: ["trust", "fear"],        # TP, TP ... and gold anger missed
        keys[2]: ["sadness"],              # FP; anger -> FN
    }
    pred = tmp_path / "pred.jsonl"
    with open(pred, "w") as fh:
        for i, (entity, sent) in enumerate(keys):
            fh.write(json.dumps({
                "doc_id": gold_doc.doc_id, "task": "plutchik", "node_id": i,
                "entity": entity, "sentence": sent, "scores": {},
                "decisions": decisions.get((entity, sent), [])}) + "\n")
    code = dispatch(["--manifest", str(tmp_path / "m.json"),
                     "eval", "--pred", str(pred), "--gold", gold])
    assert code == 0
    out = capsys.readouterr().out
    assert "F1 75.00" in out


def test_pretrain_and_train_cli_round_trip(tmp_path, capsys):
    corpus = _write(tmp_path, "corpus.jsonl", planted_rule_corpus(n_docs=3, seed=2))
    ckpt = tmp_path / "pretrained"
    code = dispatch(["pretrain", "--objective", "link", "--corpus", corpus,
                     "--out", str(ckpt), "--seed", "7", "--epochs", "2",
                     "--embed-dim", "12", "--hidden-dim", "12",
                     "--batch-size", "32", "--lr", "1e-3"])
    assert code == 0
    assert (ckpt / "manifest.json").exists()

    train = _write(tmp_path, "train.jsonl", cue_task_corpus("plutchik", 4, seed=4))
    dev = _write(tmp_path, "dev.jsonl", cue_task_corpus("plutchik", 2, seed=5))
    out = tmp_path / "model"
    pred_out = tmp_path / "pred.jsonl"
    code = dispatch(["train", "--task", "plutchik", "--train", train,
                     "--dev", dev, "--test", dev, "--init", str(ckpt),
                     "--out", str(out), "--pred-out", str(pred_out),
                     "--seed", "3", "--epochs", "2", "--warmup-steps", "0",
                     "--embed-dim", "12", "--hidden-dim", "12",
                     "--batch-size", "32"])
    assert code == 0
    assert pred_out.exists()
    rows = [json.loads(l) for l in pred_out.read_text().splitlines() if l]
    assert all(r["task"] == "plutchik" for r in rows)
    # eval consumes the dump produced by train
    code = dispatch(["--manifest", str(tmp_path / "m2.json"),
                     "eval", "--pred", str(pred_out), "--gold", dev])
    assert code == 0
    assert "F1" in capsys.readouterr().out


def test_pretrain_requires_seed(tmp_path):
    corpus = _write(tmp_path, "c.jsonl", planted_rule_corpus(n_docs=1, seed=0))
    assert dispatch(["pretrain", "--objective", "link", "--corpus", corpus,
                     "--out", str(tmp_path / "x")]) == 1


def test_export_fixtures_kinds(tmp_path):
    out = tmp_path / "f.jsonl"
    assert dispatch(["export-fixtures", "--kind", "planted", "--out", str(out),
                     "--seed", "5"]) == 0
    from storygraph.corpus import load_corpus
    assert len(load_corpus(out)) == 50
    assert dispatch(["export-fixtures", "--kind", "bogus",
                     "--out", str(out)]) == 2


def test_export_fixtures_symbolic_writes_three_files(tmp_path):
    stem = tmp_path / "joint"
    assert dispatch(["export-fixtures", "--kind", "symbolic",
                     "--out", str(stem), "--seed", "1"]) == 0
    from storygraph.corpus import load_corpus
    for task in ("maslow", "reiss", "plutchik"):
        docs = load_corpus(f"{stem}.{task}.jsonl")
        assert all(d.task_payload.task == task for d in docs)


def test_analyze_dump_and_metrics(tmp_path, capsys):
    corpus = _write(tmp_path, "corpus.jsonl", planted_rule_corpus(n_docs=3, seed=6))
    ckpt = tmp_path / "ckpt"
    assert dispatch(["pretrain", "--objective", "link", "--corpus", corpus,
                     "--out", str(ckpt), "--seed", "1", "--epochs", "1",
                     "--embed-dim", "8", "--hidden-dim", "8",
                     "--batch-size", "16"]) == 0
    dump = tmp_path / "emb.tsv"
    assert dispatch(["analyze", "--ckpt", str(ckpt), "--corpus", corpus,
                     "--dump", str(dump)]) == 0
    from storygraph.metrics import load_embedding_dump
    rows = load_embedding_dump(dump)
    from storygraph.corpus import load_corpus
    from storygraph.graph import build_graph
    n_nodes = sum(len(build_graph(d).nodes) for d in load_corpus(corpus))
    assert len(rows) == n_nodes


def test_determinism_identical_artifacts(tmp_path):
    corpus = _write(tmp_path, "corpus.jsonl", planted_rule_corpus(n_docs=3, seed=9))
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert dispatch(["--manifest", str(tmp_path / f"{name}.manifest.json"),
                         "pretrain", "--objective", "link", "--corpus", corpus,
                         "--out", str(out), "--seed", "7", "--epochs", "2",
                         "--embed-dim", "12", "--hidden-dim", "12",
                         "--batch-size", "32"]) == 0
        outs.append(out)
    files_a = sorted(os.listdir(outs[0]))
    assert files_a == sorted(os.listdir(outs[1]))
    for fname in files_a:
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


def test_config_file_supplies_defaults_and_flags_override(tmp_path):
    corpus = _write(tmp_path, "c.jsonl", planted_rule_corpus(n_docs=2, seed=0))
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "seed": 7, "epochs": 1, "embed_dim": 8, "hidden_dim": 8,
        "batch_size": 16}))
    out = tmp_path / "ckpt"
    assert dispatch(["--config", str(config), "pretrain", "--objective", "link",
                     "--corpus", corpus, "--out", str(out)]) == 0
    manifest = json.loads((tmp_path / "ckpt.manifest.json").read_text())
    assert manifest["seed"] == 7
    assert manifest["flags"]["epochs"] == "1"
    # explicit flag wins over the config value
    out2 = tmp_path / "ckpt2"
    assert dispatch(["--config", str(config), "pretrain", "--objective", "link",
                     "--corpus", corpus, "--out", str(out2), "--seed", "9"]) == 0
    manifest2 = json.loads((tmp_path / "ckpt2.manifest.json").read_text())
    assert manifest2["seed"] == 9


def test_config_file_rejects_unknown_keys(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"frobnicate": 1}))
    assert dispatch(["--config", str(config), "eval", "--pred", "x",
                     "--gold", "y"]) == 2
