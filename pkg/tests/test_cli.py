"""End-to-end runs of the ebtree command line."""

import json

import pytest

from ebtree.cli import main
from ebtree.core_model import validate_tree
from ebtree.fileformats import load_embeddings, load_tree


@pytest.fixture()
def emb_file(tmp_path):
    path = tmp_path / "train.csv"
    rc = main(["gen", "--classes", "3", "--per-class", "40", "--sep", "6.0",
               "--seed", "0", "--out", str(path)])
    assert rc == 0
    return path


@pytest.fixture()
def tree_file(tmp_path, emb_file):
    path = tmp_path / "tree.json"
    rc = main(["build", "--embeddings", str(emb_file), "--out", str(path)])
    assert rc == 0
    return path


def test_gen_writes_loadable_embeddings(emb_file, capsys):
    dataset, preds = load_embeddings(emb_file)
    assert len(dataset) == 120
    assert dataset.dimension == 3
    assert set(preds.values()) <= {"c0", "c1", "c2"}


def test_gen_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        main(["gen", "--classes", "2", "--per-class", "15", "--out", str(out)])
    assert a.read_bytes() == b.read_bytes()


def test_build_produces_valid_tree(tmp_path, emb_file, capsys):
    out_path = tmp_path / "tree.json"
    assert main(["build", "--embeddings", str(emb_file),
                 "--out", str(out_path)]) == 0
    tree = load_tree(out_path)
    validate_tree(tree)
    assert tree.method == "eb-tree"
    out = capsys.readouterr().out
    assert "nodes=" in out and "training_points=120" in out


def test_build_same_seed_same_bytes(tmp_path, emb_file):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert main(["build", "--embeddings", str(emb_file),
                     "--out", str(out), "--seed", "5"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_build_baseline_method(tmp_path, emb_file):
    out = tmp_path / "base.json"
    assert main(["build", "--embeddings", str(emb_file), "--out", str(out),
                 "--baseline"]) == 0
    assert load_tree(out).method == "baseline"


def test_build_single_class_degrades_to_one_node(tmp_path):
    emb = tmp_path / "one.csv"
    emb.write_text("id,label,d0,d1\na,x,0.1,0.9\nb,x,0.2,0.8\n")
    out = tmp_path / "one.json"
    with pytest.warns(UserWarning):
        assert main(["build", "--embeddings", str(emb), "--out", str(out)]) == 0
    assert len(load_tree(out)) == 1


def test_classify_plain_and_explain(tmp_path, emb_file, tree_file, capsys):
    plain = tmp_path / "plain.jsonl"
    assert main(["classify", "--tree", str(tree_file), "--input", str(emb_file),
                 "--out", str(plain)]) == 0
    records = [json.loads(line) for line in plain.read_text().splitlines()]
    assert len(records) == 120
    assert set(records[0]) == {"query_id", "predicted_label"}

    full = tmp_path / "full.jsonl"
    assert main(["classify", "--tree", str(tree_file), "--input", str(emb_file),
                 "--explain", "--out", str(full)]) == 0
    record = json.loads(full.read_text().splitlines()[0])
    assert record["path"][0]["node_id"] == 0
    assert record["distance_evals"] >= 1
    # the two modes agree on the label
    assert record["predicted_label"] == records[0]["predicted_label"]


def test_fidelity_reports_agreement(emb_file, tree_file, capsys):
    assert main(["fidelity", "--tree", str(tree_file),
                 "--input", str(emb_file)]) == 0
    out = capsys.readouterr().out
    fields = dict(kv.split("=") for kv in out.split())
    assert float(fields["macro_f"]) > 0.9
    assert float(fields["micro_f"]) > 0.9
    assert 0.0 <= float(fields["error_rate"]) <= 1.0


@pytest.fixture()
def dense_tree_file(tmp_path):
    # overlapping clusters -> enough boundary structure for projections
    emb = tmp_path / "dense.csv"
    tree = tmp_path / "dense.json"
    assert main(["gen", "--classes", "3", "--per-class", "60", "--sep", "2.0",
                 "--seed", "1", "--out", str(emb)]) == 0
    assert main(["build", "--embeddings", str(emb), "--out", str(tree)]) == 0
    return tree


def test_project_writes_segment_and_dot(tmp_path, dense_tree_file, capsys):
    seg = tmp_path / "seg.json"
    dot = tmp_path / "seg.dot"
    assert main(["project", "--tree", str(dense_tree_file), "--class-a", "c1",
                 "--class-b", "c2", "--out", str(seg), "--dot", str(dot)]) == 0
    record = json.loads(seg.read_text())
    assert record["class_a"] == "c1"
    assert len(record["pairs"]) >= 2
    text = dot.read_text()
    assert text.startswith("digraph boundary_tree {")
    assert "color=red" in text


def test_project_order_by_margin(tmp_path, dense_tree_file):
    seg = tmp_path / "seg.json"
    assert main(["project", "--tree", str(dense_tree_file), "--class-a", "c1",
                 "--class-b", "c2", "--order-by-margin",
                 "--out", str(seg)]) == 0
    record = json.loads(seg.read_text())
    coords = record["ordering_coordinate"]
    assert coords == sorted(coords)


def test_export_dot_with_and_without_path(tmp_path, emb_file, tree_file):
    out = tmp_path / "t.dot"
    assert main(["export-dot", "--tree", str(tree_file), "--out", str(out)]) == 0
    assert "color=red" not in out.read_text()

    dataset, _ = load_embeddings(emb_file)
    some_id = dataset.points[0].id
    assert main(["export-dot", "--tree", str(tree_file), "--out", str(out),
                 "--path-for", some_id, "--input", str(emb_file)]) == 0
    assert out.read_text().count("n0 [") == 1


def test_export_dot_path_needs_input(tmp_path, tree_file, capsys):
    out = tmp_path / "t.dot"
    rc = main(["export-dot", "--tree", str(tree_file), "--out", str(out),
               "--path-for", "p00000"])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_export_dot_unknown_id(tmp_path, emb_file, tree_file, capsys):
    out = tmp_path / "t.dot"
    rc = main(["export-dot", "--tree", str(tree_file), "--out", str(out),
               "--path-for", "ghost", "--input", str(emb_file)])
    assert rc == 1
    assert "ghost" in capsys.readouterr().err


def test_detect_stream_end_to_end(tmp_path, emb_file, tree_file, capsys):
    stream = tmp_path / "stream.csv"
    # far-corner probes plus two training clones
    dataset, _ = load_embeddings(emb_file)
    rows = ["id,label,d0,d1,d2"]
    for i, p in enumerate(dataset.points[:2]):
        vals = ",".join(repr(float(v)) for v in p.embedding)
        rows.append(f"s{i},?,{vals}")
    rows.append("far0,?,-5.0,3.0,3.0")
    stream.write_text("\n".join(rows) + "\n")

    out = tmp_path / "verdicts.jsonl"
    assert main(["detect", "--tree", str(tree_file), "--train", str(emb_file),
                 "--stream", str(stream), "--out", str(out)]) == 0
    records = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(records) == 3
    by_id = {r["point_id"]: r for r in records}
    assert by_id["far0"]["is_novel"]
    console = capsys.readouterr().out
    assert "savings_ratio=" in console


def test_cli_reports_missing_file(tmp_path, capsys):
    rc = main(["build", "--embeddings", str(tmp_path / "nope.csv"),
               "--out", str(tmp_path / "t.json")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_cli_unknown_command_exits_nonzero():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
