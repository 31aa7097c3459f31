"""Embedding CSV, canonical tree JSON, and JSONL record layouts."""

import json

import numpy as np
import pytest

from ebtree.core_model import LabeledDataset
from ebtree.errors import ParseError
from ebtree.explain import boundary_projection, explain_prediction
from ebtree.fileformats import (
    _format_float,
    dumps_tree,
    explanation_record,
    load_embeddings,
    load_tree,
    save_embeddings,
    save_tree,
    segment_record,
    verdict_record,
    write_jsonl,
)
from ebtree.margin_ranking import MarginFitConfig, fit_one_vs_all
from ebtree.novelty import NoveltyVerdict
from ebtree.stitching import BuildConfig, build_eb_tree, prediction_view

from conftest import pt, two_blob_dataset


def _built_tree():
    dataset = two_blob_dataset(n_per=30, seed=3)
    predictions = {p.id: p.label for p in dataset.points}
    planes = fit_one_vs_all(prediction_view(dataset, predictions),
                            MarginFitConfig(C=10.0))
    return build_eb_tree(dataset, predictions, planes, BuildConfig(seed=0))


# ----------------------------------------------------------- embedding CSV

def test_embeddings_round_trip(tmp_path):
    path = tmp_path / "emb.csv"
    dataset = LabeledDataset(points=[
        pt("q1", "a", [0.125, -3.5]),
        pt("q2", "b", [1 / 3, 1e-17]),
    ])
    preds = {"q1": "a", "q2": "a"}
    save_embeddings(dataset, preds, path)
    loaded, loaded_preds = load_embeddings(path)
    assert loaded_preds == preds
    for orig, back in zip(dataset.points, loaded.points):
        assert back.id == orig.id and back.label == orig.label
        np.testing.assert_array_equal(back.embedding, orig.embedding)
        assert back.source_ref == back.id


def test_embeddings_without_pred_column(tmp_path):
    path = tmp_path / "emb.csv"
    path.write_text("id,label,d0,d1\nx,cat,0.5,0.5\n")
    dataset, preds = load_embeddings(path)
    assert preds == {"x": "cat"}
    assert dataset["x"].label == "cat"


def test_embeddings_blank_trailing_line_ok(tmp_path):
    path = tmp_path / "emb.csv"
    path.write_text("id,label,d0,d1\nx,cat,0.5,0.5\n\n")
    dataset, _ = load_embeddings(path)
    assert len(dataset) == 1


@pytest.mark.parametrize("text,line", [
    ("", 1),
    ("nope,label,d0,d1\nx,a,1,2\n", 1),
    ("id,label,d0\nx,a,1\n", 1),
    ("id,label,d0,d7\nx,a,1,2\n", 1),
    ("id,label,pred,d0,dX\nx,a,a,1,2\n", 1),
    ("id,label,d0,d1\nx,a,1\n", 2),
    ("id,label,d0,d1\nx,a,1,2\nx,b,3,4\n", 3),
    ("id,label,d0,d1\nx,,1,2\n", 2),
    ("id,label,d0,d1\nx,a,1,zebra\n", 2),
    ("id,label,d0,d1\nx,a,1,nan\n", 2),
    ("id,label,d0,d1\nx,a,1,inf\n", 2),
    ("id,label,d0,d1\n", 2),
])
def test_embeddings_parse_errors_carry_line_numbers(tmp_path, text, line):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ParseError) as info:
        load_embeddings(path)
    assert f"line {line}:" in str(info.value)


# ---------------------------------------------------------- float formats

@pytest.mark.parametrize("x", [
    0.0, 1.0, -1.0, 0.1, 1 / 3, 2 / 3, 1e-17, 1e17, 123456.789,
    5e-324, 1.7976931348623157e308, -0.4999999999999999,
])
def test_float_format_round_trips_exactly(x):
    assert float(_format_float(x)) == x


def test_float_format_keeps_floats_typed():
    assert _format_float(1.0) == "1.0"
    assert _format_float(-2.0) == "-2.0"
    assert json.loads(_format_float(3.0)) == 3.0
    assert isinstance(json.loads(_format_float(3.0)), float)


# ---------------------------------------------------------------- tree JSON

def test_tree_json_round_trip_is_byte_identical(tmp_path, tiny_tree):
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_tree(tiny_tree, p1)
    save_tree(load_tree(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_built_tree_round_trip_preserves_everything(tmp_path):
    tree = _built_tree()
    path = tmp_path / "t.json"
    save_tree(tree, path)
    back = load_tree(path)
    assert dumps_tree(back) == dumps_tree(tree)
    assert back.method == tree.method
    assert back.build_config == tree.build_config.to_dict()
    assert back.provenance == tree.provenance
    for a, b in zip(tree.nodes, back.nodes):
        assert a.predicted_label == b.predicted_label
        assert a.children == b.children
        assert a.boundary_distance == b.boundary_distance
        np.testing.assert_array_equal(a.point.embedding, b.point.embedding)


def test_tree_document_is_single_sorted_line(tiny_tree):
    text = dumps_tree(tiny_tree)
    assert text.endswith("\n") and text.count("\n") == 1
    doc = json.loads(text)
    assert list(doc) == sorted(doc)
    assert doc["root"] == 0
    assert len(doc["nodes"]) == 4


def _tamper(tmp_path, tree, mutate):
    doc = json.loads(dumps_tree(tree))
    mutate(doc)
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ParseError):
        load_tree(path)


def test_tree_load_rejects_tampering(tmp_path, tiny_tree):
    def bad_version(doc):
        doc["format_version"] = 99

    def sparse_ids(doc):
        doc["nodes"][2]["node_id"] = 7

    def wrong_children(doc):
        doc["nodes"][0]["children"] = [2, 1]

    def wrong_root(doc):
        doc["root"] = 1

    def missing_field(doc):
        del doc["nodes"][1]["pred"]

    def broken_crossing(doc):
        doc["nodes"][1]["pred"] = doc["nodes"][0]["pred"]

    for mutate in (bad_version, sparse_ids, wrong_children, wrong_root,
                   missing_field, broken_crossing):
        _tamper(tmp_path, tiny_tree, mutate)


def test_tree_load_invalid_json(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        load_tree(path)


# ------------------------------------------------------------------- JSONL

def test_explanation_record_layout(tiny_tree):
    record = explanation_record(explain_prediction(tiny_tree, pt("q", "?", [2.2, 0.0])))
    assert record["query_id"] == "q"
    assert record["predicted_label"] == "B"
    assert [p["node_id"] for p in record["path"]] == [0, 1]
    assert record["path"][-1]["source_ref"] == "raw/c1"
    fam = record["final_family"]
    assert fam["parent"]["node_id"] == 0
    assert [c["node_id"] for c in fam["children"]] == [3]
    assert record["distance_evals"] == 4


def test_verdict_record_layout():
    v = NoveltyVerdict(point_id="s1", final_node=2, p_value=0.25, alpha=0.5,
                       is_novel=False, support=8, insufficient_support=False,
                       distance_evals=11)
    assert verdict_record(v) == {
        "point_id": "s1", "final_node": 2, "p_value": 0.25, "alpha": 0.5,
        "is_novel": False, "support": 8, "insufficient_support": False,
        "distance_evals": 11,
    }


def test_segment_record_layout():
    tree = _built_tree()
    record = segment_record(boundary_projection(tree, "a", "b"))
    assert record["class_a"] == "a" and record["class_b"] == "b"
    for a, b, length in record["pairs"]:
        assert isinstance(a, int) and isinstance(b, int) and length > 0
    assert len(record["ordering_coordinate"]) == len(record["pairs"])
    for flags in record["mislabeled"]:
        assert len(flags) == 2


def test_write_jsonl(tmp_path):
    path = tmp_path / "r.jsonl"
    records = [{"b": 1, "a": [1.5, None]}, {"z": True}]
    write_jsonl(records, path)
    lines = path.read_text().splitlines()
    assert lines == ['{"a":[1.5,null],"b":1}', '{"z":true}']
    assert [json.loads(line) for line in lines] == records
