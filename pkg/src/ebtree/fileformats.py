"""On-disk formats: embedding CSV, tree JSON, and JSONL record streams.

The tree document is written through a small canonical serializer (sorted
keys, fixed float formatting at 17 significant digits) so that load → save
reproduces the file byte for byte; that property is what makes "same
inputs, same seed, same artifact" checkable with a plain file compare.
"""

from __future__ import annotations

import csv
import json
import math
from typing import Optional

import numpy as np

from .core_model import BoundaryTree, EmbeddedPoint, LabeledDataset
from .errors import ParseError
from .explain import BoundarySegment, Explanation
from .novelty import NoveltyVerdict

__all__ = [
    "load_embeddings",
    "save_embeddings",
    "load_tree",
    "save_tree",
    "dumps_tree",
    "explanation_record",
    "verdict_record",
    "segment_record",
    "write_jsonl",
]

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# embedding CSV

def _parse_header(header: list[str]) -> tuple[bool, int]:
    """Validate `id,label[,pred],d0..d{D-1}`; return (has_pred, dimension)."""
    if len(header) < 2 or header[0] != "id" or header[1] != "label":
        raise ParseError("header must start with 'id,label'", line=1)
    has_pred = len(header) > 2 and header[2] == "pred"
    dims = header[3:] if has_pred else header[2:]
    if len(dims) < 2:
        raise ParseError("need at least two embedding columns d0,d1", line=1)
    for i, name in enumerate(dims):
        if name != f"d{i}":
            raise ParseError(
                f"embedding column {i} must be named 'd{i}', got {name!r}",
                line=1,
            )
    return has_pred, len(dims)


def load_embeddings(path) -> tuple[LabeledDataset, dict]:
    """Read an embedding CSV; returns (dataset, predictions by point id).

    When the optional ``pred`` column is absent the label doubles as the
    prediction.  Raises ParseError (with a line number) on a malformed
    header, ragged rows, duplicate ids, or non-finite values.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        has_pred, dim = _parse_header([h.strip() for h in header])
        width = len(header)

        points, predictions = [], {}
        seen = set()
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue  # blank trailing line
            if len(row) != width:
                raise ParseError(
                    f"expected {width} columns, got {len(row)}", line=line_no)
            pid = row[0]
            if pid in seen:
                raise ParseError(f"duplicate id {pid!r}", line=line_no)
            seen.add(pid)
            label = row[1]
            pred = row[2] if has_pred else label
            if not pid or not label or not pred:
                raise ParseError("empty id or label", line=line_no)
            try:
                values = [float(v) for v in (row[3:] if has_pred else row[2:])]
            except ValueError as exc:
                raise ParseError(str(exc), line=line_no) from None
            if not all(math.isfinite(v) for v in values):
                raise ParseError("non-finite embedding value", line=line_no)
            points.append(EmbeddedPoint(
                id=pid, label=label,
                embedding=np.array(values, dtype=np.float64),
                source_ref=pid,
            ))
            predictions[pid] = pred
        if not points:
            raise ParseError("no data rows", line=2)
    return LabeledDataset(points), predictions


def save_embeddings(dataset: LabeledDataset, predictions: Optional[dict],
                    path) -> None:
    """Write the embedding CSV; with predictions=None, label doubles as pred."""
    dim = dataset.dimension
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["id", "label"]
        if predictions is not None:
            header.append("pred")
        writer.writerow(header + [f"d{i}" for i in range(dim)])
        for p in dataset.points:
            row = [p.id, p.label]
            if predictions is not None:
                row.append(predictions[p.id])
            writer.writerow(row + [repr(float(v)) for v in p.embedding])


# ---------------------------------------------------------------------------
# canonical JSON

def _format_float(x: float) -> str:
    text = f"{x:.17g}"
    if not any(c in text for c in ".e"):
        text += ".0"  # keep the value typed as a float on reload
    return text


def _canon(obj) -> str:
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=True)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError("non-finite float in tree document")
        return _format_float(obj)
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_canon(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = sorted(obj.items())
        return "{" + ",".join(
            f"{json.dumps(k, ensure_ascii=True)}:{_canon(v)}" for k, v in items
        ) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# ---------------------------------------------------------------------------
# tree JSON

def _tree_document(tree: BoundaryTree) -> dict:
    cfg = tree.build_config
    if cfg is not None and hasattr(cfg, "to_dict"):
        cfg = cfg.to_dict()
    nodes = []
    for node in tree.nodes:
        nodes.append({
            "node_id": node.node_id,
            "id": node.point.id,
            "label": node.point.label,
            "pred": node.predicted_label,
            "source_ref": node.point.source_ref,
            "embedding": [float(v) for v in node.point.embedding],
            "parent": node.parent,
            "children": list(node.children),
            "boundary_distance": (None if node.boundary_distance is None
                                  else float(node.boundary_distance)),
        })
    return {
        "format_version": FORMAT_VERSION,
        "dimension": tree.dimension,
        "method": tree.method,
        "build_config": cfg,
        "nodes": nodes,
        "root": tree.root,
        "provenance": tree.provenance,
    }


def dumps_tree(tree: BoundaryTree) -> str:
    """Serialize a tree to its canonical one-line JSON form."""
    return _canon(_tree_document(tree)) + "\n"


def save_tree(tree: BoundaryTree, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_tree(tree))


def load_tree(path) -> BoundaryTree:
    """Load a tree document, replaying insertions to revalidate structure."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", line=exc.lineno) from None
    try:
        version = doc["format_version"]
        if version != FORMAT_VERSION:
            raise ParseError(f"unsupported format_version {version!r}")
        tree = BoundaryTree(
            dimension=doc["dimension"],
            build_config=doc["build_config"],
            provenance=doc["provenance"],
            method=doc["method"],
        )
        nodes = sorted(doc["nodes"], key=lambda n: n["node_id"])
        for expected, raw in enumerate(nodes):
            if raw["node_id"] != expected:
                raise ParseError(f"node ids not dense at {raw['node_id']}")
            point = EmbeddedPoint(
                id=raw["id"],
                label=raw["label"],
                embedding=np.array(raw["embedding"], dtype=np.float64),
                source_ref=raw["source_ref"],
            )
            if raw["parent"] is None:
                tree.insert_root(point, predicted_label=raw["pred"],
                                 boundary_distance=raw["boundary_distance"])
            else:
                tree.insert_child(raw["parent"], point,
                                  predicted_label=raw["pred"],
                                  boundary_distance=raw["boundary_distance"])
        # children lists are re-derived from parent links during the replay;
        # any disagreement means the document was edited inconsistently
        for raw in nodes:
            if raw["children"] != tree.nodes[raw["node_id"]].children:
                raise ParseError(
                    f"node {raw['node_id']}: children field disagrees with "
                    f"parent links")
        if doc["root"] != tree.root:
            raise ParseError(f"root must be node 0, got {doc['root']}")
    except KeyError as exc:
        raise ParseError(f"missing field {exc.args[0]!r}") from None
    except (ValueError, TypeError, IndexError) as exc:
        raise ParseError(str(exc)) from None
    return tree


# ---------------------------------------------------------------------------
# JSONL records

def _round_trip_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def explanation_record(expl: Explanation) -> dict:
    """Flatten an Explanation into its stable JSONL field layout."""
    def cite(p):
        return {
            "node_id": p.node_id,
            "point_id": p.point_id,
            "label": p.label,
            "source_ref": p.source_ref,
            "distance": p.distance,
        }

    family = expl.final_family
    return {
        "query_id": expl.query_id,
        "predicted_label": expl.predicted_label,
        "path": [cite(p) for p in expl.path_points],
        "final_family": {
            "parent": None if family.parent is None else cite(family.parent),
            "children": [cite(c) for c in family.children],
        },
        "distance_evals": expl.path.distance_evals,
    }


def verdict_record(verdict: NoveltyVerdict) -> dict:
    return {
        "point_id": verdict.point_id,
        "final_node": verdict.final_node,
        "p_value": verdict.p_value,
        "alpha": verdict.alpha,
        "is_novel": verdict.is_novel,
        "support": verdict.support,
        "insufficient_support": verdict.insufficient_support,
        "distance_evals": verdict.distance_evals,
    }


def segment_record(segment: BoundarySegment) -> dict:
    return {
        "class_a": segment.class_a,
        "class_b": segment.class_b,
        "pairs": [[a, b, length] for a, b, length in segment.pairs],
        "ordering_coordinate": list(segment.ordering_coordinate),
        "mislabeled": [[bool(a), bool(b)] for a, b in segment.mislabeled],
    }


def write_jsonl(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(_round_trip_json(record) + "\n")
