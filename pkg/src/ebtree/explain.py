"""Human-facing views of a boundary tree.

Two artifacts: per-query explanations (the traversal path, plus the final
node's immediate family for side-by-side comparison) and boundary
projections (all tree edges between one pair of classes, arranged along the
boundary so adjacent entries are geometric neighbors).  Both reference
training points by id and source_ref; rendering actual sample content is
left to whatever tooling owns the underlying data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core_model import (
    BoundaryTree,
    EmbeddedPoint,
    TraversalPath,
    euclidean_distance,
    traverse,
)

__all__ = [
    "PathPoint",
    "FinalFamily",
    "Explanation",
    "BoundarySegment",
    "explain_prediction",
    "boundary_projection",
    "export_dot",
]


@dataclass
class PathPoint:
    """One tree node cited by an explanation."""

    node_id: int
    point_id: str
    label: str
    source_ref: Optional[str]
    distance: float


@dataclass
class FinalFamily:
    """The final node's parent and children — what the query is *not* closer to."""

    parent: Optional[PathPoint]
    children: list[PathPoint] = field(default_factory=list)


@dataclass
class Explanation:
    query_id: str
    predicted_label: str
    path: TraversalPath
    path_points: list[PathPoint]
    final_family: FinalFamily


def _cite(tree: BoundaryTree, node_id: int, query: np.ndarray) -> PathPoint:
    node = tree.nodes[node_id]
    return PathPoint(
        node_id=node_id,
        point_id=node.point.id,
        label=node.predicted_label,
        source_ref=node.point.source_ref,
        distance=euclidean_distance(tree.node_embedding(node_id), query),
    )


def explain_prediction(tree: BoundaryTree, query: EmbeddedPoint) -> Explanation:
    """Classify a query and package the traversal path as its explanation."""
    path = traverse(tree, query.embedding)
    q = np.asarray(query.embedding, dtype=np.float64)
    path_points = [
        PathPoint(
            node_id=nid,
            point_id=tree.nodes[nid].point.id,
            label=tree.nodes[nid].predicted_label,
            source_ref=tree.nodes[nid].point.source_ref,
            distance=dist,
        )
        for nid, dist in path.steps
    ]
    final = tree.nodes[path.final_node]
    family = FinalFamily(
        parent=None if final.parent is None else _cite(tree, final.parent, q),
        children=[_cite(tree, c, q) for c in final.children],
    )
    return Explanation(
        query_id=query.id,
        predicted_label=path.predicted_label,
        path=path,
        path_points=path_points,
        final_family=family,
    )


@dataclass
class BoundarySegment:
    """All tree edges between two classes, ordered along the boundary.

    ``pairs[i]`` is (node id labeled class_a, node id labeled class_b,
    edge length); ``ordering_coordinate[i]`` is the 1-D position the pair
    was sorted by; ``mislabeled[i]`` flags endpoints whose ground-truth
    label disagrees with the model's prediction (candidate labeling
    errors, in the spirit of the mislabeled-sample sweep).
    """

    class_a: str
    class_b: str
    pairs: list[tuple[int, int, float]] = field(default_factory=list)
    ordering_coordinate: list[float] = field(default_factory=list)
    mislabeled: list[tuple[bool, bool]] = field(default_factory=list)


def _principal_coordinate(midpoints: np.ndarray) -> np.ndarray:
    """Project midpoints onto their first principal component (sign-fixed)."""
    centered = midpoints - midpoints.mean(axis=0)
    if not np.any(centered):
        return np.zeros(len(midpoints))
    # right singular vectors of the centered cloud = principal axes
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    axis = vt[0]
    pivot = int(np.argmax(np.abs(axis)))
    if axis[pivot] < 0:
        axis = -axis
    return centered @ axis


def boundary_projection(
    tree: BoundaryTree,
    class_a: str,
    class_b: str,
    ordering: str = "pca",
) -> BoundarySegment:
    """Collect every class_a/class_b edge and arrange it along the boundary.

    ``ordering="pca"`` (default) sorts pairs by the projection of edge
    midpoints onto their first principal component; ``"boundary_distance"``
    sorts by the class_a endpoint's stored distance-to-hyperplane instead.
    """
    if class_a == class_b:
        raise ValueError("boundary projection needs two distinct classes")
    if ordering not in ("pca", "boundary_distance"):
        raise ValueError(f"unknown ordering {ordering!r}")
    present = {n.predicted_label for n in tree.nodes}
    for c in (class_a, class_b):
        if c not in present:
            raise ValueError(f"class {c!r} not present in tree")

    edges = []  # (a_node, b_node)
    for node in tree.nodes:
        if node.parent is None:
            continue
        parent = tree.nodes[node.parent]
        labels = {parent.predicted_label, node.predicted_label}
        if labels != {class_a, class_b}:
            continue
        a, b = (parent, node) if parent.predicted_label == class_a else (node, parent)
        edges.append((a, b))

    segment = BoundarySegment(class_a=class_a, class_b=class_b)
    if not edges:
        return segment

    emb_a = np.stack([tree.node_embedding(a.node_id) for a, _ in edges])
    emb_b = np.stack([tree.node_embedding(b.node_id) for _, b in edges])
    lengths = np.sqrt(((emb_a - emb_b) ** 2).sum(axis=1))
    if ordering == "pca":
        coords = _principal_coordinate((emb_a + emb_b) / 2.0)
    else:
        coords = []
        for a, _ in edges:
            if a.boundary_distance is None:
                raise ValueError(
                    "tree carries no boundary distances; use ordering='pca'")
            coords.append(a.boundary_distance)
        coords = np.asarray(coords)

    order = sorted(
        range(len(edges)),
        key=lambda i: (coords[i], edges[i][0].node_id, edges[i][1].node_id),
    )
    for i in order:
        a, b = edges[i]
        segment.pairs.append((a.node_id, b.node_id, float(lengths[i])))
        segment.ordering_coordinate.append(float(coords[i]))
        segment.mislabeled.append(
            (a.point.label != a.predicted_label,
             b.point.label != b.predicted_label)
        )
    return segment


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def export_dot(
    tree: BoundaryTree,
    explanation: Optional[Explanation] = None,
    highlight: Optional[set] = None,
) -> str:
    """Render the tree as Graphviz DOT text.

    Nodes are labeled ``point_id/predicted_label``; edges run parent to
    child.  Edges in ``highlight`` (a set of (parent_id, child_id)), or on
    the explanation's traversal path, come out with ``color=red``.  Output
    ordering follows node ids, so identical trees yield identical text.
    """
    marked = set(highlight or ())
    if explanation is not None:
        steps = [nid for nid, _ in explanation.path.steps]
        marked.update(zip(steps, steps[1:]))

    lines = ["digraph boundary_tree {"]
    for node in tree.nodes:
        label = _dot_escape(f"{node.point.id}/{node.predicted_label}")
        lines.append(f'  n{node.node_id} [label="{label}"];')
    for node in tree.nodes:
        if node.parent is None:
            continue
        attr = " [color=red]" if (node.parent, node.node_id) in marked else ""
        lines.append(f"  n{node.parent} -> n{node.node_id}{attr};")
    lines.append("}")
    return "\n".join(lines) + "\n"
