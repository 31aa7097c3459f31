"""Embedded points, boundary trees, and the greedy traversal.

Everything downstream (stitching, explanations, novelty detection) runs on
the types defined here.  A boundary tree is a rooted tree of training points
in which every parent/child edge crosses a decision boundary; queries descend
greedily toward strictly closer nodes and take the label of the node they
stop at.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DimensionError

__all__ = [
    "EmbeddedPoint",
    "LabeledDataset",
    "TreeNode",
    "BoundaryTree",
    "TraversalPath",
    "euclidean_distance",
    "traverse",
    "classify",
    "validate_tree",
]


@dataclass(eq=False)
class EmbeddedPoint:
    """One sample in the model-transformed space.

    The embedding is by convention a softmax output (components in [0, 1]
    summing to ~1) but any finite real vector is accepted; nothing here
    assumes simplex membership.

    Attributes
    ----------
    id : str
        Unique identifier within a dataset.
    label : str
        Class identifier (ground truth for training data).
    embedding : np.ndarray
        Fixed-length float vector.
    source_ref : str, optional
        Opaque pointer back at the raw sample (file path, dataset index).
    """

    id: str
    label: str
    embedding: np.ndarray
    source_ref: Optional[str] = None

    def __post_init__(self):
        emb = np.asarray(self.embedding, dtype=np.float64)
        if emb.ndim != 1 or emb.shape[0] < 2:
            raise DimensionError(
                f"point {self.id!r}: embedding must be a vector of length >= 2, "
                f"got shape {emb.shape}"
            )
        if not np.all(np.isfinite(emb)):
            raise ValueError(f"point {self.id!r}: embedding has non-finite components")
        self.embedding = emb

    @property
    def dimension(self) -> int:
        return self.embedding.shape[0]


class LabeledDataset:
    """Ordered collection of embedded points with a common dimension.

    Raises on ragged dimensions and duplicate ids.  A single-class dataset
    is allowed (evaluation streams are often one class); operations that
    need class structure check for it themselves.
    """

    def __init__(self, points: Sequence[EmbeddedPoint]):
        points = list(points)
        if not points:
            raise ValueError("dataset must contain at least one point")
        dim = points[0].dimension
        seen = set()
        for p in points:
            if p.dimension != dim:
                raise DimensionError(
                    f"point {p.id!r} has dimension {p.dimension}, expected {dim}"
                )
            if p.id in seen:
                raise ValueError(f"duplicate point id {p.id!r}")
            seen.add(p.id)
        self.points = points
        self.dimension = dim
        self.classes = sorted({p.label for p in points})
        self._by_id = {p.id: p for p in points}

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, point_id: str) -> EmbeddedPoint:
        return self._by_id[point_id]

    def embedding_matrix(self) -> np.ndarray:
        return np.stack([p.embedding for p in self.points])


@dataclass(eq=False)
class TreeNode:
    """A selected training point inside a boundary tree.

    ``predicted_label`` is the label the tree reasons with: the reference
    model's prediction for this point.  It defaults to the point's own label
    when a tree is built without a reference model, and it is the label that
    the edge-crossing invariant is stated over (``point.label`` keeps the
    ground truth for mislabel spotting).
    """

    node_id: int
    point: EmbeddedPoint
    predicted_label: str
    parent: Optional[int] = None
    children: list[int] = field(default_factory=list)
    boundary_distance: Optional[float] = None


@dataclass
class TraversalPath:
    """Record of one greedy descent: the unit of interpretability.

    ``steps`` holds (node_id, distance_to_query) for every node visited,
    root first; distances are strictly decreasing.  ``distance_evals``
    counts embedding-space distance computations spent on this descent
    (used by the novelty detector's cost accounting).
    """

    steps: list[tuple[int, float]]
    final_node: int
    predicted_label: str
    distance_evals: int = 0


class BoundaryTree:
    """A compact tree of boundary-adjacent training points.

    Immutable after construction: ``insert_root``/``insert_child`` are for
    the construction modules only, and all query operations are pure reads
    that may run concurrently.

    Attributes
    ----------
    nodes : list[TreeNode]
        Dense, indexed by node_id; ``nodes[0]`` is the root.
    dimension : int
        Embedding dimension shared by all node points.
    build_config : object or None
        The configuration that produced this tree (a ``stitching.BuildConfig``
        for built trees; None for hand-assembled test trees).
    provenance : str
        Hash of the input dataset plus configuration, for reproducibility.
    method : str
        "eb-tree", "baseline", or "manual".
    """

    def __init__(self, dimension: int, build_config=None, provenance: str = "",
                 method: str = "manual"):
        self.dimension = int(dimension)
        self.build_config = build_config
        self.provenance = provenance
        self.method = method
        self.nodes: list[TreeNode] = []
        self._emb = np.empty((0, self.dimension))

    # -- construction (stitching only; single-threaded by contract) --------

    def _append(self, point: EmbeddedPoint, predicted_label: str,
                parent: Optional[int], boundary_distance: Optional[float]) -> TreeNode:
        if point.dimension != self.dimension:
            raise DimensionError(
                f"point {point.id!r} has dimension {point.dimension}, "
                f"tree expects {self.dimension}"
            )
        node = TreeNode(
            node_id=len(self.nodes),
            point=point,
            predicted_label=predicted_label,
            parent=parent,
            boundary_distance=boundary_distance,
        )
        self.nodes.append(node)
        if len(self.nodes) > self._emb.shape[0]:
            grown = np.empty((max(16, 2 * self._emb.shape[0]), self.dimension))
            grown[: self._emb.shape[0]] = self._emb[: self._emb.shape[0]]
            self._emb = grown
        self._emb[node.node_id] = point.embedding
        return node

    def insert_root(self, point: EmbeddedPoint, predicted_label: Optional[str] = None,
                    boundary_distance: Optional[float] = None) -> TreeNode:
        if self.nodes:
            raise ValueError("tree already has a root")
        return self._append(point, predicted_label or point.label, None,
                            boundary_distance)

    def insert_child(self, parent_id: int, point: EmbeddedPoint,
                     predicted_label: Optional[str] = None,
                     boundary_distance: Optional[float] = None) -> TreeNode:
        parent = self.nodes[parent_id]
        label = predicted_label or point.label
        if label == parent.predicted_label:
            raise ValueError(
                f"edge {parent_id} -> {point.id!r} would not cross a boundary "
                f"(both label {label!r})"
            )
        node = self._append(point, label, parent_id, boundary_distance)
        parent.children.append(node.node_id)
        return node

    # -- queries -----------------------------------------------------------

    @property
    def root(self) -> int:
        return 0

    def __len__(self) -> int:
        return len(self.nodes)

    def node_embedding(self, node_id: int) -> np.ndarray:
        return self._emb[node_id]

    def child_embeddings(self, node_id: int) -> np.ndarray:
        return self._emb[np.asarray(self.nodes[node_id].children, dtype=np.intp)]

    def max_children(self) -> int:
        cfg = self.build_config
        return getattr(cfg, "max_children", 0) or 0


def euclidean_distance(a, b) -> float:
    """L2 distance between two equal-length vectors.

    Symmetric, zero iff a == b; raises DimensionError on a length mismatch.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def traverse(tree: BoundaryTree, query) -> TraversalPath:
    """Greedy descent from the root toward strictly closer nodes.

    At each node v: if v is at least as close to the query as its closest
    child, stop at v (exact ties prefer staying, then the lowest node_id
    child); otherwise move into the closest child.  Child capacity, when
    configured, is enforced at insertion time by the construction modules;
    traversal itself is always pure greedy descent.
    """
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (tree.dimension,):
        raise DimensionError(
            f"query has shape {query.shape}, tree expects ({tree.dimension},)"
        )
    if not tree.nodes:
        raise ValueError("cannot traverse an empty tree")

    evals = 0
    node_id = tree.root
    d_here = float(np.linalg.norm(tree.node_embedding(node_id) - query))
    evals += 1
    steps = [(node_id, d_here)]
    while True:
        node = tree.nodes[node_id]
        if not node.children:
            break
        child_ids = node.children  # ascending node_id by construction
        diffs = tree.child_embeddings(node_id) - query
        dists = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
        evals += len(child_ids)
        best = int(np.argmin(dists))  # first occurrence = lowest node_id
        d_child = float(dists[best])
        if d_here <= d_child:
            break
        node_id = child_ids[best]
        d_here = d_child
        steps.append((node_id, d_here))

    path = TraversalPath(
        steps=steps,
        final_node=node_id,
        predicted_label=tree.nodes[node_id].predicted_label,
        distance_evals=evals,
    )
    return path


def classify(tree: BoundaryTree, query) -> tuple[str, TraversalPath]:
    """Predict a label for the query and return the explaining path."""
    path = traverse(tree, query)
    return path.predicted_label, path


def validate_tree(tree: BoundaryTree) -> None:
    """Assert the structural invariants; raises AssertionError on violation.

    Checks: dense ids, a single root, every edge crosses a boundary
    (predicted labels differ), children lists are disjoint and consistent
    with parent pointers, and every node is reachable from the root.
    """
    assert tree.nodes, "tree has no nodes"
    seen_children = set()
    for idx, node in enumerate(tree.nodes):
        assert node.node_id == idx, "node ids must be dense and ordered"
        assert node.point.dimension == tree.dimension
        if node.parent is None:
            assert idx == tree.root, "only the root may lack a parent"
        else:
            parent = tree.nodes[node.parent]
            assert node.predicted_label != parent.predicted_label, (
                f"edge {parent.node_id}->{idx} does not cross a boundary"
            )
            assert idx in parent.children
        for c in node.children:
            assert c not in seen_children, f"node {c} appears in two children lists"
            seen_children.add(c)
            assert tree.nodes[c].parent == idx
        assert node.children == sorted(node.children)
    # reachability
    reached = set()
    stack = [tree.root]
    while stack:
        nid = stack.pop()
        if nid in reached:
            raise AssertionError("cycle detected")
        reached.add(nid)
        stack.extend(tree.nodes[nid].children)
    assert len(reached) == len(tree.nodes), "unreachable nodes present"
