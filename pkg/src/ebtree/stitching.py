"""Boundary stitching: turn a ranked queue of points into an EB-tree.

The construction walks along decision boundaries: starting from the point
closest to its class boundary, it repeatedly asks the current node's rank
segment for nearby unconsumed points whose predicted class is the current
node's second-closest class, and inserts the pick wherever greedy traversal
says it belongs (if the labels differ there; otherwise the point is
discarded as redundant).  The plain streamed boundary tree and the
fidelity/error metrics used to compare the two live here as well.

Throughout this module "label" means the reference model's predicted label;
trees mimic the model, not the ground truth.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .ann_index import LshConfig, SegmentedIndex, build_segmented
from .core_model import (
    BoundaryTree,
    EmbeddedPoint,
    LabeledDataset,
    TreeNode,
    classify,
    traverse,
)
from .errors import DegenerateDataError, EmptyInputError, EmptyQueueError
from .margin_ranking import (
    Hyperplane,
    MarginFitConfig,
    distance_to_boundary,
    sort_by_boundary_distance,
)

__all__ = [
    "BuildConfig",
    "ConstructionState",
    "RankedQueue",
    "prediction_view",
    "second_closest_class",
    "get_candidate",
    "find_parent",
    "build_eb_tree",
    "build_basic_boundary_tree",
    "fidelity",
    "error_rate",
]


def prediction_view(dataset: LabeledDataset, predictions: dict) -> LabeledDataset:
    """The dataset relabeled with the reference model's predictions.

    Ranking, plane fitting, and stitching all reason about the model's
    labels, not the ground truth; this is the dataset they see.
    """
    return LabeledDataset(
        [replace(p, label=predictions[p.id]) for p in dataset.points]
    )


@dataclass
class BuildConfig:
    """Construction knobs; k is the LSH candidate count per stitching step."""

    k: int = 32
    lsh: LshConfig = field(default_factory=LshConfig)
    distance_mode: str = "own"
    max_children: int = 0  # 0 = unbounded branching
    seed: int = 0
    margin: Optional[MarginFitConfig] = None  # recorded for reproducibility

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.distance_mode not in ("own", "min_all"):
            raise ValueError(f"unknown distance_mode {self.distance_mode!r}")

    def to_dict(self) -> dict:
        margin = None
        if self.margin is not None:
            margin = {
                "c": self.margin.C,
                "max_iters": self.margin.max_iters,
                "tolerance": self.margin.tolerance,
                "seed": self.margin.seed,
            }
        return {
            "k": self.k,
            "lsh": {
                "num_tables": self.lsh.num_tables,
                "hashes_per_table": self.lsh.hashes_per_table,
                "bucket_width": self.lsh.bucket_width,
                "seed": self.lsh.seed,
                "segments": self.lsh.segments,
            },
            "distance_mode": self.distance_mode,
            "max_children": self.max_children,
            "seed": self.seed,
            "margin": margin,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BuildConfig":
        margin = data.get("margin")
        return cls(
            k=data["k"],
            lsh=LshConfig(**data["lsh"]),
            distance_mode=data["distance_mode"],
            max_children=data["max_children"],
            seed=data["seed"],
            margin=None if margin is None else MarginFitConfig(
                C=margin["c"],
                max_iters=margin["max_iters"],
                tolerance=margin["tolerance"],
                seed=margin["seed"],
            ),
        )


class RankedQueue:
    """The not-yet-processed points, in ascending boundary-distance order."""

    def __init__(self, ranked):
        self._order = [rp.point.id for rp in ranked]
        self._points = {rp.point.id: rp.point for rp in ranked}
        self._live = set(self._order)
        self._head = 0

    def __len__(self) -> int:
        return len(self._live)

    def __contains__(self, point_id: str) -> bool:
        return point_id in self._live

    def remove_first(self) -> EmbeddedPoint:
        while self._head < len(self._order):
            pid = self._order[self._head]
            self._head += 1
            if pid in self._live:
                self._live.discard(pid)
                return self._points[pid]
        raise EmptyQueueError("queue is empty")

    def remove(self, point_id: str) -> EmbeddedPoint:
        if point_id not in self._live:
            raise KeyError(f"id {point_id!r} not in queue")
        self._live.discard(point_id)
        return self._points[point_id]


@dataclass(eq=False)
class ConstructionState:
    """Everything the stitching loop threads between steps."""

    queue: RankedQueue
    segments: SegmentedIndex
    tree: BoundaryTree
    current: EmbeddedPoint  # prediction-labeled view of the last insertion
    planes: Sequence[Hyperplane]


def second_closest_class(point: EmbeddedPoint, planes: Sequence[Hyperplane]) -> str:
    """The class a point is second-most attracted to.

    Probability-vector embeddings (componentwise >= 0, summing to ~1, one
    component per class) answer by their second-largest component, with the
    components mapped to class ids in sorted order.  Anything else falls
    back to the nearest foreign one-vs-all hyperplane.  Ties go to the
    lexicographically smaller label.
    """
    classes = sorted(p.class_id for p in planes)
    if len(classes) < 2:
        raise DegenerateDataError("need at least two classes")
    emb = point.embedding
    is_simplex = (
        emb.shape[0] == len(classes)
        and bool(np.all(emb >= 0.0))
        and abs(float(emb.sum()) - 1.0) <= 1e-3
    )
    if is_simplex:
        order = sorted(zip(emb, classes), key=lambda t: (-t[0], t[1]))
        return order[1][1]
    by_class = {p.class_id: p for p in planes}
    best = min(
        (distance_to_boundary(point, by_class[c]), c)
        for c in classes
        if c != point.label
    )
    return best[1]


def get_candidate(state: ConstructionState, cfg: BuildConfig) -> EmbeddedPoint:
    """Pick the next point to process, consuming it from queue and index.

    Queries the current point's rank segment for the k nearest unconsumed
    points and returns the first one predicted to the current point's
    second-closest class; when the query comes back empty or nothing
    qualifies, falls back to the head of the queue.
    """
    if len(state.queue) == 0:
        raise EmptyQueueError("queue is empty")
    current = state.current
    rank = state.segments.rank_of[current.id]
    nearest = state.segments.index_for_rank(rank).query_knn(current.embedding, cfg.k)
    if nearest:
        expected = second_closest_class(current, state.planes)
        for cand_id, _ in nearest:
            cand = state.queue._points[cand_id]
            if cand.label == expected:
                state.queue.remove(cand_id)
                state.segments.remove(cand_id)
                return cand
    head = state.queue.remove_first()
    while head.id == current.id and len(state.queue):
        head = state.queue.remove_first()  # self-candidates are meaningless
    state.segments.remove(head.id)
    return head


def find_parent(tree: BoundaryTree, point: EmbeddedPoint) -> TreeNode:
    """The node a greedy traversal of the point's embedding ends at."""
    return tree.nodes[traverse(tree, point.embedding).final_node]


def _provenance(dataset: LabeledDataset, predictions: dict, tag: str) -> str:
    digest = hashlib.sha256()
    digest.update(tag.encode())
    digest.update(str(dataset.dimension).encode())
    for p in dataset.points:
        digest.update(p.id.encode())
        digest.update(p.label.encode())
        digest.update(predictions[p.id].encode())
        digest.update(np.ascontiguousarray(p.embedding).tobytes())
    return digest.hexdigest()


def _check_predictions(dataset: LabeledDataset, predictions: dict) -> None:
    missing = [p.id for p in dataset.points if p.id not in predictions]
    if missing:
        raise KeyError(f"predictions missing for {len(missing)} points, "
                       f"first: {missing[0]!r}")


def _single_node_tree(dataset, predictions, cfg, method: str) -> BoundaryTree:
    tree = BoundaryTree(
        dimension=dataset.dimension,
        build_config=cfg,
        provenance=_provenance(dataset, predictions, method + repr(cfg)),
        method=method,
    )
    first = dataset.points[0]
    tree.insert_root(first, predicted_label=predictions[first.id])
    return tree


def build_eb_tree(
    dataset: LabeledDataset,
    reference_predictions: dict,
    planes: Sequence[Hyperplane],
    cfg: Optional[BuildConfig] = None,
) -> BoundaryTree:
    """Run the full stitching construction and return the EB-tree.

    ``reference_predictions`` maps every point id to the reference model's
    predicted label; the planes should have been fitted against those same
    predicted labels.  Deterministic for fixed inputs and config.
    """
    cfg = cfg or BuildConfig()
    _check_predictions(dataset, reference_predictions)
    if len({reference_predictions[p.id] for p in dataset.points}) < 2:
        warnings.warn("reference predictions contain a single class; "
                      "returning a single-node tree")
        return _single_node_tree(dataset, reference_predictions, cfg, "eb-tree")

    view = prediction_view(dataset, reference_predictions)
    ranked = sort_by_boundary_distance(view, planes, cfg.distance_mode)
    segments = build_segmented(ranked, cfg.lsh)
    queue = RankedQueue(ranked)
    boundary_dist = {rp.point.id: rp.boundary_distance for rp in ranked}

    tree = BoundaryTree(
        dimension=dataset.dimension,
        build_config=cfg,
        provenance=_provenance(dataset, reference_predictions,
                               "eb-tree" + repr(cfg)),
        method="eb-tree",
    )
    root_view = queue.remove_first()
    segments.remove(root_view.id)
    tree.insert_root(dataset[root_view.id],
                     predicted_label=root_view.label,
                     boundary_distance=boundary_dist[root_view.id])

    state = ConstructionState(
        queue=queue, segments=segments, tree=tree,
        current=root_view, planes=planes,
    )
    cap = cfg.max_children
    while len(queue):
        child = get_candidate(state, cfg)
        parent = find_parent(tree, child)
        if parent.predicted_label != child.label and (
            cap == 0 or len(parent.children) < cap
        ):
            tree.insert_child(parent.node_id, dataset[child.id],
                              predicted_label=child.label,
                              boundary_distance=boundary_dist[child.id])
            state.current = child
    return tree


def build_basic_boundary_tree(
    dataset: LabeledDataset,
    reference_predictions: dict,
    shuffle_seed: int = 0,
    max_children: int = 0,
) -> BoundaryTree:
    """The streamed baseline: insert label-crossing points in shuffled order."""
    _check_predictions(dataset, reference_predictions)
    cfg = BuildConfig(seed=shuffle_seed, max_children=max_children)
    if len({reference_predictions[p.id] for p in dataset.points}) < 2:
        warnings.warn("reference predictions contain a single class; "
                      "returning a single-node tree")
        return _single_node_tree(dataset, reference_predictions, cfg, "baseline")

    rng = np.random.default_rng(shuffle_seed)
    order = rng.permutation(len(dataset.points))
    tree = BoundaryTree(
        dimension=dataset.dimension,
        build_config=cfg,
        provenance=_provenance(dataset, reference_predictions,
                               f"baseline-seed{shuffle_seed}"),
        method="baseline",
    )
    first = dataset.points[order[0]]
    tree.insert_root(first, predicted_label=reference_predictions[first.id])
    for idx in order[1:]:
        point = dataset.points[idx]
        label = reference_predictions[point.id]
        parent = find_parent(tree, point)
        if parent.predicted_label != label and (
            max_children == 0 or len(parent.children) < max_children
        ):
            tree.insert_child(parent.node_id, point, predicted_label=label)
    return tree


def _f_measure(pairs: list[tuple[str, str]], average: str) -> float:
    """F-measure over (reference, predicted) label pairs."""
    labels = sorted({r for r, _ in pairs} | {p for _, p in pairs})
    if average == "micro":
        correct = sum(1 for r, p in pairs if r == p)
        return correct / len(pairs)
    if average != "macro":
        raise ValueError(f"unknown average {average!r}")
    scores = []
    for c in labels:
        tp = sum(1 for r, p in pairs if r == c and p == c)
        fp = sum(1 for r, p in pairs if r != c and p == c)
        fn = sum(1 for r, p in pairs if r == c and p != c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        scores.append(2 * precision * recall / (precision + recall)
                      if precision + recall else 0.0)
    return float(np.mean(scores))


def fidelity(
    tree: BoundaryTree,
    dataset,
    reference_predictions: dict,
    average: str = "macro",
) -> float:
    """Agreement between tree predictions and the reference model's.

    Macro-averaged F-measure by default (micro available); this measures how
    well the tree mimics the model, not how accurate either one is.
    """
    points = list(dataset)
    if not points:
        raise EmptyInputError("empty evaluation set")
    pairs = []
    for p in points:
        label, _ = classify(tree, p.embedding)
        pairs.append((reference_predictions[p.id], label))
    return _f_measure(pairs, average)


def error_rate(tree: BoundaryTree, dataset) -> float:
    """Fraction of points whose tree prediction differs from ground truth."""
    points = list(dataset)
    if not points:
        raise EmptyInputError("empty evaluation set")
    wrong = sum(1 for p in points if classify(tree, p.embedding)[0] != p.label)
    return wrong / len(points)
