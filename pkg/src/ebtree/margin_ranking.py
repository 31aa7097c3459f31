"""One-vs-all max-margin hyperplanes and boundary-distance ranking.

Each class gets the widest-margin linear separator between itself and the
rest; training points are then ranked by ascending perpendicular distance to
their class's boundary.  The ranking is what the stitching algorithm
consumes: it never classifies with these planes.

The fit is a deterministic full-batch subgradient solve (Pegasos-style step
schedule, best-iterate tracking) followed by a dual refinement: pairwise
coordinate steps on the box-constrained dual, always picking the pair with
the largest KKT violation.  The refined plane is accepted only when it
lowers the true soft-margin objective, so refinement can only improve on
the subgradient iterate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core_model import EmbeddedPoint, LabeledDataset
from .errors import (
    DegenerateDataError,
    DegenerateHyperplaneError,
    DimensionError,
    MissingPlaneError,
)

__all__ = [
    "Hyperplane",
    "MarginFitConfig",
    "RankedPoint",
    "fit_one_vs_all",
    "distance_to_boundary",
    "sort_by_boundary_distance",
]


@dataclass(eq=False)
class Hyperplane:
    """A one-vs-all decision boundary w.x + b = 0 for one class.

    ``margin`` caches the inter-class margin 2/||w|| of the fitted plane.
    """

    class_id: str
    w: np.ndarray
    b: float
    margin: float = field(init=False)
    converged: bool = True

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.b = float(self.b)
        norm = float(np.linalg.norm(self.w))
        if norm == 0.0:
            raise DegenerateHyperplaneError(
                f"hyperplane for class {self.class_id!r} has zero normal"
            )
        self.margin = 2.0 / norm


@dataclass
class MarginFitConfig:
    """Knobs for the soft-margin fit.

    C is the slack weight: large C approximates a hard margin on separable
    data, the default handles mildly non-separable embeddings.
    """

    C: float = 10.0
    max_iters: int = 1000
    tolerance: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass(eq=False)
class RankedPoint:
    point: EmbeddedPoint
    boundary_distance: float
    rank: int


def _objective(X, y, C, w, b):
    margins = y * (X @ w + b)
    hinge = np.maximum(0.0, 1.0 - margins)
    return 0.5 * float(w @ w) + C * float(hinge.sum())


def _dual_refine(X, y, C, tol, max_iters):
    """Pairwise coordinate ascent on the box-constrained dual.

    Each step picks the most KKT-violating (up, down) index pair and moves
    the pair along the feasible line segment; the equality constraint
    sum(alpha * y) = 0 is preserved exactly, so the recovered offset comes
    straight from the stationarity conditions.  Returns (w, b, converged).
    """
    n, d = X.shape
    alpha = np.zeros(n)
    w = np.zeros(d)
    pos = y > 0
    slack = 1e-12 * max(1.0, C)
    converged = False
    for _ in range(max_iters):
        # nyg_i = y_i - x_i.w is the offset each margin-active point votes for.
        nyg = y - X @ w
        at_upper = alpha >= C - slack
        at_lower = alpha <= slack
        up = (pos & ~at_upper) | (~pos & ~at_lower)
        down = (~pos & ~at_upper) | (pos & ~at_lower)
        if not up.any() or not down.any():
            converged = True
            break
        up_idx = np.flatnonzero(up)
        down_idx = np.flatnonzero(down)
        i = up_idx[np.argmax(nyg[up_idx])]
        j = down_idx[np.argmin(nyg[down_idx])]
        gap = nyg[i] - nyg[j]
        if gap <= tol:
            converged = True
            break
        diff = X[i] - X[j]
        quad = max(float(diff @ diff), 1e-12)
        step = gap / quad
        # Alpha moves are y-signed so the equality constraint is untouched.
        hi_i = C - alpha[i] if pos[i] else alpha[i]
        hi_j = alpha[j] if pos[j] else C - alpha[j]
        step = min(step, hi_i, hi_j)
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        w = w + step * diff
    nyg = y - X @ w
    up = (pos & (alpha < C - slack)) | (~pos & (alpha > slack))
    down = (~pos & (alpha < C - slack)) | (pos & (alpha > slack))
    if up.any() and down.any():
        b = 0.5 * (float(nyg[np.flatnonzero(up)].max()) + float(nyg[np.flatnonzero(down)].min()))
    elif up.any():
        b = float(nyg[np.flatnonzero(up)].max())
    elif down.any():
        b = float(nyg[np.flatnonzero(down)].min())
    else:
        b = 0.0
    return w, b, converged


def _fit_binary(X, y, cfg: MarginFitConfig, rng):
    """Fit one soft-margin separator; y in {-1, +1}.

    Runs the subgradient phase, then the pairwise dual refinement, and keeps
    whichever iterate has the lower true objective.  Returns
    (w, b, converged, accepted_objectives); the accepted-objective trace is
    strictly decreasing by construction.
    """
    n, d = X.shape
    lam = 1.0 / (n * cfg.C)
    radius = 1.0 / np.sqrt(lam)

    w = rng.normal(0.0, 1e-8, size=d)  # deterministic symmetry breaking
    b = 0.0
    best_w, best_b = w.copy(), b
    best_obj = _objective(X, y, cfg.C, w, b)
    trace = [best_obj]
    patience = 50
    last_improvement = 0

    for t in range(1, cfg.max_iters + 1):
        margins = y * (X @ w + b)
        viol = margins < 1.0
        gw = lam * w - (y[viol] @ X[viol]) / n
        gb = -float(y[viol].sum()) / n
        w = w - gw / (lam * (t + 2))
        b = b - gb / np.sqrt(t)
        wn = float(np.linalg.norm(w))
        if wn > radius:
            w *= radius / wn
        obj = 0.5 * float(w @ w) + cfg.C * float(
            np.maximum(0.0, 1.0 - y * (X @ w + b)).sum()
        )
        if obj < best_obj - cfg.tolerance * max(1.0, abs(best_obj)):
            last_improvement = t
        if obj < best_obj:
            best_obj = obj
            best_w, best_b = w.copy(), b
            trace.append(best_obj)
        if t - last_improvement >= patience:
            break

    converged = t < cfg.max_iters
    ref_w, ref_b, ref_converged = _dual_refine(
        X, y, cfg.C, max(cfg.tolerance, 1e-10), max(cfg.max_iters, 20 * n, 5000)
    )
    ref_obj = _objective(X, y, cfg.C, ref_w, ref_b)
    if ref_obj < best_obj:
        trace.append(ref_obj)
        return ref_w, ref_b, ref_converged, trace
    return best_w, best_b, converged, trace


def fit_one_vs_all(dataset: LabeledDataset, cfg: Optional[MarginFitConfig] = None):
    """Fit one max-margin hyperplane per class, class vs rest.

    Returns hyperplanes ordered by class id.  Non-convergence within
    ``max_iters`` is reported through ``Hyperplane.converged`` rather than
    raised; the best iterate found is returned either way.
    """
    cfg = cfg or MarginFitConfig()
    if len(dataset.classes) < 2:
        raise DegenerateDataError("one-vs-all needs at least two classes")
    X = dataset.embedding_matrix()
    labels = np.array([p.label for p in dataset.points])
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(dataset.classes))
    planes = []
    for cls, seed in zip(dataset.classes, seeds):
        y = np.where(labels == cls, 1.0, -1.0)
        w, b, converged, _ = _fit_binary(X, y, cfg, np.random.default_rng(seed))
        planes.append(Hyperplane(class_id=cls, w=w, b=b, converged=converged))
    return planes


def distance_to_boundary(point: EmbeddedPoint, plane: Hyperplane) -> float:
    """Perpendicular distance |w.x + b| / ||w|| from a point to a plane."""
    if point.dimension != plane.w.shape[0]:
        raise DimensionError(
            f"point {point.id!r} has dimension {point.dimension}, "
            f"plane expects {plane.w.shape[0]}"
        )
    norm = float(np.linalg.norm(plane.w))
    if norm == 0.0:
        raise DegenerateHyperplaneError("zero normal vector")
    return abs(float(plane.w @ point.embedding) + plane.b) / norm


def sort_by_boundary_distance(
    dataset: LabeledDataset,
    planes: Sequence[Hyperplane],
    distance_mode: str = "own",
):
    """Rank points by ascending distance to the decision boundary.

    distance_mode "own" measures each point against the hyperplane of its
    own label; "min_all" takes the minimum over every class's hyperplane.
    Ties break on point id, so the ranking is total and deterministic.
    """
    if distance_mode not in ("own", "min_all"):
        raise ValueError(f"unknown distance_mode {distance_mode!r}")
    by_class = {p.class_id: p for p in planes}
    missing = [c for c in dataset.classes if c not in by_class]
    if missing:
        raise MissingPlaneError(f"no hyperplane for classes: {missing}")

    scored = []
    for point in dataset.points:
        if distance_mode == "own":
            dist = distance_to_boundary(point, by_class[point.label])
        else:
            dist = min(distance_to_boundary(point, pl) for pl in by_class.values())
        scored.append((dist, point.id, point))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [
        RankedPoint(point=p, boundary_distance=d, rank=i)
        for i, (d, _, p) in enumerate(scored)
    ]
