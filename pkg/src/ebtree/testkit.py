"""Synthetic datasets and brute-force oracles.

Everything here exists so properties and examples are checkable without an
external model: seeded Gaussian clusters in a low-dimensional raw space, a
small multinomial-logistic reference model standing in for the classifier
being explained, and exhaustive oracles that deliberately share no distance
or sort code with the main implementation paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core_model import EmbeddedPoint, LabeledDataset

__all__ = [
    "SyntheticSpec",
    "ReferenceModel",
    "GeneratedData",
    "generate",
    "brute_knn",
    "brute_1nn_classify",
    "exact_small_svm",
]


@dataclass
class SyntheticSpec:
    num_classes: int
    points_per_class: int
    raw_dimension: int = 2
    cluster_separation: float = 4.0
    noise_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if self.cluster_separation <= 0:
            raise ValueError("cluster_separation must be positive")
        if self.raw_dimension < 2:
            raise ValueError("raw_dimension must be at least 2")


class ReferenceModel:
    """Multinomial logistic model over the raw space.

    Stands in for the black-box classifier: its softmax outputs are the
    embeddings the rest of the pipeline sees.  Fit is deterministic
    (zero init, full-batch gradient descent on standardized features).
    """

    def __init__(self, classes: Sequence[str], temperature: float = 1.0):
        self.classes = list(classes)
        self.temperature = float(temperature)
        self._mean = None
        self._scale = None
        self._weights = None  # (d_raw + 1, n_classes)

    def fit(self, X: np.ndarray, labels: Sequence[str], iters: int = 400,
            lr: float = 2.0, ridge: float = 1e-4):
        X = np.asarray(X, dtype=np.float64)
        idx = {c: i for i, c in enumerate(self.classes)}
        targets = np.zeros((len(labels), len(self.classes)))
        for row, lab in enumerate(labels):
            targets[row, idx[lab]] = 1.0
        self._mean = X.mean(axis=0)
        self._scale = X.std(axis=0)
        self._scale[self._scale == 0] = 1.0
        Z = np.hstack([(X - self._mean) / self._scale, np.ones((len(X), 1))])
        W = np.zeros((Z.shape[1], len(self.classes)))
        n = len(X)
        for t in range(iters):
            logits = Z @ W
            logits -= logits.max(axis=1, keepdims=True)
            P = np.exp(logits)
            P /= P.sum(axis=1, keepdims=True)
            grad = Z.T @ (P - targets) / n + ridge * W
            W -= lr / (1.0 + t / 200.0) * grad
        self._weights = W
        return self

    def _logits(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        Z = np.hstack([(X - self._mean) / self._scale, np.ones((len(X), 1))])
        return Z @ self._weights

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        logits = self._logits(X) / self.temperature
        logits -= logits.max(axis=1, keepdims=True)
        P = np.exp(logits)
        P /= P.sum(axis=1, keepdims=True)
        return P

    def predict(self, X: np.ndarray) -> list[str]:
        return [self.classes[i] for i in np.argmax(self._logits(X), axis=1)]


@dataclass(eq=False)
class GeneratedData:
    """Bundle returned by generate(): raw space, model, embedded dataset."""

    raw: np.ndarray
    labels: list[str]
    ids: list[str]
    model: ReferenceModel
    dataset: LabeledDataset
    predictions: dict[str, str]


def _class_labels(num_classes: int) -> list[str]:
    width = len(str(num_classes - 1))
    return [f"c{i:0{width}d}" for i in range(num_classes)]


def generate(spec: SyntheticSpec, temperature: float = 1.0,
             model_classes: Optional[Sequence[str]] = None) -> GeneratedData:
    """Sample Gaussian clusters, fit the reference model, embed everything.

    Cluster centers sit on a circle with adjacent centers
    ``cluster_separation`` apart.  When ``model_classes`` restricts the model
    to a subset (the emerging-class scenario), the excluded classes are still
    embedded through the restricted model, which is exactly how unseen data
    reaches a deployed classifier.
    """
    rng = np.random.default_rng(spec.seed)
    names = _class_labels(spec.num_classes)
    k = spec.num_classes
    radius = spec.cluster_separation / (2.0 * math.sin(math.pi / k))
    centers = np.zeros((k, spec.raw_dimension))
    for i in range(k):
        angle = 2.0 * math.pi * i / k
        centers[i, 0] = radius * math.cos(angle)
        centers[i, 1] = radius * math.sin(angle)

    rows, labels = [], []
    for i, name in enumerate(names):
        rows.append(centers[i] + spec.noise_sigma
                    * rng.standard_normal((spec.points_per_class, spec.raw_dimension)))
        labels.extend([name] * spec.points_per_class)
    raw = np.vstack(rows)
    ids = [f"p{i:05d}" for i in range(len(raw))]

    fit_classes = list(model_classes) if model_classes is not None else names
    model = ReferenceModel(fit_classes, temperature=temperature)
    in_model = [i for i, lab in enumerate(labels) if lab in set(fit_classes)]
    model.fit(raw[in_model], [labels[i] for i in in_model])

    probs = model.predict_proba(raw)
    preds = model.predict(raw)
    points = [
        EmbeddedPoint(id=pid, label=lab, embedding=probs[i],
                      source_ref=f"synthetic:{i}")
        for i, (pid, lab) in enumerate(zip(ids, labels))
    ]
    return GeneratedData(
        raw=raw,
        labels=labels,
        ids=ids,
        model=model,
        dataset=LabeledDataset(points),
        predictions=dict(zip(ids, preds)),
    )


# ---------------------------------------------------------------------------
# Oracles.  Pure Python, sequential arithmetic, no shared helpers with the
# main implementation paths.
# ---------------------------------------------------------------------------


def brute_knn(points: Sequence[tuple[str, Sequence[float]]], query, k: int):
    """Exact k nearest neighbors by exhaustive scan.

    Returns ids ascending by distance, ties broken by id.
    """
    scored = []
    for pid, vec in points:
        acc = 0.0
        for a, b in zip(vec, query):
            diff = float(a) - float(b)
            acc += diff * diff
        scored.append((math.sqrt(acc), pid))
    scored.sort()
    return [pid for _, pid in scored[:k]]


def brute_1nn_classify(labeled_points, query) -> str:
    """Exhaustive 1-NN label over (label, vector) pairs."""
    best_d, best_label = None, None
    for label, vec in labeled_points:
        acc = 0.0
        for a, b in zip(vec, query):
            diff = float(a) - float(b)
            acc += diff * diff
        if best_d is None or acc < best_d:
            best_d, best_label = acc, label
    return best_label


def exact_small_svm(X, y, tol: float = 1e-9):
    """Exact hard-margin separator by support-subset enumeration.

    Solves min 0.5||w||^2 subject to y_i(w.x_i + b) >= 1 by enumerating
    candidate active sets of size 2..d+1 that mix both classes, solving the
    primal KKT equalities for each, and keeping the feasible candidate with
    nonnegative multipliers.  Only usable for small separable instances
    (n <= 25); raises ValueError otherwise.

    Returns (w, b, objective).
    """
    from itertools import combinations

    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if n > 25:
        raise ValueError("oracle limited to 25 points")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("need both classes")

    best = None
    for size in range(2, min(n, d + 1) + 1):
        for subset in combinations(range(n), size):
            ys = y[list(subset)]
            if np.all(ys > 0) or np.all(ys < 0):
                continue
            # theta = (w, b); constraints A theta = 1 with rows y_i (x_i, 1)
            A = np.hstack([ys[:, None] * X[list(subset)], ys[:, None]])
            P = np.eye(d + 1)
            P[d, d] = 0.0
            kkt = np.zeros((d + 1 + size, d + 1 + size))
            kkt[: d + 1, : d + 1] = P
            kkt[: d + 1, d + 1:] = A.T
            kkt[d + 1:, : d + 1] = A
            rhs = np.concatenate([np.zeros(d + 1), np.ones(size)])
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            if float(np.max(np.abs(kkt @ sol - rhs))) > 1e-6:
                continue  # singular subset; lstsq residual means no exact KKT solution
            w, b = sol[:d], float(sol[d])
            nu = -sol[d + 1:]  # stationarity: P theta + A^T lambda = 0
            margins = y * (X @ w + b)
            if np.min(margins) < 1.0 - 1e-7:
                continue
            if np.min(nu) < -1e-7:
                continue
            obj = 0.5 * float(w @ w)
            if best is None or obj < best[2] - tol:
                best = (w, b, obj)
    if best is None:
        raise ValueError("no feasible support subset found; data not separable?")
    return best
