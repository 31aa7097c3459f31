"""Conformal detection of points the tree has never seen the likes of.

Each stream point is routed down the tree; at its final node N we compare
the point's local distribution — softmax over negative distances to N, its
parent, and its children — against the cached distributions of the training
points that settled at N (the cohort D_N).  A conformal p-value from
leave-one-out nonconformity scores says how surprising the newcomer is;
small p means novel.  The tree does the heavy lifting: only a handful of
distance computations per stream point instead of a full training-set scan.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core_model import BoundaryTree, LabeledDataset, traverse
from .errors import InsufficientSupportError

__all__ = [
    "LocalDistribution",
    "NodeCohort",
    "NoveltyVerdict",
    "local_distribution",
    "nonconformity",
    "route_training_points",
    "p_value",
    "detect_stream",
    "savings_ratio",
]

_CHUNK = 128  # row block size for pairwise distribution distances


@dataclass
class LocalDistribution:
    """Softmax-over-negative-distance weights on a node's local family.

    family lists node ids in the fixed order [N, parent, children...];
    probs is the matching probability vector (non-negative, sums to 1).
    """

    family: list[int]
    probs: np.ndarray


def _family_of(tree: BoundaryTree, node_id: int) -> list[int]:
    node = tree.nodes[node_id]
    ids = [node_id]
    if node.parent is not None:
        ids.append(node.parent)
    ids.extend(node.children)
    return ids


def _embed(point) -> np.ndarray:
    emb = getattr(point, "embedding", point)
    return np.asarray(emb, dtype=np.float64)


def _distribution(family_emb: np.ndarray, vec: np.ndarray, tau: float) -> np.ndarray:
    dists = np.sqrt(((family_emb - vec) ** 2).sum(axis=1))
    # shift by the minimum so the largest weight is exp(0); the shift cancels
    # in the normalization but keeps exp() out of the underflow range
    weights = np.exp(-(dists - dists.min()) / tau)
    return weights / weights.sum()


def local_distribution(
    tree: BoundaryTree, node_id: int, point, tau: float = 1.0
) -> LocalDistribution:
    """Distribution of a point's affinity over {N, parent(N), children(N)}."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    family = _family_of(tree, node_id)
    family_emb = np.stack([tree.node_embedding(i) for i in family])
    return LocalDistribution(
        family=family, probs=_distribution(family_emb, _embed(point), tau)
    )


def _divergence(dists: np.ndarray, z: np.ndarray, stat: str) -> np.ndarray:
    """Row-wise divergence between member distributions and z's."""
    if stat == "tv":
        return 0.5 * np.abs(dists - z[None, :]).sum(axis=1)
    if stat == "skl":
        p = np.clip(dists, 1e-12, None)
        q = np.clip(z, 1e-12, None)[None, :]
        return 0.5 * ((p * np.log(p / q)).sum(axis=1)
                      + (q * np.log(q / p)).sum(axis=1))
    raise ValueError(f"unknown stat {stat!r}")


def nonconformity(member_dists, z_dist, stat: str = "tv") -> float:
    """Mean divergence of z's distribution from each cohort member's.

    Total variation (half L1) by default; symmetric KL behind stat="skl".
    Higher means less conforming.
    """
    if isinstance(member_dists, np.ndarray):
        stacked = np.atleast_2d(member_dists)
    else:
        rows = [d.probs if isinstance(d, LocalDistribution) else d
                for d in member_dists]
        if not rows:
            raise InsufficientSupportError("empty cohort")
        stacked = np.stack([np.asarray(r, dtype=np.float64) for r in rows])
    if stacked.shape[0] == 0:
        raise InsufficientSupportError("empty cohort")
    z = z_dist.probs if isinstance(z_dist, LocalDistribution) else z_dist
    z = np.asarray(z, dtype=np.float64)
    return float(np.mean(_divergence(stacked, z, stat)))


@dataclass(eq=False)
class NodeCohort:
    """The training points whose traversal ends at one node, with caches.

    alphas[j] is the leave-one-out nonconformity of member j against the
    rest of the cohort (0.0 for a singleton cohort — there is nothing to
    disagree with); distributions holds one row per member over the node's
    family, so newcomers can be scored without touching the training set.
    """

    node_id: int
    members: list[str]
    family: list[int]
    family_emb: np.ndarray
    distributions: np.ndarray  # (n_members, len(family))
    alphas: np.ndarray
    tau: float = 1.0
    stat: str = "tv"

    @property
    def support(self) -> int:
        return len(self.members)


def _loo_alphas(distributions: np.ndarray, stat: str) -> np.ndarray:
    n = distributions.shape[0]
    if n == 1:
        return np.zeros(1)
    totals = np.empty(n)
    for start in range(0, n, _CHUNK):
        block = distributions[start:start + _CHUNK]
        if stat == "tv":
            div = 0.5 * np.abs(block[:, None, :] - distributions[None, :, :]).sum(
                axis=2)
        else:
            div = np.stack([_divergence(distributions, row, stat)
                            for row in block])
        totals[start:start + _CHUNK] = div.sum(axis=1)
    # the self-term is zero for both stats, so dividing by n-1 gives the
    # leave-one-out mean directly
    return totals / (n - 1)


def route_training_points(
    tree: BoundaryTree,
    dataset: LabeledDataset,
    tau: float = 1.0,
    stat: str = "tv",
) -> dict:
    """Group training points by final traversal node and precompute caches."""
    groups: dict[int, list] = {}
    for point in dataset:
        final = traverse(tree, point.embedding).final_node
        groups.setdefault(final, []).append(point)

    cohorts = {}
    for node_id in sorted(groups):
        members = groups[node_id]
        family = _family_of(tree, node_id)
        family_emb = np.stack([tree.node_embedding(i) for i in family])
        dists = np.stack(
            [_distribution(family_emb, p.embedding, tau) for p in members]
        )
        cohorts[node_id] = NodeCohort(
            node_id=node_id,
            members=[p.id for p in members],
            family=family,
            family_emb=family_emb,
            distributions=dists,
            alphas=_loo_alphas(dists, stat),
            tau=tau,
            stat=stat,
        )
    return cohorts


def p_value(cohort: NodeCohort, z) -> float:
    """Conformal p-value of z against the cohort.

    alpha_z is z's mean divergence from all members; the p-value is the
    fraction of members whose cached leave-one-out score is at least
    alpha_z.
    """
    if cohort.support == 0:
        raise InsufficientSupportError("empty cohort")
    z_dist = _distribution(cohort.family_emb, _embed(z), cohort.tau)
    alpha_z = float(np.mean(_divergence(cohort.distributions, z_dist,
                                        cohort.stat)))
    return float(np.count_nonzero(cohort.alphas >= alpha_z)) / cohort.support


@dataclass
class NoveltyVerdict:
    point_id: str
    final_node: int
    p_value: float
    alpha: Optional[float]
    is_novel: bool
    support: int
    insufficient_support: bool
    distance_evals: int = 0


def detect_stream(
    tree: BoundaryTree,
    cohorts: dict,
    stream: Sequence,
    threshold: float = 0.01,
    min_support: int = 5,
) -> list[NoveltyVerdict]:
    """Score a stream of points; small p-values and thin cohorts are novel.

    Each verdict records the number of embedding-space distance evaluations
    it cost (traversal plus the final node's family), the currency of the
    savings claim against a full training-set scan.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    verdicts = []
    for point in stream:
        path = traverse(tree, point.embedding)
        cohort = cohorts.get(path.final_node)
        if cohort is None:
            verdicts.append(NoveltyVerdict(
                point_id=point.id,
                final_node=path.final_node,
                p_value=0.0,
                alpha=None,
                is_novel=True,
                support=0,
                insufficient_support=True,
                distance_evals=path.distance_evals,
            ))
            continue
        z_dist = _distribution(cohort.family_emb, _embed(point), cohort.tau)
        alpha_z = float(np.mean(_divergence(cohort.distributions, z_dist,
                                            cohort.stat)))
        p = float(np.count_nonzero(cohort.alphas >= alpha_z)) / cohort.support
        thin = cohort.support < min_support
        verdicts.append(NoveltyVerdict(
            point_id=point.id,
            final_node=path.final_node,
            p_value=p,
            alpha=alpha_z,
            is_novel=(p < threshold) or thin,
            support=cohort.support,
            insufficient_support=thin,
            distance_evals=path.distance_evals + len(cohort.family),
        ))
    return verdicts


def savings_ratio(verdicts: Sequence[NoveltyVerdict], training_size: int) -> float:
    """Fraction of distance computations avoided vs scanning all training points."""
    if not verdicts or training_size <= 0:
        raise ValueError("need at least one verdict and a positive training size")
    spent = sum(v.distance_evals for v in verdicts)
    return 1.0 - spent / (training_size * len(verdicts))
