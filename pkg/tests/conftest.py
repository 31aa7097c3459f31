"""Shared builders for the test suite.

Everything here is deterministic: datasets come from fixed seeds and the
hand tree has its geometry chosen so traversal outcomes can be verified on
paper.
"""

import numpy as np
import pytest

from ebtree.core_model import BoundaryTree, EmbeddedPoint, LabeledDataset


def pt(pid, label, vec, source_ref=None):
    return EmbeddedPoint(id=pid, label=label,
                         embedding=np.asarray(vec, dtype=np.float64),
                         source_ref=source_ref)


def hand_tree():
    """A four-node 2-D tree small enough to trace by hand.

        n0 (0,0) A
        ├── n1 (2,0) B
        │     └── n3 (3,0) A
        └── n2 (0,2) B
    """
    tree = BoundaryTree(dimension=2)
    tree.insert_root(pt("r", "A", [0.0, 0.0], source_ref="raw/r"))
    tree.insert_child(0, pt("c1", "B", [2.0, 0.0], source_ref="raw/c1"))
    tree.insert_child(0, pt("c2", "B", [0.0, 2.0], source_ref="raw/c2"))
    tree.insert_child(1, pt("g", "A", [3.0, 0.0], source_ref="raw/g"))
    return tree


def two_blob_dataset(n_per=40, seed=0, spread=0.6):
    """Two well-separated 2-D gaussian blobs, labels 'a' and 'b'."""
    rng = np.random.default_rng(seed)
    points = []
    for label, center in (("a", (-2.0, 0.0)), ("b", (2.0, 0.0))):
        for i in range(n_per):
            vec = rng.normal(center, spread)
            points.append(pt(f"{label}{i}", label, vec))
    return LabeledDataset(points=points)


@pytest.fixture
def tiny_tree():
    return hand_tree()
