"""Dataset loaders: real MNIST when present on disk, synthetic blobs always.

Both loaders return ``(images, labels)`` with images as a float32 tensor
of shape (N, 1, H, W) in [0, 1] and labels as a list of class-name
strings.  Order is deterministic; the position of a sample in the split
is its id in the extracted file.
"""

from __future__ import annotations

import os

import numpy as np
import torch


def mnist_available(root) -> bool:
    """True when the torchvision MNIST raw files are already on disk."""
    raw = os.path.join(root, "MNIST", "raw")
    needed = ("train-images-idx3-ubyte", "t10k-images-idx3-ubyte")
    return all(
        os.path.exists(os.path.join(raw, name))
        or os.path.exists(os.path.join(raw, name + ".gz"))
        for name in needed
    )


def _load_mnist(split, root):
    from torchvision import datasets

    if not mnist_available(root):
        raise FileNotFoundError(
            f"MNIST raw files not found under {os.path.join(root, 'MNIST', 'raw')}; "
            "download them there first (this tool does not fetch data)")
    ds = datasets.MNIST(root=root, train=(split == "train"), download=False)
    images = ds.data.unsqueeze(1).to(torch.float32) / 255.0
    labels = [str(int(t)) for t in ds.targets]
    return images, labels


def _load_blobs(split, root, n_train=512, n_test=256, classes=4, size=16):
    """Synthetic image classes: one bright gaussian bump per class.

    Hermetic stand-in for a real dataset so the pipeline is testable
    offline; root is ignored.
    """
    n = n_train if split == "train" else n_test
    rng = np.random.default_rng(97 if split == "train" else 98)
    centers = [(4, 4), (4, 11), (11, 4), (11, 11)][:classes]
    yy, xx = np.mgrid[0:size, 0:size]
    images = np.empty((n, 1, size, size), dtype=np.float32)
    labels = []
    for i in range(n):
        k = i % classes
        cy, cx = centers[k]
        bump = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / 6.0)
        noise = rng.normal(0.0, 0.08, (size, size))
        images[i, 0] = np.clip(bump + noise, 0.0, 1.0)
        labels.append(str(k))
    return torch.from_numpy(images), labels


def load_split(name, split, root):
    if name == "mnist":
        return _load_mnist(split, root)
    if name == "blobs":
        return _load_blobs(split, root)
    raise ValueError(f"unknown dataset {name!r}")
