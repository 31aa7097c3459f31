"""A small convnet classifier plus training and checkpoint helpers."""

from __future__ import annotations

import os

import torch
from torch import nn


class SmallConvNet(nn.Module):
    """Two conv blocks and two fully-connected layers.

    Sized for small grayscale images (16x16 or 28x28); the flattened
    width is derived from the input size at construction.
    """

    def __init__(self, num_classes: int, input_hw: int = 28):
        super().__init__()
        self.input_hw = input_hw
        self.conv1 = nn.Conv2d(1, 8, kernel_size=5, padding=2)
        self.conv2 = nn.Conv2d(8, 16, kernel_size=5, padding=2)
        self.pool = nn.MaxPool2d(2)
        flat = 16 * (input_hw // 4) * (input_hw // 4)
        self.fc1 = nn.Linear(flat, 64)
        self.fc2 = nn.Linear(64, num_classes)

    def forward(self, x):
        x = self.pool(torch.relu(self.conv1(x)))
        x = self.pool(torch.relu(self.conv2(x)))
        x = torch.flatten(x, 1)
        x = torch.relu(self.fc1(x))
        return self.fc2(x)


def train_model(images, targets, num_classes, input_hw, epochs=2,
                batch_size=256, seed=0, lr=1e-3):
    """Train a SmallConvNet; deterministic for a given seed.

    targets are integer class indices aligned with images.
    """
    torch.manual_seed(seed)
    model = SmallConvNet(num_classes, input_hw)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    gen = torch.Generator().manual_seed(seed)
    n = images.shape[0]
    model.train()
    for _ in range(epochs):
        order = torch.randperm(n, generator=gen)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            opt.zero_grad()
            loss = loss_fn(model(images[idx]), targets[idx])
            loss.backward()
            opt.step()
    model.eval()
    return model


def save_checkpoint(path, model, class_names):
    payload = {
        "state_dict": model.state_dict(),
        "class_names": list(class_names),
        "input_hw": model.input_hw,
    }
    torch.save(payload, path)


def load_checkpoint(path):
    """Restore a trained model; returns (model, class_names)."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    class_names = list(payload["class_names"])
    model = SmallConvNet(len(class_names), payload["input_hw"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, class_names
