"""Run a classifier over a dataset split and dump softmax embeddings.

Output is the embedding CSV consumed by the boundary-tree tooling:
``id,label,pred,d0..d{C-1}`` where C is the model's class count, id is
the sample's index within the split, label is the dataset's class name,
and pred is the model's argmax class.  The file is written atomically —
either the complete CSV appears at ``out_path`` or nothing does.
"""

from __future__ import annotations

import csv
import os

import torch

from .config import ExtractorConfig
from .data import load_split
from .model import load_checkpoint, save_checkpoint, train_model


def _softmax_rows(model, images, batch_size):
    outs = []
    with torch.no_grad():
        for start in range(0, images.shape[0], batch_size):
            logits = model(images[start:start + batch_size])
            outs.append(torch.softmax(logits, dim=1))
    return torch.cat(outs).numpy() if outs else None


def extract(cfg: ExtractorConfig) -> int:
    """Extract embeddings per cfg; returns the number of rows written.

    With a checkpoint the model (and its class list) is loaded and only
    inference runs; excluded classes are merely dropped from the output.
    Without one, a model is trained on the kept classes of the train
    split, so exclusion also removes those classes from training — the
    softmax width shrinks accordingly.
    """
    images, labels = load_split(cfg.dataset, cfg.split, cfg.data_root)
    excluded = set(cfg.exclude)
    kept = [i for i, lab in enumerate(labels) if lab not in excluded]
    if cfg.limit is not None:
        kept = kept[:cfg.limit]
    if not kept:
        raise ValueError("no samples left after exclusion/limit")

    if cfg.checkpoint is not None:
        model, class_names = load_checkpoint(cfg.checkpoint)
    else:
        if cfg.split == "train":
            tr_images, tr_labels = images, labels
        else:
            tr_images, tr_labels = load_split(cfg.dataset, "train",
                                              cfg.data_root)
        class_names = sorted({lab for lab in tr_labels if lab not in excluded})
        if len(class_names) < 2:
            raise ValueError("need at least two classes to train on")
        index = {name: i for i, name in enumerate(class_names)}
        tr_kept = [i for i, lab in enumerate(tr_labels) if lab not in excluded]
        targets = torch.tensor([index[tr_labels[i]] for i in tr_kept])
        model = train_model(tr_images[tr_kept], targets, len(class_names),
                            tr_images.shape[-1], epochs=cfg.epochs,
                            batch_size=cfg.batch_size, seed=cfg.seed)
        if cfg.save_checkpoint is not None:
            save_checkpoint(cfg.save_checkpoint, model, class_names)

    probs = _softmax_rows(model, images[kept], cfg.batch_size)

    tmp = cfg.out_path + ".tmp"
    try:
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "label", "pred"]
                            + [f"d{i}" for i in range(len(class_names))])
            for row_probs, i in zip(probs, kept):
                pred = class_names[int(row_probs.argmax())]
                writer.writerow([str(i), labels[i], pred]
                                + [repr(float(v)) for v in row_probs])
        os.replace(tmp, cfg.out_path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)
    return len(kept)
