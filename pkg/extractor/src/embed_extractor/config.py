from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

KNOWN_DATASETS = ("mnist", "blobs")
KNOWN_SPLITS = ("train", "test")


@dataclass
class ExtractorConfig:
    """Everything one extraction run needs.

    ``exclude`` drops classes from the output entirely; when the model is
    trained in-run (no ``checkpoint``) the excluded classes are also left
    out of training, which is how an N-minus-one-class model for
    emerging-class experiments is produced.  ``limit`` caps the number of
    samples read from the split (dry runs).
    """

    dataset: str
    out_path: str
    split: str = "train"
    checkpoint: Optional[str] = None
    exclude: Sequence[str] = field(default_factory=tuple)
    batch_size: int = 256
    epochs: int = 2
    limit: Optional[int] = None
    data_root: str = "data"
    seed: int = 0
    save_checkpoint: Optional[str] = None

    def __post_init__(self):
        if self.dataset not in KNOWN_DATASETS:
            raise ValueError(
                f"unknown dataset {self.dataset!r}; choose from {KNOWN_DATASETS}")
        if self.split not in KNOWN_SPLITS:
            raise ValueError(
                f"unknown split {self.split!r}; choose from {KNOWN_SPLITS}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.limit is not None and self.limit < 1:
            raise ValueError("limit must be >= 1 when given")
        self.exclude = tuple(str(c) for c in self.exclude)
