"""Command line front end: ``embed-extract --dataset mnist --out emb.csv``."""

from __future__ import annotations

import argparse
import sys

from .config import KNOWN_DATASETS, KNOWN_SPLITS, ExtractorConfig
from .extract import extract


def build_parser():
    p = argparse.ArgumentParser(
        prog="embed-extract",
        description="Dump a classifier's softmax outputs as an embedding CSV.")
    p.add_argument("--dataset", required=True, choices=KNOWN_DATASETS)
    p.add_argument("--split", default="train", choices=KNOWN_SPLITS)
    p.add_argument("--out", required=True, help="embedding CSV to write")
    p.add_argument("--checkpoint",
                   help="load this trained model instead of training")
    p.add_argument("--save-checkpoint",
                   help="after training, save the model here")
    p.add_argument("--exclude", action="append", default=[], metavar="CLASS",
                   help="drop this class (repeatable); when training in-run "
                        "it is also left out of the model")
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--epochs", type=int, default=2)
    p.add_argument("--limit", type=int,
                   help="stop after this many samples (dry runs)")
    p.add_argument("--data-root", default="data")
    p.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExtractorConfig(
            dataset=args.dataset,
            split=args.split,
            out_path=args.out,
            checkpoint=args.checkpoint,
            exclude=args.exclude,
            batch_size=args.batch_size,
            epochs=args.epochs,
            limit=args.limit,
            data_root=args.data_root,
            seed=args.seed,
            save_checkpoint=args.save_checkpoint,
        )
        rows = extract(cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {rows} rows to {cfg.out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
