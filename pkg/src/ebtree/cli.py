"""Command-line front end: embeddings in, trees/explanations/verdicts out.

Subcommands cover the whole pipeline: `gen` makes a synthetic embedding
file, `build` turns embeddings into a tree file, `classify`/`fidelity`
evaluate it, `project`/`export-dot` render boundary views, and `detect`
streams points through the conformal novelty detector.  Every command is
deterministic given its inputs and --seed.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .ann_index import LshConfig
from .core_model import classify
from .errors import EbTreeError
from .explain import boundary_projection, explain_prediction, export_dot
from .fileformats import (
    explanation_record,
    load_embeddings,
    load_tree,
    save_embeddings,
    save_tree,
    segment_record,
    verdict_record,
    write_jsonl,
)
from .margin_ranking import MarginFitConfig, fit_one_vs_all
from .novelty import detect_stream, route_training_points, savings_ratio
from .stitching import (
    BuildConfig,
    build_basic_boundary_tree,
    build_eb_tree,
    error_rate,
    fidelity,
    prediction_view,
)
from .testkit import SyntheticSpec, generate


def cmd_build(args) -> int:
    dataset, predictions = load_embeddings(args.embeddings)
    started = time.perf_counter()
    if args.baseline:
        tree = build_basic_boundary_tree(dataset, predictions,
                                         shuffle_seed=args.seed)
    else:
        margin_cfg = MarginFitConfig(C=args.c, seed=args.seed)
        cfg = BuildConfig(
            k=args.k,
            lsh=LshConfig(
                num_tables=args.lsh_tables,
                hashes_per_table=args.lsh_hashes,
                bucket_width=args.lsh_width,
                seed=args.seed,
                segments=args.segments,
            ),
            distance_mode=args.distance_mode,
            seed=args.seed,
            margin=margin_cfg,
        )
        if len(set(predictions.values())) >= 2:
            planes = fit_one_vs_all(prediction_view(dataset, predictions),
                                    margin_cfg)
        else:
            planes = []  # build_eb_tree degrades to a single-node tree
        tree = build_eb_tree(dataset, predictions, planes, cfg)
    elapsed = time.perf_counter() - started
    save_tree(tree, args.out)
    print(f"nodes={len(tree)} training_points={len(dataset)} "
          f"method={tree.method} build_seconds={elapsed:.2f}")
    return 0


def cmd_classify(args) -> int:
    tree = load_tree(args.tree)
    dataset, _ = load_embeddings(args.input)
    records = []
    for point in dataset:
        if args.explain:
            records.append(explanation_record(explain_prediction(tree, point)))
        else:
            label, _ = classify(tree, point.embedding)
            records.append({"query_id": point.id, "predicted_label": label})
    write_jsonl(records, args.out)
    print(f"classified={len(records)}")
    return 0


def cmd_fidelity(args) -> int:
    tree = load_tree(args.tree)
    dataset, predictions = load_embeddings(args.input)
    macro = fidelity(tree, dataset, predictions, average="macro")
    micro = fidelity(tree, dataset, predictions, average="micro")
    err = error_rate(tree, dataset)
    print(f"macro_f={macro:.6f} micro_f={micro:.6f} error_rate={err:.6f}")
    return 0


def cmd_project(args) -> int:
    tree = load_tree(args.tree)
    ordering = "boundary_distance" if args.order_by_margin else "pca"
    segment = boundary_projection(tree, args.class_a, args.class_b,
                                  ordering=ordering)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(segment_record(segment), sort_keys=True,
                            separators=(",", ":")) + "\n")
    if args.dot:
        highlight = set()
        for a, b, _ in segment.pairs:
            highlight.add((a, b) if tree.nodes[b].parent == a else (b, a))
        with open(args.dot, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(export_dot(tree, highlight=highlight))
    print(f"pairs={len(segment.pairs)} classes={args.class_a},{args.class_b}")
    return 0


def cmd_export_dot(args) -> int:
    if (args.path_for is None) != (args.input is None):
        raise ValueError("--path-for and --input must be given together")
    tree = load_tree(args.tree)
    explanation = None
    if args.path_for is not None:
        dataset, _ = load_embeddings(args.input)
        try:
            point = dataset[args.path_for]
        except KeyError:
            raise ValueError(
                f"id {args.path_for!r} not found in {args.input}") from None
        explanation = explain_prediction(tree, point)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(export_dot(tree, explanation=explanation))
    print(f"nodes={len(tree)} highlighted={'yes' if explanation else 'no'}")
    return 0


def cmd_detect(args) -> int:
    tree = load_tree(args.tree)
    train, _ = load_embeddings(args.train)
    stream, _ = load_embeddings(args.stream)
    cohorts = route_training_points(tree, train, tau=args.tau, stat=args.stat)
    verdicts = detect_stream(tree, cohorts, stream.points,
                             threshold=args.threshold,
                             min_support=args.min_support)
    write_jsonl((verdict_record(v) for v in verdicts), args.out)
    novel = sum(v.is_novel for v in verdicts)
    thin = sum(v.insufficient_support for v in verdicts)
    savings = savings_ratio(verdicts, len(train))
    print(f"novel={novel}/{len(verdicts)} insufficient_support={thin} "
          f"savings_ratio={savings:.4f}")
    return 0


def cmd_gen(args) -> int:
    spec = SyntheticSpec(
        num_classes=args.classes,
        points_per_class=args.per_class,
        cluster_separation=args.sep,
        noise_sigma=args.sigma,
        seed=args.seed,
    )
    data = generate(spec)
    save_embeddings(data.dataset, data.predictions, args.out)
    print(f"wrote={len(data.dataset)} classes={args.classes} "
          f"dimension={data.dataset.dimension}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ebtree",
        description="Compress a classifier's decision boundaries into an "
                    "explicable boundary tree and query it.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a tree from an embedding file")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=32,
                   help="candidates fetched per stitching step")
    p.add_argument("--c", type=float, default=10.0,
                   help="soft-margin penalty for the ranking hyperplanes")
    p.add_argument("--lsh-tables", type=int, default=8)
    p.add_argument("--lsh-hashes", type=int, default=4)
    p.add_argument("--lsh-width", type=float, default=1.0)
    p.add_argument("--segments", type=int, default=16)
    p.add_argument("--distance-mode", choices=["own", "min_all"],
                   default="own")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--baseline", action="store_true",
                   help="build the shuffled-stream baseline tree instead")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("classify", help="classify an embedding file")
    p.add_argument("--tree", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--explain", action="store_true",
                   help="emit full path explanations instead of labels")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("fidelity",
                       help="agreement with the input's pred column")
    p.add_argument("--tree", required=True)
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("project",
                       help="edges between two classes, ordered along the boundary")
    p.add_argument("--tree", required=True)
    p.add_argument("--class-a", required=True)
    p.add_argument("--class-b", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dot", default=None,
                   help="also write a DOT rendering with the pairs highlighted")
    p.add_argument("--order-by-margin", action="store_true",
                   help="order pairs by stored boundary distance instead of "
                        "the principal-component arrangement")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("export-dot", help="render the tree as Graphviz DOT")
    p.add_argument("--tree", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--path-for", default=None, metavar="ID",
                   help="highlight the traversal path of this query id")
    p.add_argument("--input", default=None,
                   help="embedding file containing --path-for")
    p.set_defaults(func=cmd_export_dot)

    p = sub.add_parser("detect", help="stream conformal novelty detection")
    p.add_argument("--tree", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--stream", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--min-support", type=int, default=5)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--stat", choices=["tv", "skl"], default="tv")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("gen", help="generate a synthetic embedding file")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--sep", type=float, default=4.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (EbTreeError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
