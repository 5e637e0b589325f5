"""Command-line interface.

Subcommands: run, tune, model (save/load/inspect), dataset (inspect).
Exit codes: 0 success, 2 config error, 3 data/format error, 4 numerics error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .classifier import TrainConfig
from .clustering import AggVarConfig
from .curiosity import NoveltyConfig
from .errors import CentroidCLError
from .features import read_feature_file
from .harness import (
    PROTOCOLS,
    SELECTION_STRATEGIES,
    ProtocolConfig,
    run_with_state,
    tune_threshold,
)
from .modelio import load_model, save_model
from .rehearsal import RehearsalConfig
from .rng import subseed


def _add_run_parser(subparsers) -> None:
    p = subparsers.add_parser("run", help="execute one protocol run and write a JSON report")
    p.add_argument("--features", required=True, help="CBFV feature file")
    p.add_argument("--protocol", required=True, choices=PROTOCOLS)
    p.add_argument("--threshold", required=True, type=float,
                   help="clustering distance threshold (inf allowed)")
    p.add_argument("--classes-per-increment", type=int)
    p.add_argument("--shots", type=int, help="train shots per class (fsil)")
    p.add_argument("--chunk-size", type=int, help="stream chunk size (online_stream)")
    p.add_argument("--label-budget", type=int,
                   help="labels per increment/chunk (active_learning, online_stream)")
    p.add_argument("--pool-size", type=int,
                   help="unlabeled pool size per increment (active_learning)")
    p.add_argument("--selection", choices=SELECTION_STRATEGIES, default="curiosity")
    p.add_argument("--exemplars-per-class", type=int, default=40)
    p.add_argument("--epsilon", type=float, default=1e-4,
                   help="variance floor added when sampling pseudo-exemplars")
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--cov", choices=("diagonal", "full"), default="diagonal")
    p.add_argument("--unknown-threshold", type=float,
                   help="novelty distance threshold (defaults to --threshold)")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True, help="path for the canonical JSON report")
    p.add_argument("--save-model", help="also save the final model (CBM1)")


def _add_tune_parser(subparsers) -> None:
    p = subparsers.add_parser("tune", help="cross-validate threshold candidates")
    p.add_argument("--features", required=True)
    p.add_argument("--candidates", required=True,
                   help="comma-separated thresholds, e.g. 0.5,1,2,inf")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--classes-per-increment", type=int,
                   help="tune on the first increment of this split (default: all classes)")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--cov", choices=("diagonal", "full"), default="diagonal")
    p.add_argument("--exemplars-per-class", type=int, default=40)
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=64)


def _add_model_parser(subparsers) -> None:
    p = subparsers.add_parser("model", help="model-file utilities")
    actions = p.add_subparsers(dest="action", required=True)
    save = actions.add_parser("save", help="re-encode a model file (validates both ends)")
    save.add_argument("src")
    save.add_argument("dst")
    load = actions.add_parser("load", help="load a model file and print a summary")
    load.add_argument("path")
    inspect = actions.add_parser("inspect", help="print model contents as JSON")
    inspect.add_argument("path")


def _add_dataset_parser(subparsers) -> None:
    p = subparsers.add_parser("dataset", help="feature-file utilities")
    actions = p.add_subparsers(dest="action", required=True)
    inspect = actions.add_parser("inspect", help="print feature-file stats as JSON")
    inspect.add_argument("path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="centroidcl")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_parser(sub)
    _add_tune_parser(sub)
    _add_model_parser(sub)
    _add_dataset_parser(sub)
    return parser


def _cmd_run(args) -> int:
    dataset = read_feature_file(args.features)
    novelty = None
    if args.protocol == "online_stream":
        threshold = (
            args.unknown_threshold if args.unknown_threshold is not None else args.threshold
        )
        novelty = NoveltyConfig(threshold)
    config = ProtocolConfig(
        protocol=args.protocol,
        aggvar=AggVarConfig(args.threshold, args.cov),
        rehearsal=RehearsalConfig(
            args.exemplars_per_class, args.epsilon, seed=subseed(args.seed, "rehearsal")
        ),
        train=TrainConfig(
            args.lr, args.epochs, args.batch, seed=subseed(args.seed, "train")
        ),
        novelty=novelty,
        classes_per_increment=args.classes_per_increment,
        shots_per_class=args.shots,
        chunk_size=args.chunk_size,
        label_budget_per_chunk=args.label_budget,
        pool_size=args.pool_size,
        train_fraction=args.train_fraction,
        selection=args.selection,
        master_seed=args.seed,
    )
    report, store, classifier = run_with_state(config, dataset)
    Path(args.out).write_text(report.to_canonical_json() + "\n")
    if args.save_model:
        save_model(store, classifier, args.save_model)
    print(
        f"{args.protocol}: {len(report.increments)} increments, "
        f"final accuracy {report.final_accuracy:.4f}, "
        f"average incremental accuracy {report.average_incremental_accuracy:.4f}"
    )
    print(f"report written to {args.out}", file=sys.stderr)
    print(f"wall time: {report.wall_time_s:.2f}s", file=sys.stderr)
    return 0


def _cmd_tune(args) -> int:
    from .features import split_class_incremental

    dataset = read_feature_file(args.features)
    candidates = [float(c) for c in args.candidates.split(",") if c.strip()]
    per_increment = args.classes_per_increment
    if per_increment is None:
        per_increment = len(dataset.classes_present())
    increments, _ = split_class_incremental(
        dataset, per_increment, args.train_fraction, subseed(args.seed, "split")
    )
    first = increments[0]
    result = tune_threshold(
        first,
        candidates,
        args.folds,
        args.seed,
        covariance_mode=args.cov,
        rehearsal=RehearsalConfig(
            args.exemplars_per_class, args.epsilon, seed=subseed(args.seed, "rehearsal")
        ),
        train_config=TrainConfig(args.lr, args.epochs, args.batch, seed=subseed(args.seed, "train")),
    )
    print(json.dumps({
        "best_threshold": result.best_threshold,
        "candidates": [{"threshold": t, "accuracy": a} for t, a in result.candidate_accuracies],
    }, indent=2))
    return 0


def _model_summary(store, classifier) -> dict:
    return {
        "dim": store.dim,
        "covariance_mode": store.config.covariance_mode,
        "distance_threshold": store.config.distance_threshold,
        "n_classes": len(store.models),
        "n_clusters": store.n_clusters,
        "samples_seen": store.total_samples(),
        "classes": [
            {
                "class_id": cid,
                "clusters": len(store.models[cid].clusters),
                "samples": store.models[cid].total_count,
            }
            for cid in store.class_ids
        ],
        "classifier": None
        if classifier is None
        else {
            "classes": [int(c) for c in classifier.class_ids],
            "l2_normalize": classifier.normalize,
        },
    }


def _cmd_model(args) -> int:
    if args.action == "save":
        store, classifier = load_model(args.src)
        save_model(store, classifier, args.dst)
        print(f"re-encoded {args.src} -> {args.dst}")
        return 0
    store, classifier = load_model(args.path)
    summary = _model_summary(store, classifier)
    if args.action == "inspect":
        print(json.dumps(summary, indent=2, default=str))
    else:
        print(
            f"ok: {summary['n_classes']} classes, {summary['n_clusters']} clusters, "
            f"dim {summary['dim']}, classifier "
            f"{'present' if classifier is not None else 'absent'}"
        )
    return 0


def _cmd_dataset(args) -> int:
    dataset = read_feature_file(args.path)
    counts = {name: 0 for name in dataset.class_names}
    for label in dataset.labels:
        counts[dataset.class_names[label]] += 1
    print(json.dumps({
        "n_samples": len(dataset),
        "dim": dataset.dim,
        "n_classes": dataset.n_classes,
        "per_class_counts": counts,
    }, indent=2))
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "tune": _cmd_tune,
    "model": _cmd_model,
    "dataset": _cmd_dataset,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CentroidCLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
