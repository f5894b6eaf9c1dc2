"""Command-line front door: fit, index, query, eval, synth.

Exit codes: 0 success, 2 usage or bad configuration or malformed data,
3 empty-result condition, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from dataclasses import dataclass

from . import container
from .errors import (
    ConfigError,
    EmptyResultError,
    HiersearchError,
    NumericalError,
    ValidationError,
)
from .evaluation import map_curve, write_map_csv, write_per_query_csv
from .parallel import default_threads
from .retrieval import build_index, query
from .store import load_embeddings
from .synthetic import SynthConfig, generate, write_dataset

# (threshold, alpha) pairs found by hyperparameter search on the reference
# datasets; cub-like is the default profile.
PROFILES = {
    "cub": (0.30, 3.0),
    "cifar": (0.20, 5.0),
    "diatom": (0.25, 3.0),
}

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EMPTY = 3
EXIT_NUMERICAL = 4


@dataclass
class RunConfig:
    threshold: float = 0.30
    alpha: float = 3.0
    variance_target: float = 0.95
    reg_epsilon: float = 1e-3
    threads: int = 1

    def validate(self) -> None:
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be non-negative, got {self.alpha}")
        if not 0.0 < self.variance_target <= 1.0:
            raise ConfigError(
                f"variance-target must be in (0, 1], got {self.variance_target}"
            )
        if self.reg_epsilon < 0:
            raise ConfigError(
                f"reg-epsilon must be non-negative, got {self.reg_epsilon}"
            )
        if self.threads < 1:
            raise ConfigError(f"threads must be positive, got {self.threads}")


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Profile defaults first, explicit flags override."""
    config = RunConfig()
    profile = getattr(args, "profile", None)
    if profile:
        config.threshold, config.alpha = PROFILES[profile]
    for flag, attr in (
        ("threshold", "threshold"),
        ("alpha", "alpha"),
        ("variance_target", "variance_target"),
        ("reg_epsilon", "reg_epsilon"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(config, attr, value)
    config.threads = getattr(args, "threads", None) or default_threads()
    config.validate()
    return config


def cmd_fit(args: argparse.Namespace) -> int:
    from .pipeline import fit_model

    config = resolve_config(args)
    train = load_embeddings(args.train, format=args.format)
    if not train.is_fully_labeled():
        raise ValidationError("training set must be labeled")
    model = fit_model(
        train,
        threshold=config.threshold,
        variance_target=config.variance_target,
        reg_epsilon=config.reg_epsilon,
        threads=config.threads,
    )
    container.save_model(model, args.out)
    classes = len(model.tree.leaf_of_label)
    if classes == 1:
        print("warning: training set has a single class; "
              "the hierarchy is a lone leaf", file=sys.stderr)
    print(f"classes: {classes}")
    print(f"reduced dim: {model.pca.reduced_dim} "
          f"(of {model.pca.original_dim}, "
          f"{model.pca.explained_fraction:.4f} variance)")
    print(f"merge levels: {model.tree.levels_built}")
    print(f"tree nodes: {len(model.tree.nodes)}")
    print(f"model written to {args.out}")
    return EXIT_OK


def cmd_index(args: argparse.Namespace) -> int:
    model = container.load_model(args.model)
    database = load_embeddings(args.database, format=args.format)
    threads = args.threads or default_threads()
    index = build_index(
        model.pca, model.tree, model.leaf_gaussians, database, threads=threads
    )
    if model.label_names and index.database.label_names is None:
        index.database.label_names = model.label_names
    container.save_index(index, args.out)
    print(f"records indexed: {len(index.database)}")
    histogram = Counter(index.leaf_assignment.values())
    for leaf in sorted(histogram):
        print(f"leaf {leaf}: {histogram[leaf]}")
    print(f"index written to {args.out}")
    return EXIT_OK


def cmd_query(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    index = container.load_index(args.index)
    queries = load_embeddings(args.queries, format=args.format)
    payload = []
    failures = 0
    for rec_id, vector in zip(queries.ids, queries.vectors):
        try:
            results = query(index, vector, args.k, config.alpha)
        except ValidationError as exc:
            failures += 1
            print(f"query {int(rec_id)}: {exc}", file=sys.stderr)
            continue
        payload.append((int(rec_id), results))
    if args.output == "json":
        doc = {
            "alpha": config.alpha,
            "k": args.k,
            "queries": [
                {
                    "query_id": qid,
                    "results": [
                        {
                            "record_id": r.record_id,
                            "combined": r.combined,
                            "cosine": r.cosine_part,
                            "hierarchical": r.hierarchical_part,
                            "leaf": r.leaf,
                        }
                        for r in results
                    ],
                }
                for qid, results in payload
            ],
        }
        print(json.dumps(doc, indent=2))
    else:
        for qid, results in payload:
            for rank, r in enumerate(results, start=1):
                print(
                    f"query {qid} rank {rank}: record {r.record_id} "
                    f"D={r.combined:.6f} cosine={r.cosine_part:.6f} "
                    f"hier={r.hierarchical_part:.6f} leaf={r.leaf}"
                )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    index = container.load_index(args.index)
    queries = load_embeddings(args.queries, format=args.format)
    if not index.database.is_fully_labeled() or len(index.database) == 0:
        raise ValidationError(
            "evaluation needs a fully labeled, non-empty indexed database"
        )
    database_labels = {
        int(rid): int(label)
        for rid, label in zip(index.database.ids, index.database.labels)
    }
    ks = [int(k) for k in args.ks.split(",") if k.strip()]
    report = map_curve(
        index,
        queries,
        database_labels,
        ks,
        config.alpha,
        exclude_self=args.exclude_self,
        config_echo={
            "threshold": index.tree.threshold_used,
            "alpha": config.alpha,
            "variance_target": None,  # not recorded in the index container
            "seed": None,
        },
    )
    write_map_csv(report, args.csv_out)
    if args.per_query_csv:
        write_per_query_csv(report, args.per_query_csv)
    for k, value in zip(report.ks, report.map_at_k):
        print(f"MAP@{k} = {value:.6f}")
    print(f"curve written to {args.csv_out}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    config = SynthConfig(
        seed=args.seed,
        dim=args.dim,
        groups=args.groups,
        classes_per_group=args.classes_per_group,
        samples_per_class=args.samples_per_class,
        within_group_mean_spread=args.within_spread,
        between_group_mean_spread=args.between_spread,
        class_std=args.class_std,
        query_noise_std=args.query_noise_std,
        database_per_class=args.database_per_class,
        queries_per_class=args.queries_per_class,
    )
    train, database, queries, truth = generate(config)
    paths = write_dataset(args.out_dir, train, database, queries, truth,
                          format=args.format)
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiersearch",
        description="hierarchy-aware embedding retrieval",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, alpha: bool = False) -> None:
        p.add_argument("--profile", choices=sorted(PROFILES),
                       help="preset (threshold, alpha) pair")
        p.add_argument("--threshold", type=float, default=None)
        if alpha:
            p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--variance-target", type=float, default=None,
                       dest="variance_target")
        p.add_argument("--reg-epsilon", type=float, default=None,
                       dest="reg_epsilon")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--format", choices=["binary", "csv"], default="binary")

    p_fit = sub.add_parser("fit", help="fit PCA, Gaussians and hierarchy")
    p_fit.add_argument("--train", required=True)
    p_fit.add_argument("--out", required=True)
    add_common(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_index = sub.add_parser("index", help="index a database with a model")
    p_index.add_argument("--model", required=True)
    p_index.add_argument("--database", required=True)
    p_index.add_argument("--out", required=True)
    p_index.add_argument("--threads", type=int, default=None)
    p_index.add_argument("--format", choices=["binary", "csv"], default="binary")
    p_index.set_defaults(func=cmd_index)

    p_query = sub.add_parser("query", help="rank the database for each query")
    p_query.add_argument("--index", required=True)
    p_query.add_argument("--queries", required=True)
    p_query.add_argument("--k", type=int, required=True)
    p_query.add_argument("--output", choices=["text", "json"], default="text")
    add_common(p_query, alpha=True)
    p_query.set_defaults(func=cmd_query)

    p_eval = sub.add_parser("eval", help="MAP@k curve over labeled queries")
    p_eval.add_argument("--index", required=True)
    p_eval.add_argument("--queries", required=True)
    p_eval.add_argument("--ks", required=True,
                        help="comma-separated increasing cutoffs, e.g. 1,5,10")
    p_eval.add_argument("--csv-out", required=True, dest="csv_out")
    p_eval.add_argument("--per-query-csv", default=None, dest="per_query_csv")
    p_eval.add_argument("--exclude-self", action="store_true",
                        dest="exclude_self",
                        help="drop the identical-id record from each query's results")
    add_common(p_eval, alpha=True)
    p_eval.set_defaults(func=cmd_eval)

    p_synth = sub.add_parser("synth", help="generate planted-hierarchy data")
    p_synth.add_argument("--out-dir", required=True, dest="out_dir")
    p_synth.add_argument("--seed", type=int, required=True)
    p_synth.add_argument("--dim", type=int, default=16)
    p_synth.add_argument("--groups", type=int, default=4)
    p_synth.add_argument("--classes-per-group", type=int, default=5,
                         dest="classes_per_group")
    p_synth.add_argument("--samples-per-class", type=int, default=300,
                         dest="samples_per_class")
    p_synth.add_argument("--within-spread", type=float, default=0.3,
                         dest="within_spread")
    p_synth.add_argument("--between-spread", type=float, default=6.0,
                         dest="between_spread")
    p_synth.add_argument("--class-std", type=float, default=1.0,
                         dest="class_std")
    p_synth.add_argument("--query-noise-std", type=float, default=0.0,
                         dest="query_noise_std")
    p_synth.add_argument("--database-per-class", type=int, default=None,
                         dest="database_per_class")
    p_synth.add_argument("--queries-per-class", type=int, default=None,
                         dest="queries_per_class")
    p_synth.add_argument("--format", choices=["binary", "csv"], default="binary")
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EmptyResultError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (HiersearchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
