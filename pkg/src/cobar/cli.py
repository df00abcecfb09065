"""Command-line front-end for reproducible experiments.

Two subcommands:

* ``evaluate`` runs seeded k-fold cross-validation for the selected
  algorithms, prints the comparison table, and optionally writes the full
  machine-readable JSON report.
* ``predict`` trains on the whole file and explains a single prediction:
  blended value, user mean, chosen cluster (with member count and interval
  half-width) or the fallback that fired.

Clustering holds an n x n distance matrix, so datasets with more than
``MAX_CLUSTERING_USERS`` users must be reduced with ``--max-users``
(seeded user subsampling).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import kernels
from .baselines import KnnConfig, MfConfig
from .clustering import clusterable_users
from .core import CobarConfig, CobarModel, Fallback
from .data import ParseError, parse_ratings, subsample_users
from .evaluation import ALGORITHM_NAMES, build_algorithms, run_cross_validation

MAX_CLUSTERING_USERS = 3000


def _add_data_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="rating file: user<delim>item<delim>rating per line")
    parser.add_argument(
        "--delimiter",
        default="tab",
        help="field delimiter: 'tab', 'comma', 'semicolon', 'space' or a literal string (default: tab)",
    )
    parser.add_argument("--skip-header", action="store_true", help="ignore the first line")
    parser.add_argument("--max-users", type=int, default=None, metavar="N",
                        help="subsample to at most N users before anything else")
    parser.add_argument("--subsample-seed", type=int, default=7, metavar="S",
                        help="seed for --max-users subsampling (default: 7)")


def _add_model_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--gamma", type=float, default=0.5,
                        help="weight of the user mean in the blend (default: 0.5)")
    parser.add_argument("--confidence", type=float, default=0.95,
                        help="confidence level for the cluster intervals (default: 0.95)")
    parser.add_argument("--no-clamp", action="store_true",
                        help="do not clip predictions to the training rating scale")
    parser.add_argument("--knn-k", type=int, default=30, help="kNN neighborhood size (default: 30)")
    parser.add_argument("--mf-factors", type=int, default=10, help="MF latent factors (default: 10)")
    parser.add_argument("--mf-lr", type=float, default=0.01, help="MF learning rate (default: 0.01)")
    parser.add_argument("--mf-reg", type=float, default=0.015, help="MF L2 regularization (default: 0.015)")
    parser.add_argument("--mf-epochs", type=int, default=30, help="MF SGD epochs (default: 30)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cobar", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="k-fold cross-validated comparison")
    _add_data_args(ev)
    _add_model_args(ev)
    ev.add_argument("--algos", default=",".join(ALGORITHM_NAMES),
                    help=f"comma-separated algorithms from {{{','.join(ALGORITHM_NAMES)}}} (default: all)")
    ev.add_argument("--folds", type=int, default=10, help="cross-validation folds (default: 10)")
    ev.add_argument("--seed", type=int, default=42, help="fold-split and MF seed (default: 42)")
    ev.add_argument("--wilcoxon-level", type=float, default=0.99,
                    help="confidence level for the significance tests (default: 0.99)")
    ev.add_argument("--out", default=None, metavar="PATH", help="write the JSON report here")

    pr = sub.add_parser("predict", help="explain one prediction, trained on the full file")
    _add_data_args(pr)
    _add_model_args(pr)
    pr.add_argument("--user", required=True, help="external user id")
    pr.add_argument("--item", required=True, help="external item id")
    pr.add_argument("--dendrogram-out", default=None, metavar="PATH",
                    help="also export the merge tree as 'left right height new_id' lines")
    return parser


def _load_dataset(args):
    path = Path(args.data)
    if not path.exists():
        raise FileNotFoundError(f"rating file not found: {path}")
    dataset = parse_ratings(path, delimiter=args.delimiter, skip_header=args.skip_header, name=path.name)
    if args.max_users is not None:
        dataset = subsample_users(dataset, args.max_users, args.subsample_seed)
    return dataset


def _check_clustering_budget(dataset, needs_clustering: bool) -> None:
    if not needs_clustering:
        return
    n = len(clusterable_users(dataset))
    if n > MAX_CLUSTERING_USERS:
        raise SystemExit(
            f"error: {n} users exceed the clustering budget of {MAX_CLUSTERING_USERS} "
            f"(the hierarchy needs an n x n distance matrix); "
            f"rerun with --max-users {MAX_CLUSTERING_USERS} (seeded via --subsample-seed)"
        )


def _cobar_config(args) -> CobarConfig:
    return CobarConfig(gamma=args.gamma, confidence_level=args.confidence, clamp=not args.no_clamp)


def cmd_evaluate(args) -> int:
    dataset = _load_dataset(args)
    names = [n.strip() for n in args.algos.split(",") if n.strip()]
    _check_clustering_budget(dataset, needs_clustering="cobar" in names)
    algorithms = build_algorithms(
        names,
        cobar_config=_cobar_config(args),
        knn_config=KnnConfig(k=args.knn_k),
        mf_config=MfConfig(
            factors=args.mf_factors,
            learning_rate=args.mf_lr,
            regularization=args.mf_reg,
            epochs=args.mf_epochs,
            seed=args.seed,
        ),
        clamp=not args.no_clamp,
    )
    metadata = {
        "data_path": str(args.data),
        "gamma": args.gamma,
        "confidence_level": args.confidence,
        "clamp": not args.no_clamp,
        "knn_k": args.knn_k,
        "mf": {"factors": args.mf_factors, "learning_rate": args.mf_lr,
               "regularization": args.mf_reg, "epochs": args.mf_epochs},
        "max_users": args.max_users,
        "subsample_seed": args.subsample_seed if args.max_users is not None else None,
        "kernel_backend": kernels.BACKEND,
    }
    report = run_cross_validation(
        dataset,
        algorithms,
        folds=args.folds,
        seed=args.seed,
        wilcoxon_level=args.wilcoxon_level,
        metadata=metadata,
    )
    print(report.format_table())
    if args.out:
        report.save(args.out)
        print(f"\nreport written to {args.out}")
    return 0


def cmd_predict(args) -> int:
    dataset = _load_dataset(args)
    _check_clustering_budget(dataset, needs_clustering=True)
    model = CobarModel(_cobar_config(args)).fit(dataset)
    if args.dendrogram_out:
        model.dendrogram.save(args.dendrogram_out)
        print(f"dendrogram written to {args.dendrogram_out}")
    user = dataset.user_index(args.user)
    item = dataset.item_index(args.item)
    pred = model.predict_detailed(user, item)

    print(f"user {args.user!r} x item {args.item!r}")
    print(f"  predicted rating : {pred.value:.4f}")
    if pred.user_mean is not None:
        print(f"  user mean        : {pred.user_mean:.4f}")
    if pred.fallback is Fallback.NONE:
        print(f"  cluster mean     : {pred.cluster_mean:.4f}")
        print(f"  chosen cluster   : node {pred.chosen_node} ({pred.cluster_size} users)")
        print(f"  interval half-width at {model.config.confidence_level:.0%}: {pred.half_width:.4f}")
    else:
        print(f"  fallback         : {pred.fallback.value}")
        if pred.fallback is Fallback.COLD_USER:
            print(f"  global mean      : {model.user_stats.global_mean:.4f}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "evaluate":
            return cmd_evaluate(args)
        return cmd_predict(args)
    except (FileNotFoundError, ParseError, KeyError, ValueError) as exc:
        message = exc.args[0] if exc.args else str(exc)
        print(f"error: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
