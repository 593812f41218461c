"""``selfevoc`` command line: run, eval, project, synth.

Exit codes: 0 success, 2 configuration or usage error, 1 runtime error.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .cleaning import clean_cluster, write_projection_csv
from .config import ConfigError, load_config
from .dataset import DatasetError, save_csv, synth_blobs
from .extractor import encode, load_extractor
from .metrics import evaluate
from .mlp import CheckpointError
from .numerics import ContractError
from .training import load_dataset, read_assignments, run


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="selfevoc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def config_flags(q):
        q.add_argument("--config", help="key = value config file")
        q.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override one config key (repeatable)")

    r = sub.add_parser("run", help="train and cluster; writes a run directory")
    config_flags(r)
    r.add_argument("--out", required=True, help="run directory")

    e = sub.add_parser("eval", help="ACC / NMI / ARI of an assignment against labels")
    e.add_argument("assignments")
    e.add_argument("labels", help="IDX labels, sample_index,cluster CSV or one label per line")

    pr = sub.add_parser("project", help="2-D projection CSV per cluster from an extractor checkpoint")
    config_flags(pr)
    pr.add_argument("--checkpoint", required=True, help="extractor .sevc file")
    pr.add_argument("--assignments", required=True)
    pr.add_argument("--out", required=True, help="output CSV")

    s = sub.add_parser("synth", help="write a synthetic blob dataset as CSV (label last)")
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--n-per", type=int, default=200)
    s.add_argument("--dim", type=int, default=10)
    s.add_argument("--sep", type=float, default=0.3)
    s.add_argument("--noise", type=float, default=0.03)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output CSV")
    return p


def _cmd_run(args) -> int:
    cfg = load_config(args.config, args.overrides)
    result = run(cfg, args.out)
    last = result.history[-1]
    print(f"iterations={len(result.history)} stop={result.stop_reason} "
          f"acc={last.acc:.4f} nmi={last.nmi:.4f} ari={last.ari:.4f} out={args.out}")
    return 0


def _cmd_eval(args) -> int:
    pred = read_assignments(args.assignments)
    truth = read_assignments(args.labels)
    if len(pred) != len(truth):
        raise ConfigError(f"{len(pred)} assignments but {len(truth)} labels")
    scores = evaluate(pred, truth)
    print(" ".join(f"{k}={scores[k]!r}" for k in ("acc", "nmi", "ari")))
    return 0


def _cmd_project(args) -> int:
    cfg = load_config(args.config, args.overrides)
    ds = load_dataset(cfg)
    labels = read_assignments(args.assignments)
    if len(labels) != ds.n:
        raise ConfigError(f"{len(labels)} assignments for {ds.n} samples")
    Z = encode(load_extractor(args.checkpoint), ds.samples)
    results = []
    for j in np.unique(labels):
        ix = np.flatnonzero(labels == j)
        results.append(clean_cluster(Z[ix], ix, cfg.projection, cfg.tsne_perplexity,
                                     cfg.tsne_iters, cfg.min_pts, cfg.dbscan_eps,
                                     seed=cfg.seed + int(j)))
    write_projection_csv(args.out, results)
    print(f"wrote {sum(len(r.indices) for r in results)} points to {args.out}")
    return 0


def _cmd_synth(args) -> int:
    ds = synth_blobs(args.k, args.n_per, args.dim, args.sep, args.noise, args.seed)
    save_csv(ds, args.out)
    print(f"wrote {ds.n} x {ds.dim} samples to {args.out}")
    return 0


COMMANDS = {"run": _cmd_run, "eval": _cmd_eval, "project": _cmd_project, "synth": _cmd_synth}


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except ConfigError as exc:
        print(f"selfevoc: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.verb](args)
    except ConfigError as exc:
        print(f"selfevoc: config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, DatasetError, CheckpointError, ContractError, RuntimeError, ValueError) as exc:
        msg = " ".join(str(exc).split())
        print(f"selfevoc: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
