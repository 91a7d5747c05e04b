"""Command line interface: ``pldisagree <command> ...``.

Exit status is 0 on success, 1 when a command's contract is violated
(oracle mismatch, undefined metric or correlation), and 2 for unusable
input (bad arguments, unreadable files).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import logio
from .estimators import DisagreementEstimator, normalize_metric, normalize_subset
from .oracle import DEFAULT_TOLERANCE, run_oracle
from .sim import SimConfig, ctr_by_rank, generate_model_zoo, simulate_logs
from .sweep import compare, read_sweep_csv, run_sweep, write_sweep_csv

log = logging.getLogger("pldisagree")

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2


class _ModelFile:
    def __init__(self, path):
        self.path = path
        self.name = os.path.splitext(os.path.basename(path))[0]

    def __call__(self):
        return logio.read_model(self.path)


def _stem(path):
    root, ext = os.path.splitext(path)
    return root if ext else path


def _dump(obj, fh=None):
    fh = fh or sys.stdout
    json.dump(obj, fh, indent=2, sort_keys=True)
    fh.write("\n")


def _read_log(path):
    records, report = logio.read_logs(path)
    if report.n_rejected:
        log.warning("%s: %d records rejected at ingestion: %s", path, report.n_rejected, dict(report.rejected))
    return records, report


def cmd_simulate(args) -> int:
    config = SimConfig.load(args.config) if args.config else SimConfig()
    records, truth = simulate_logs(config)
    header = {"generator": "pldisagree.sim", "seed": config.seed, "config": config.to_dict()}
    logio.write_logs(records, args.out, header=header)
    truth_path = args.truth or _stem(args.out) + ".truth.json"
    with open(truth_path, "w", encoding="utf-8") as fh:
        _dump(truth.to_dict(), fh)
    models_dir = args.models_dir or _stem(args.out) + ".models"
    os.makedirs(models_dir, exist_ok=True)
    zoo_seed = [config.seed, 0x200]
    zoo = generate_model_zoo(
        truth.click_model.relevance, config.zoo_size, config.zoo_noise_levels,
        rng=zoo_seed, policy_affinity=truth.policy_affinity, bias_models=config.zoo_bias_models,
    )
    width = len(str(len(zoo) - 1))
    for k, model in enumerate(zoo):
        logio.write_model(model, os.path.join(models_dir, f"{k:0{width}d}-{model.name}.model"))
    log.info("wrote %d banners to %s, truth to %s, %d models to %s",
             len(records), args.out, truth_path, len(zoo), models_dir)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    records, report = _read_log(args.log)
    model = logio.read_model(args.model)
    est = DisagreementEstimator(
        metric=args.metric, subset=args.subset, resamples=args.resamples, random_state=args.seed
    ).fit(records)
    try:
        result = est.estimate(model)
    except KeyError as exc:
        log.error("%s", exc.args[0])
        return EXIT_INPUT
    out = {"model": model.name, "subset": normalize_subset(args.subset), **result.as_dict(),
           "ingestion": report.as_dict()}
    _dump(out)
    if not result.defined:
        log.error("metric undefined: no accepted sample (rejections: no pair %d, same product %d, tied %d)",
                  result.rejected_no_pair, result.rejected_same_product, result.rejected_tied_score)
        return EXIT_VIOLATION
    return EXIT_OK


def _split(values):
    out = []
    for v in values:
        out.extend(x for x in v.split(",") if x)
    return out


def cmd_sweep(args) -> int:
    records, _ = _read_log(args.log)
    paths = logio.list_model_files(args.models_dir)
    if not paths:
        log.error("no *.model files in %s", args.models_dir)
        return EXIT_INPUT
    rows = run_sweep(
        records, [_ModelFile(p) for p in paths], _split(args.metrics), _split(args.subsets),
        seed=args.seed, resamples=args.resamples,
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_sweep_csv(rows, fh)
    else:
        write_sweep_csv(rows, sys.stdout)
    return EXIT_OK


def cmd_compare(args) -> int:
    with open(args.csv, encoding="utf-8", newline="") as fh:
        rows = read_sweep_csv(fh)
    result = compare(rows, args.x, args.y)
    _dump(result.as_dict())
    if not result.defined:
        log.error("%s", result.note)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_oracle(args) -> int:
    report = run_oracle(args.max_n, args.trials, args.seed, args.tol)
    _dump(report.as_dict())
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_ctr_by_rank(args) -> int:
    records, _ = _read_log(args.log)
    rows = ctr_by_rank(records)
    fh = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        fh.write("banner_size,rank,impressions,clicks,ctr\n")
        for r in rows:
            fh.write(f"{r['banner_size']},{r['rank']},{r['impressions']},{r['clicks']},{r['ctr']!r}\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def _metric(value):
    try:
        return normalize_metric(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _subset(value):
    try:
        return normalize_subset(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _seed(value):
    seed = int(value)
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pldisagree",
        description="Position-bias robust ranking metrics on Plackett-Luce logged traffic.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic log, its ground truth and a model zoo")
    p.add_argument("--config", help="JSON file with simulator settings (defaults if omitted)")
    p.add_argument("--out", required=True, help="output log path")
    p.add_argument("--truth", help="ground-truth JSON path (default: <out>.truth.json)")
    p.add_argument("--models-dir", help="model zoo directory (default: <out>.models)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="estimate one metric for one model")
    p.add_argument("--log", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--metric", type=_metric, default="cd", help="pd, cd or cd-exact")
    p.add_argument("--subset", type=_subset, default="all", help="shuffled, non-shuffled or all")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--resamples", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="evaluate every model of a directory")
    p.add_argument("--log", required=True)
    p.add_argument("--models-dir", required=True)
    p.add_argument("--metrics", nargs="+", default=["pd,cd"], help="comma or space separated")
    p.add_argument("--subsets", nargs="+", default=["shuffled,non-shuffled"])
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--resamples", type=int, default=1)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="correlate two columns of a sweep CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--x", required=True, help="column as <metric>:<subset>, e.g. pd:shuffled")
    p.add_argument("--y", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", help="check the rank DP against brute-force enumeration")
    p.add_argument("--max-n", type=int, default=8)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--tol", type=float, default=DEFAULT_TOLERANCE)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("ctr-by-rank", help="impressions, clicks and CTR per banner size and rank")
    p.add_argument("--log", required=True)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_ctr_by_rank)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except (OSError, logio.LogFormatError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
