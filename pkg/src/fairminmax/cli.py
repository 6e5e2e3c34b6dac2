"""Command-line entry point: ``python -m fairminmax <command> ...``.

Exit status is 0 on success, 1 on a runtime or numeric failure and 2 on a
usage, configuration or input-format problem.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from fairminmax.config import ConfigError, RunConfig, load_config, parse_floats, parse_ints
from fairminmax.data import DataError, generate_moons, write_csv
from fairminmax.frontier import (
    LEFT_EXTENSIONS,
    FrontierError,
    RangeError,
    append_jsonl,
    summary_record,
    write_frontier_csv,
)
from fairminmax.metrics import PredictionSet, summarize
from fairminmax.nn import DenseNet
from fairminmax.runner import (
    RecordFormatError,
    datasets_for,
    frontier_from_records,
    low_bias_threshold,
    make_run_id,
    read_records,
    record_dict,
    record_from_result,
    sweep,
    write_history,
    write_records,
)
from fairminmax.trainer import NumericError, train_fair

log = logging.getLogger("fairminmax")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# -- helpers ------------------------------------------------------------------


def _config(args) -> RunConfig:
    if not args.config:
        raise UsageError("--config is required")
    return load_config(args.config)


def _out_dir(args, cfg: RunConfig | None = None) -> Path:
    if getattr(args, "out", None):
        out = Path(args.out)
    elif cfg is not None:
        out = cfg.resolve(cfg.out_dir)
    else:
        raise UsageError("--out is required")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _grid(text, parse, flag):
    try:
        values = parse(text)
    except ValueError:
        raise UsageError(f"{flag}: cannot parse {text!r}") from None
    if not values:
        raise UsageError(f"{flag}: empty list")
    return values


def _eps_range(text):
    if text is None:
        return None
    vals = _grid(text, parse_floats, "--eps-range")
    if len(vals) != 2 or not vals[1] > vals[0]:
        raise UsageError(f"--eps-range: expected 'lo,hi' with lo < hi, got {text!r}")
    return vals


def _emit(record: dict) -> None:
    print(json.dumps(record, sort_keys=True))


def _frontier_outputs(records, out: Path, zeta, eps_range, left, **extra) -> dict:
    ok = [r for r in records if r.ok]
    if not ok:
        raise FrontierError("no successful run records to build a frontier from")
    if zeta is None:
        zeta = low_bias_threshold(ok)
        if zeta is None:
            log.warning("no lambda = 0 runs and no --zeta; low-bias AUC not computed")
            zeta = 0.0
    fr = frontier_from_records(ok, zeta)
    write_frontier_csv(fr, out / "frontier.csv")
    with open(out / "points.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epsilon", "acc", "lambda", "seed", "run_id"])
        for r in ok:
            w.writerow([repr(r.bias()), repr(r.accuracy), repr(r.lam), r.seed, r.run_id])
    summary = summary_record(fr, eps_range, left, n_records=len(ok), n_vertices=len(fr.vertices), **extra)
    append_jsonl(summary, out / "frontier.jsonl")
    return summary


# -- commands -----------------------------------------------------------------


def cmd_moon_gen(args) -> int:
    if args.n < 1:
        raise UsageError(f"--n must be positive, got {args.n}")
    if not args.noise >= 0:
        raise UsageError(f"--noise must be >= 0, got {args.noise}")
    ds = generate_moons(args.n, args.noise, seed=args.seed)
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(ds, path)
    log.info("wrote %d rows to %s", len(ds), path)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    train_cfg = cfg.train
    if args.lambda_grid:
        train_cfg = train_cfg.with_(lam=_grid(args.lambda_grid, parse_floats, "--lambda-grid")[0])
    if args.seed_list:
        train_cfg = train_cfg.with_(seed=_grid(args.seed_list, parse_ints, "--seed-list")[0])
    (name, (train, test)), = datasets_for(cfg).items()
    out = _out_dir(args, cfg)
    result = train_fair(train_cfg, train, test,
                        epoch_callback=lambda rec: log.info("epoch %d loss %.4f acc %.4f", rec["epoch"], rec["loss"], rec["test_accuracy"]))
    rec = record_from_result(name, result, test)
    run_dir = out / rec.run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    write_history(result.history, run_dir / "history.csv")
    result.classifier.save(run_dir / "classifier.fmm")
    for pair, critic in result.critics.items():
        critic.save(run_dir / f"critic_{pair.key}.fmm")
    summary = record_dict(rec)
    append_jsonl(summary, out / "summary.jsonl")
    _emit(summary)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    lambdas = _grid(args.lambda_grid, parse_floats, "--lambda-grid") if args.lambda_grid else cfg.lambdas
    seeds = _grid(args.seed_list, parse_ints, "--seed-list") if args.seed_list else cfg.seeds
    zeta = args.zeta if args.zeta is not None else cfg.zeta
    eps_range = _eps_range(args.eps_range)
    workers = args.workers or os.cpu_count() or 1
    data = datasets_for(cfg)
    out = _out_dir(args, cfg)
    records = sweep(cfg.train, lambdas, seeds, data, workers=workers)
    write_records(records, out / "records.csv")
    for r in records:
        append_jsonl(record_dict(r), out / "runs.jsonl")
    failed = [r for r in records if not r.ok]
    for r in failed:
        log.error("run %s failed: %s", r.run_id, r.error)
    if len(failed) == len(records):
        print(f"error: all {len(records)} runs failed", file=sys.stderr)
        return EXIT_RUNTIME
    summary = _frontier_outputs(records, out, zeta, eps_range, args.left_extension,
                                n_failed=len(failed), lambdas=list(lambdas), seeds=list(seeds))
    _emit(summary)
    return EXIT_OK


def cmd_frontier(args) -> int:
    records = []
    for path in args.records:
        if not Path(path).is_file():
            raise UsageError(f"records file {path} does not exist")
        records += read_records(path)
    if not records:
        raise UsageError("no records in the given files")
    out = _out_dir(args)
    summary = _frontier_outputs(records, out, args.zeta, _eps_range(args.eps_range), args.left_extension,
                                sources=[str(p) for p in args.records])
    _emit(summary)
    return EXIT_OK


METRIC_COLUMNS = ["run_id", "lambda", "seed", "accuracy", "delta_dp", "delta_eo"]


def cmd_metrics(args) -> int:
    cfg = _config(args)
    if not args.checkpoint:
        raise UsageError("--checkpoint is required")
    if not Path(args.checkpoint).is_file():
        raise UsageError(f"checkpoint {args.checkpoint} does not exist")
    try:
        net = DenseNet.load(args.checkpoint)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"cannot read checkpoint: {exc}") from None
    (name, (_, test)), = datasets_for(cfg).items()
    if net.layer_dims[0] != test.n_features:
        raise UsageError(f"checkpoint expects {net.layer_dims[0]} features, data has {test.n_features}")
    preds = PredictionSet(net.forward(test.features, cache=False)[:, 0], test.labels, test.groups,
                          cfg.train.threshold, test.n_groups)
    m = summarize(preds)
    cols = METRIC_COLUMNS + [f"auc_g{g}" for g in range(test.n_groups)]
    row = [make_run_id(name, cfg.train), repr(cfg.train.lam), cfg.train.seed,
           *(repr(m[k]) for k in ("accuracy", "delta_dp", "delta_eo")),
           *(repr(m[f"auc_g{g}"]) for g in range(test.n_groups))]
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(cols)
    writer.writerow(row)
    if args.out:
        out = _out_dir(args)
        path = out / "metrics.csv"
        new = not path.exists()
        with open(path, "a", newline="") as fh:
            w = csv.writer(fh)
            if new:
                w.writerow(cols)
            w.writerow(row)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairminmax", description="Fairness-regularised training with divergence critics.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moon-gen", help="write a two-moons dataset as CSV")
    p.add_argument("--n", type=int, default=15000)
    p.add_argument("--noise", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_moon_gen)

    def run_flags(p):
        p.add_argument("--config", required=True, help="INI run file")
        p.add_argument("--out", help="output directory (default: [output] dir)")
        p.add_argument("--lambda-grid", help="comma-separated lambdas")
        p.add_argument("--seed-list", help="comma-separated seeds")

    def frontier_flags(p):
        p.add_argument("--zeta", type=float, help="low-bias threshold; default is the mean lambda=0 bias")
        p.add_argument("--eps-range", help="'lo,hi' for fa_auc (default: 0 to the largest vertex bias)")
        p.add_argument("--left-extension", choices=LEFT_EXTENSIONS, default="zero")

    p = sub.add_parser("train", help="one training run")
    run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="lambda x seed grid, records and frontier")
    run_flags(p)
    frontier_flags(p)
    p.add_argument("--workers", type=int, help="parallel runs (default: CPU count)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("frontier", help="merge record CSVs into one frontier")
    p.add_argument("records", nargs="+", help="records.csv files")
    p.add_argument("--out", required=True, help="output directory")
    frontier_flags(p)
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("metrics", help="evaluate a saved classifier on the configured test split")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", help="also append the row to DIR/metrics.csv")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, RecordFormatError, DataError, RangeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, FrontierError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
