"""Single runs and lambda x seed sweeps, plus their on-disk records."""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from fairminmax.config import DataConfig, RunConfig, TrainConfig
from fairminmax.data import (
    ColumnSchema,
    Dataset,
    balance_undersample,
    generate_moons,
    load_csv,
    read_exported_csv,
    split,
    standardize,
)
from fairminmax.frontier import FAPoint, build_frontier
from fairminmax.metrics import PredictionSet, summarize
from fairminmax.trainer import TrainResult, train_fair

log = logging.getLogger(__name__)

METRIC_FIELDS = ("accuracy", "delta_dp", "delta_eo")


def prepare_data(dc: DataConfig, base_dir=None) -> tuple[Dataset, Dataset]:
    """Build, balance, split and standardise according to ``dc``."""
    if dc.source == "moon":
        ds = generate_moons(dc.n, dc.noise, seed=dc.seed)
    else:
        from pathlib import Path

        path = Path(dc.path)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        if dc.source == "exported":
            ds = read_exported_csv(path)
        else:
            schema = ColumnSchema(
                label=dc.label,
                sensitive=list(dc.sensitive),
                numeric=list(dc.numeric),
                categorical={c: [] for c in dc.categorical},
                label_positive=dc.label_positive,
                group_values={col: dict(pairs) for col, pairs in dc.group_map},
            )
            ds = load_csv(path, schema)
    if dc.balance:
        ds = balance_undersample(ds, seed=dc.seed)
    if dc.train_fraction is not None:
        train, test = split(ds, dc.train_fraction, seed=dc.split_seed)
    elif dc.n_train is not None and dc.n_train < len(ds):
        n_test = dc.n_test if dc.n_test is not None else len(ds) - dc.n_train
        train, test = split(ds, None, seed=dc.split_seed, n_train=dc.n_train, n_test=min(n_test, len(ds) - dc.n_train))
    else:
        train, test = split(ds, 0.7, seed=dc.split_seed)
    train, test, _ = standardize(train, test)
    return train, test


@dataclass
class RunRecord:
    run_id: str
    dataset: str
    lam: float
    seed: int
    divergence: str
    estimator: str
    notion: str
    accuracy: float = math.nan
    delta_dp: float = math.nan
    delta_eo: float = math.nan
    group_auc: dict[int, float] = field(default_factory=dict)
    seconds: float = 0.0
    status: str = "ok"
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def bias(self, notion: str | None = None) -> float:
        return self.delta_eo if (notion or self.notion) == "eo" else self.delta_dp

    def metrics(self) -> tuple:
        """Everything except wall-clock time; used for determinism checks."""
        return (self.run_id, self.lam, self.seed, self.accuracy, self.delta_dp, self.delta_eo,
                tuple(sorted(self.group_auc.items())), self.status)


def make_run_id(dataset: str, cfg: TrainConfig) -> str:
    return f"{dataset}-{cfg.notion}-{cfg.divergence.value}-{cfg.estimator}-lam{cfg.lam:g}-s{cfg.seed}"


def record_from_result(dataset: str, result: TrainResult, test: Dataset) -> RunRecord:
    cfg = result.config
    preds = PredictionSet(result.classifier.forward(test.features, cache=False)[:, 0], test.labels,
                          test.groups, cfg.threshold, test.n_groups)
    m = summarize(preds)
    return RunRecord(
        run_id=make_run_id(dataset, cfg), dataset=dataset, lam=cfg.lam, seed=cfg.seed,
        divergence=cfg.divergence.value, estimator=cfg.estimator, notion=cfg.notion,
        accuracy=m["accuracy"], delta_dp=m["delta_dp"], delta_eo=m["delta_eo"],
        group_auc={g: m[f"auc_g{g}"] for g in range(test.n_groups)}, seconds=result.seconds,
    )


def _run_one(args):
    dataset, cfg, train, test = args
    t0 = time.perf_counter()
    try:
        result = train_fair(cfg, train, test)
    except Exception as exc:  # noqa: BLE001 - a failed run is recorded, the sweep goes on
        log.warning("run %s failed: %s", make_run_id(dataset, cfg), exc)
        return RunRecord(make_run_id(dataset, cfg), dataset, cfg.lam, cfg.seed, cfg.divergence.value,
                         cfg.estimator, cfg.notion, seconds=time.perf_counter() - t0,
                         status="failed", error=str(exc)), None
    return record_from_result(dataset, result, test), result


def sweep(template: TrainConfig, lambdas, seeds, datasets: dict[str, tuple[Dataset, Dataset]],
          workers: int = 1, keep_results: bool = False):
    """One independent run per (dataset, lambda, seed).

    Returns the records in grid order (and the TrainResults when
    ``keep_results``; failed runs give None there).
    """
    if not lambdas or not seeds:
        raise ValueError("sweep needs a non-empty lambda grid and seed list")
    jobs = [(name, template.with_(lam=float(lam), seed=int(seed)), tr, te)
            for name, (tr, te) in datasets.items() for lam in lambdas for seed in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_run_one, jobs))
    else:
        out = [_run_one(job) for job in jobs]
    records = [r for r, _ in out]
    if keep_results:
        return records, [res for _, res in out]
    return records


def low_bias_threshold(records, notion: str | None = None) -> float | None:
    """Mean bias of the successful lambda = 0 runs."""
    base = [r.bias(notion) for r in records if r.ok and r.lam == 0]
    return float(np.mean(base)) if base else None


def frontier_from_records(records, zeta=None, notion: str | None = None):
    pts = [FAPoint(r.bias(notion), r.accuracy, {"lambda": r.lam, "seed": r.seed, "method": r.estimator, "run_id": r.run_id})
           for r in records if r.ok and np.isfinite(r.bias(notion))]
    if zeta is None:
        zeta = low_bias_threshold(records, notion) or 0.0
    return build_frontier(pts, zeta)


# -- CSV ------------------------------------------------------------------

BASE_COLUMNS = ["run_id", "dataset", "lambda", "seed", "divergence", "estimator", "notion",
                "accuracy", "delta_dp", "delta_eo"]


def write_records(records, path) -> None:
    n_groups = max((len(r.group_auc) for r in records), default=0)
    cols = BASE_COLUMNS + [f"auc_g{g}" for g in range(n_groups)] + ["seconds", "status", "error"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in records:
            row = [r.run_id, r.dataset, repr(r.lam), r.seed, r.divergence, r.estimator, r.notion,
                   repr(r.accuracy), repr(r.delta_dp), repr(r.delta_eo)]
            row += [repr(r.group_auc.get(g, math.nan)) for g in range(n_groups)]
            row += [f"{r.seconds:.3f}", r.status, r.error]
            w.writerow(row)


class RecordFormatError(ValueError):
    pass


def read_records(path) -> list[RunRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RecordFormatError(f"{path}: empty file") from None
        missing = [c for c in ("run_id", "lambda", "seed", "accuracy", "delta_dp", "delta_eo") if c not in header]
        if missing:
            raise RecordFormatError(f"{path}: line 1: missing column(s) {missing}")
        idx = {h: k for k, h in enumerate(header)}
        auc_cols = sorted((int(h[5:]), h) for h in header if h.startswith("auc_g"))
        records = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise RecordFormatError(f"{path}: line {line}: expected {len(header)} cells, got {len(row)}")
            get = lambda c, default="": row[idx[c]] if c in idx else default  # noqa: E731
            try:
                rec = RunRecord(
                    run_id=get("run_id"), dataset=get("dataset"), lam=float(get("lambda")), seed=int(get("seed")),
                    divergence=get("divergence"), estimator=get("estimator"), notion=get("notion", "dp") or "dp",
                    accuracy=float(get("accuracy")), delta_dp=float(get("delta_dp")), delta_eo=float(get("delta_eo")),
                    group_auc={g: float(row[idx[h]]) for g, h in auc_cols},
                    seconds=float(get("seconds", "0") or 0), status=get("status", "ok") or "ok", error=get("error"),
                )
            except ValueError as exc:
                raise RecordFormatError(f"{path}: line {line}: {exc}") from None
            records.append(rec)
    return records


def write_history(history, path) -> None:
    if not history:
        return
    cols = list(history[0])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for rec in history:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in rec.items()})


def record_dict(r: RunRecord) -> dict:
    d = asdict(r)
    d["lambda"] = d.pop("lam")
    d["group_auc"] = {str(k): v for k, v in r.group_auc.items()}
    return d


def datasets_for(cfg: RunConfig) -> dict[str, tuple[Dataset, Dataset]]:
    return {cfg.data.dataset_id: prepare_data(cfg.data, cfg.base_dir)}
