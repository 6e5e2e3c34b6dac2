"""FA-AUC of several divergence/estimator variants on one dataset, merged and alone.

    python scripts/compare_estimators.py --config configs/moon_dp.ini \
        --variants chi2:nn,kl:nn,sh:nn,chi2:con,chi2:dre --lambdas 0,1,3,9 --seeds 0,1

Every variant shares the lambda = 0 threshold zeta (mean over its seeds of
the first variant) and one FA-AUC range, the span of all observed biases,
so the numbers are comparable. Results go to
``--out`` as one records CSV per variant plus summary.jsonl.
"""

import argparse
import os
from pathlib import Path

from fairminmax.config import load_config, parse_floats, parse_ints
from fairminmax.frontier import append_jsonl, summary_record
from fairminmax.runner import datasets_for, frontier_from_records, low_bias_threshold, sweep, write_records


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True)
    ap.add_argument("--variants", default="chi2:nn,kl:nn,sh:nn,chi2:con,chi2:dre")
    ap.add_argument("--lambdas")
    ap.add_argument("--seeds")
    ap.add_argument("--epochs", type=int)
    ap.add_argument("--workers", type=int, default=os.cpu_count())
    ap.add_argument("--out", default="runs/compare")
    args = ap.parse_args()

    cfg = load_config(args.config)
    lambdas = parse_floats(args.lambdas) if args.lambdas else cfg.lambdas
    seeds = parse_ints(args.seeds) if args.seeds else cfg.seeds
    template = cfg.train if args.epochs is None else cfg.train.with_(epochs=args.epochs)
    data = datasets_for(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    per_variant = {}
    for spec in args.variants.split(","):
        div, est = spec.strip().split(":")
        recs = sweep(template.with_(divergence=div, estimator=est), lambdas, seeds, data, workers=args.workers)
        write_records(recs, out / f"records_{div}_{est}.csv")
        per_variant[spec.strip()] = recs

    zeta = low_bias_threshold(next(iter(per_variant.values())))
    biases = [r.bias() for recs in per_variant.values() for r in recs if r.ok]
    eps = (min(biases), max(biases)) if max(biases) > min(biases) else None
    print(f"zeta {zeta:.4f}; fa_auc over " + (f"[{eps[0]:.4f}, {eps[1]:.4f}]" if eps else "each vertex span"))
    print(f"{'variant':>10} {'fa_auc':>8} {'low_bias':>8}")
    for name, recs in per_variant.items():
        rec = summary_record(frontier_from_records(recs, zeta), eps, variant=name)
        append_jsonl(rec, out / "summary.jsonl")
        print(f"{name:>10} {rec['fa_auc']:8.4f} {rec['low_bias_auc']:8.4f}")
    merged = [r for recs in per_variant.values() for r in recs]
    rec = summary_record(frontier_from_records(merged, zeta), eps, variant="merged")
    append_jsonl(rec, out / "summary.jsonl")
    print(f"{'merged':>10} {rec['fa_auc']:8.4f} {rec['low_bias_auc']:8.4f}")


if __name__ == "__main__":
    main()
