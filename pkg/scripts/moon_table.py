"""Moon lambda sweep: mean and sd of test accuracy, Delta_DP and Delta_EO per lambda.

    python scripts/moon_table.py --lambdas 0,1,9 --seeds 0,1,2,3,4 --out runs/moon_table

Full-size settings by default (200 epochs, 100 critic steps, batch 2048,
lr 2e-3); one run takes about a minute and a half on one core.
"""

import argparse
import os
from pathlib import Path

import numpy as np

from fairminmax.config import DataConfig, TrainConfig, parse_floats, parse_ints
from fairminmax.frontier import append_jsonl, summary_record, write_frontier_csv
from fairminmax.runner import frontier_from_records, prepare_data, sweep, write_records


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambdas", default="0,1,9")
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--divergence", default="chi2", choices=["kl", "chi2", "sh"])
    ap.add_argument("--estimator", default="nn", choices=["nn", "con", "dre"])
    ap.add_argument("--notion", default="dp", choices=["dp", "eo"])
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--critic-steps", type=int, default=100)
    ap.add_argument("--noise", type=float, default=0.2)
    ap.add_argument("--workers", type=int, default=os.cpu_count())
    ap.add_argument("--out", default="runs/moon_table")
    args = ap.parse_args()

    data = {"moon": prepare_data(DataConfig(noise=args.noise))}
    template = TrainConfig(notion=args.notion, divergence=args.divergence, estimator=args.estimator,
                           epochs=args.epochs, critic_steps=args.critic_steps)
    lambdas, seeds = parse_floats(args.lambdas), parse_ints(args.seeds)
    records = sweep(template, lambdas, seeds, data, workers=args.workers)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_records(records, out / "records.csv")
    fr = frontier_from_records(records)
    write_frontier_csv(fr, out / "frontier.csv")
    append_jsonl(summary_record(fr), out / "frontier.jsonl")

    print(f"{'lambda':>7} {'accuracy':>17} {'delta_dp':>17} {'delta_eo':>17}  runs")
    for lam in lambdas:
        rs = [r for r in records if r.lam == lam and r.ok]
        cells = []
        for field in ("accuracy", "delta_dp", "delta_eo"):
            v = np.array([getattr(r, field) for r in rs])
            cells.append(f"{v.mean():.4f} +- {v.std(ddof=1) if len(v) > 1 else 0:.4f}")
        print(f"{lam:7g} {cells[0]:>17} {cells[1]:>17} {cells[2]:>17}  {len(rs)}")
    print(f"zeta {fr.zeta:.4f}; frontier vertices {len(fr.vertices)}; outputs in {out}")


if __name__ == "__main__":
    main()
