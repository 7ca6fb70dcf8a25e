"""Run the simulated regret experiments and summarise UCR against G-MLE.

    python scripts/regret_experiments.py                       # all three settings, 300 runs
    python scripts/regret_experiments.py --runs 100 configs/fig2_n7k5.json

Writes ``<output>_raw.csv`` / ``<output>_agg.csv`` for each config and prints
final cumulative regret, paired gaps against G-MLE and early/late per-round
regret.
"""
import argparse
import json
import time
from pathlib import Path

import numpy as np

from rank_ucr.harness import ExperimentConfig, aggregate, group, paired_gap, run_experiment, write_csv

ROOT = Path(__file__).resolve().parents[1]
DEFAULT = [ROOT / "configs" / f"fig2_{s}.json" for s in ("n7k5", "n10k5", "n5k5")]


def summarise(curves) -> None:
    groups = group(curves)
    gmle = groups.get(("gmle", ""))
    print(f"{'policy':>8} {'xi':>6} {'R_T':>8} {'stderr':>7} {'early':>7} {'late':>7} {'vs gmle':>16}")
    for (policy, xi), cs in sorted(groups.items()):
        agg = aggregate(cs)
        cum = np.array([c.cum for c in cs])
        early = np.mean(cum[:, 104] - cum[:, 4]) / 100 if cum.shape[1] >= 105 else float("nan")
        late = np.mean(cum[:, -1] - cum[:, -101]) / 100 if cum.shape[1] >= 101 else float("nan")
        gap = ""
        if gmle is not None and policy != "gmle":
            m, se = paired_gap(cs, gmle)
            gap = f"{m:+.3f}±{se:.3f}"
        print(f"{policy:>8} {xi:>6} {agg.mean[-1]:8.3f} {agg.stderr[-1]:7.3f} {early:7.4f} {late:7.4f} {gap:>16}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="*", type=Path, default=DEFAULT)
    ap.add_argument("--runs", type=int, help="override the number of runs")
    ap.add_argument("--threads", type=int)
    args = ap.parse_args()
    for path in args.configs:
        data = json.loads(path.read_text())
        if args.runs:
            data["runs"] = args.runs
        cfg = ExperimentConfig.from_dict(data)
        start = time.perf_counter()
        curves = run_experiment(cfg, threads=args.threads)
        raw, agg = write_csv(curves, cfg.output)
        print(f"\n== {path.name}: N={cfg.n} K={cfg.k} T={cfg.t} runs={cfg.runs} "
              f"({time.perf_counter() - start:.0f}s) -> {raw}, {agg}")
        summarise(curves)


if __name__ == "__main__":
    main()
