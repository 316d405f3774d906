"""Mean latency versus delta_t for OCO and the two baselines.

    python3 scripts/fig3_latency_sweep.py --runs 50 --cycles 10000 --out runs/fig3
"""

import argparse

from pondba.cli import sweep_delta
from pondba.config import preset


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--cycles", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="runs/fig3")
    args = ap.parse_args()
    policies = ["oco", "maxwin", "avgpred:h=10", "avgpred:h=100", "avgpred:h=1000"]
    summary = sweep_delta(preset("paper-base"), policies, [0.0, 0.25, 0.5, 0.75, 1.0], args.runs, args.cycles, args.seed, args.out)
    for row in summary:
        se = "" if row["stderr"] is None else f" +- {row['stderr']:.4f}"
        print(f"{row['policy']:>16}  dt={row['delta_t']:<5} latency {row['mean_latency']:.4f}{se}")


if __name__ == "__main__":
    main()
