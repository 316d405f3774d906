"""Average regret of OCO against the best fixed allocation, on a log grid of horizons."""

import argparse

from pondba.config import preset
from pondba.metrics import regret_curve, write_regret_csv
from pondba.policies import make_policy
from pondba.simulator import run_simulation


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cycles", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--policy", default="oco")
    ap.add_argument("--delta", type=float, default=0.0)
    ap.add_argument("--out", default="runs/regret.csv")
    args = ap.parse_args()
    cfg = preset("paper-base").replace(delta_t=args.delta)
    curve = regret_curve(run_simulation(cfg, make_policy(args.policy), args.cycles, args.seed))
    for n, r, a in zip(curve.prefixes, curve.regret, curve.average):
        print(f"T={n:>6}  regret {r:.4e}  regret/T {a:.3e}")
    write_regret_csv(curve, args.out)


if __name__ == "__main__":
    main()
