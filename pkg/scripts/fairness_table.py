"""Spread of per-ONU mean latency (sigma_U) for each policy."""

import argparse

import numpy as np

from pondba.config import preset
from pondba.metrics import latency_stats
from pondba.policies import make_policy
from pondba.simulator import run_simulation


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--delta", type=float, default=0.5)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--cycles", type=int, default=10_000)
    args = ap.parse_args()
    cfg = preset("paper-base").replace(delta_t=args.delta)
    for name in ("oco", "maxwin", "avgpred"):
        stats = [latency_stats(run_simulation(cfg, make_policy(name), args.cycles, s)) for s in range(args.seeds)]
        sig = np.array([s.sigma_u for s in stats])
        lat = np.array([s.mean for s in stats])
        print(f"{name:>8}  sigma_U {sig.mean():.4f} (+- {sig.std(ddof=1) / np.sqrt(sig.size):.4f})  mean latency {lat.mean():.4f}")


if __name__ == "__main__":
    main()
