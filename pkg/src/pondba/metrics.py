"""Metrics over simulation traces: regret, latency statistics, allocations."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import PonConfig
from .offline import hindsight_optimum
from .simulator import SimulationTrace


class NoCompletedTraffic(ValueError):
    pass


def cycle_losses(allocations, demands, onu_weights) -> np.ndarray:
    """Loss ``g_t(x_t)`` of every cycle, vectorized over the trace."""
    x = np.asarray(allocations, dtype=float)
    b = np.asarray(demands, dtype=float)
    return -np.sum(b * onu_weights * np.minimum(np.log1p(x), np.log1p(b)), axis=1)


def log_grid(T: int, start: int = 100, per_decade: int = 2) -> np.ndarray:
    """Prefix lengths ``start, start*10^(1/per_decade), ...`` up to and including ``T``."""
    if T <= start:
        return np.array([T])
    k = np.arange(0, int(np.floor(per_decade * np.log10(T / start) + 1e-9)) + 1)
    pts = np.unique(np.rint(start * 10.0 ** (k / per_decade)).astype(int))
    pts = pts[pts <= T]
    if pts[-1] != T:
        pts = np.append(pts, T)
    return pts


@dataclass
class RegretCurve:
    prefixes: np.ndarray
    regret: np.ndarray
    online_loss: np.ndarray
    hindsight_loss: np.ndarray

    @property
    def average(self) -> np.ndarray:
        return self.regret / self.prefixes


def regret_curve(trace: SimulationTrace, config: PonConfig | None = None, prefixes=None) -> RegretCurve:
    """Realized regret of the trace's allocations against the best fixed allocation of each prefix."""
    config = config or trace.config
    T = trace.cycles
    if T < 1:
        raise ValueError("empty trace")
    prefixes = log_grid(T) if prefixes is None else np.asarray(prefixes, dtype=int)
    w = config.onu_weights
    online = np.cumsum(cycle_losses(trace.allocations, trace.demands, w))
    on, off = [], []
    for n in prefixes:
        d = trace.demands[:n]
        x_star = hindsight_optimum(d, config)
        on.append(online[n - 1])
        off.append(float(cycle_losses(x_star[None, :], d, w).sum()))
    on, off = np.array(on), np.array(off)
    return RegretCurve(prefixes, on - off, on, off)


@dataclass
class LatencyStats:
    mean: float
    per_onu_mean: np.ndarray
    sigma_u: float
    per_onu_count: np.ndarray
    unfinished: np.ndarray


def latency_stats(trace: SimulationTrace) -> LatencyStats:
    """Mean sojourn time (arrival to departure) of completed packets.

    ``sigma_u`` is the population standard deviation of the per-ONU means,
    taken over ONUs that completed at least one packet. Packets still
    queued at the end are left out and counted in ``unfinished``.
    """
    lat = trace.latencies
    if lat.size == 0:
        raise NoCompletedTraffic("no packet completed during the run")
    n = trace.config.num_onus
    counts = np.bincount(trace.packets_onu, minlength=n)
    sums = np.bincount(trace.packets_onu, weights=lat, minlength=n)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_onu = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return LatencyStats(
        mean=float(lat.mean()),
        per_onu_mean=per_onu,
        sigma_u=float(np.std(per_onu[counts > 0])),
        per_onu_count=counts,
        unfinished=np.asarray(trace.unfinished),
    )


def allocation_snapshot(trace: SimulationTrace, t: int) -> np.ndarray:
    if not 0 <= t < trace.cycles:
        raise IndexError(f"cycle {t} outside trace of {trace.cycles} cycles")
    return trace.allocations[t].copy()


# --- CSV output ----------------------------------------------------------------


def write_latency_csv(stats: LatencyStats, path: str | Path) -> None:
    """Columns ``onu,mean_latency,completed,unfinished``; a final ``all`` row
    carries the overall mean and, in ``sigma_u``, the spread across ONUs."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["onu", "mean_latency", "completed", "unfinished", "sigma_u"])
        for i, (m, c, u) in enumerate(zip(stats.per_onu_mean.tolist(), stats.per_onu_count.tolist(), stats.unfinished.tolist())):
            w.writerow([i, "" if np.isnan(m) else repr(m), c, u, ""])
        w.writerow(["all", repr(stats.mean), int(stats.per_onu_count.sum()), int(stats.unfinished.sum()), repr(stats.sigma_u)])


def write_regret_csv(curve: RegretCurve, path: str | Path) -> None:
    """Columns ``cycles,regret,average_regret,online_loss,hindsight_loss``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cycles", "regret", "average_regret", "online_loss", "hindsight_loss"])
        for row in zip(curve.prefixes.tolist(), curve.regret.tolist(), curve.average.tolist(), curve.online_loss.tolist(), curve.hindsight_loss.tolist()):
            w.writerow([row[0]] + [repr(v) for v in row[1:]])


def write_allocation_csv(trace: SimulationTrace, t: int, path: str | Path) -> None:
    """Columns ``onu,slice,allocation`` for cycle ``t``."""
    x = allocation_snapshot(trace, t)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["onu", "slice", "allocation"])
        for i, v in enumerate(x.tolist()):
            w.writerow([i, trace.config.slice_of[i], repr(v)])
