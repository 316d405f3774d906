"""Cycle-by-cycle PON upstream simulator.

Time is continuous and measured in cycles; cycle ``t`` spans
``[t*C, (t+1)*C)``. Each ONU gets one window per cycle, laid out back to
back in index order with its guard time after it. Packets all have the same
size (``unit_time``) and leave their ONU's FIFO queue whole: a packet is
sent only if it has arrived and fits in what is left of the window.

Traffic of cycle ``t`` comes in two streams per ONU. ``Pois(lambda)``
reported packets arrive uniformly over ``[t, t+C-delta_t)``; an extra
``Pois(lambda*delta_t)`` stream arrives over the last ``delta_t`` of the
cycle and is missing from the next REPORT snapshot.
"""

from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PonConfig, capacity, format_config, parse_config, validate_config
from .policies import Policy

FIT_TOL = 1e-9


@dataclass
class Packet:
    onu: int
    arrival_time: float
    size: float
    departure_time: float | None = None
    hidden: bool = False

    @property
    def latency(self) -> float:
        return self.departure_time - self.arrival_time


@dataclass
class QueueState:
    """FIFO of packets waiting at one ONU, oldest first."""

    packets: list = field(default_factory=list)

    @property
    def backlog(self) -> float:
        return float(sum(p.size for p in self.packets))


def _draw_arrivals(rng: np.random.Generator, lambdas: np.ndarray, delta_t: float, first: int, cycles: int, cycle_length: float):
    """Draw ``cycles`` cycles of arrivals for every ONU, starting at cycle ``first``.

    Reported packets of cycle ``t`` arrive uniformly over
    ``[tC, (t+1)C - delta_t)`` and hidden ones over the remaining
    ``[(t+1)C - delta_t, (t+1)C)``. Returns, per ONU, the sorted arrival
    times and a matching hidden flag array, plus the ``(cycles, N)`` count
    of arrivals per cycle.
    """
    n = lambdas.size
    n_rep = rng.poisson(lambdas, size=(cycles, n))
    if delta_t > 0:
        n_hid = rng.poisson(lambdas * delta_t, size=(cycles, n))
    else:
        n_hid = np.zeros_like(n_rep)
    starts = (first + np.arange(cycles)) * cycle_length
    ends = starts + cycle_length
    splits = np.maximum(starts, ends - delta_t)
    streams = []
    for i in range(n):
        cyc_rep = np.repeat(np.arange(cycles), n_rep[:, i])
        cyc_hid = np.repeat(np.arange(cycles), n_hid[:, i])
        t_rep = starts[cyc_rep] + (splits - starts)[cyc_rep] * rng.random(cyc_rep.size)
        t_hid = splits[cyc_hid] + (ends - splits)[cyc_hid] * rng.random(cyc_hid.size)
        times = np.concatenate((t_rep, t_hid))
        flags = np.concatenate((np.zeros(t_rep.size, bool), np.ones(t_hid.size, bool)))
        order = np.argsort(times, kind="stable")
        streams.append((times[order], flags[order]))
    return streams, n_rep + n_hid


def generate_arrivals(rng, lam: float, delta_t: float, cycle: int, unit_time: float = 0.01, cycle_length: float = 1.0, onu: int = 0):
    """One ONU's arrivals in one cycle as ``(reported, hidden)`` packet lists."""
    if lam < 0 or delta_t < 0:
        raise ValueError("rate and delta_t must be non-negative")
    ((times, flags),), _ = _draw_arrivals(rng, np.array([float(lam)]), delta_t, cycle, 1, cycle_length)
    reported = [Packet(onu, a, unit_time) for a in times[~flags].tolist()]
    hidden = [Packet(onu, a, unit_time, hidden=True) for a in times[flags].tolist()]
    return reported, hidden


def window_offsets(x, config: PonConfig, cycle_start: float = 0.0) -> np.ndarray:
    """Start time of each ONU's window: windows and guards back to back in index order."""
    x = np.asarray(x, dtype=float)
    span = x + config.guard_array
    return cycle_start + np.concatenate(([0.0], np.cumsum(span)[:-1]))


def _serve(times: list, head: int, start: float, end: float, size: float):
    """Serve from ``times[head:]`` over ``[start, end]``; return new head and departures."""
    free = start
    k = head
    n = len(times)
    deps = []
    limit = end + FIT_TOL
    while k < n:
        a = times[k]
        begin = a if a > free else free
        if begin + size > limit:
            break
        free = begin + size
        deps.append(free)
        k += 1
    return k, deps


def serve_window(queue: QueueState, window_start: float, window_len: float):
    """Serve a queue over one window.

    Returns ``(served, residual)`` where ``served`` are the departed packets
    with ``departure_time`` set and ``residual`` the packets left behind.
    Packets arriving during the window are sent once they arrive, if they fit.
    """
    pkts = sorted(queue.packets, key=lambda p: p.arrival_time)
    sizes = {p.size for p in pkts}
    if len(sizes) > 1:
        return _serve_mixed(pkts, window_start, window_len)
    size = sizes.pop() if sizes else 0.0
    k, deps = _serve([p.arrival_time for p in pkts], 0, window_start, window_start + window_len, size)
    served = []
    for p, d in zip(pkts[:k], deps):
        p.departure_time = d
        served.append(p)
    return served, QueueState(pkts[k:])


def _serve_mixed(pkts, window_start, window_len):
    free, end = window_start, window_start + window_len + FIT_TOL
    served = []
    k = 0
    for p in pkts:
        begin = max(free, p.arrival_time)
        if begin + p.size > end:
            break
        free = begin + p.size
        p.departure_time = free
        served.append(p)
        k += 1
    return served, QueueState(pkts[k:])


@dataclass
class SimulationTrace:
    """Everything recorded by one run.

    Per-cycle arrays have shape ``(T, N)``; amounts are in cycle units.
    ``demands`` is the backlog at each window start (what the OLT learns
    after the fact) and ``reports`` the same backlog minus traffic that
    arrived too late to be reported. ``packets_*`` describe completed
    packets only; packets still queued at the end are counted per ONU in
    ``unfinished`` and listed in ``pending_*``.
    """

    config: PonConfig
    seed: int
    policy: str
    allocations: np.ndarray
    demands: np.ndarray
    reports: np.ndarray
    served: np.ndarray
    window_starts: np.ndarray
    arrived: np.ndarray
    backlog_end: np.ndarray
    packets_onu: np.ndarray
    packets_arrival: np.ndarray
    packets_departure: np.ndarray
    unfinished: np.ndarray
    pending_onu: np.ndarray
    pending_arrival: np.ndarray

    @property
    def cycles(self) -> int:
        return self.allocations.shape[0]

    @property
    def latencies(self) -> np.ndarray:
        return self.packets_departure - self.packets_arrival


def run_simulation(config: PonConfig, policy: Policy, T: int, seed: int) -> SimulationTrace:
    """Run ``T`` cycles of ``policy`` on ``config`` with a PCG64 stream seeded by ``seed``.

    Each cycle: the policy decides from what it observed up to the previous
    cycle; windows are laid out; every ONU's backlog at its window start is
    recorded (actual and as reported) and its queue is served; finally the
    policy observes both backlogs.
    """
    validate_config(config)
    if T < 1:
        raise ValueError("need at least one cycle")
    n = config.num_onus
    s = config.unit_time
    C = config.cycle_length
    cap = capacity(config)
    rng = np.random.default_rng(seed)

    streams, counts = _draw_arrivals(rng, config.lambda_array, config.delta_t, 0, T, C)
    times = [st[0].tolist() for st in streams]
    # hidden_before[i][k]: hidden packets among the first k of ONU i
    hidden_before = [np.concatenate(([0], np.cumsum(st[1]))).tolist() for st in streams]
    generated = np.cumsum(counts, axis=0).tolist()
    heads = [0] * n
    last_start = [-np.inf] * n
    deps = [[] for _ in range(n)]

    alloc = np.empty((T, n))
    dem = np.empty((T, n))
    rep = np.empty((T, n))
    srv = np.empty((T, n))
    wst = np.empty((T, n))
    bend = np.empty((T, n))

    for t in range(T):
        x = np.asarray(policy.decide(config), dtype=float)
        if x.shape != (n,) or np.any(x < -FIT_TOL) or x.sum() > cap + FIT_TOL:
            raise ValueError(f"policy {policy.describe()} returned infeasible allocation {x} at cycle {t}")
        x = np.maximum(x, 0.0)
        starts = window_offsets(x, config, t * C)
        x_list = x.tolist()
        start_list = starts.tolist()
        gen_t = generated[t]
        b_row, r_row, s_row, e_row = [], [], [], []
        for i in range(n):
            q = times[i]
            hb = hidden_before[i]
            head = heads[i]
            ws = start_list[i]
            visible = bisect.bisect_right(q, ws, head, gen_t[i])
            # hidden packets stay out of reports until one snapshot has passed them
            seen = bisect.bisect_right(q, last_start[i], head, visible)
            n_hidden = hb[visible] - hb[seen]
            new_head, d = _serve(q, head, ws, ws + x_list[i], s)
            deps[i].extend(d)
            b_row.append((visible - head) * s)
            r_row.append((visible - head - n_hidden) * s)
            s_row.append((new_head - head) * s)
            e_row.append((gen_t[i] - new_head) * s)
            heads[i] = new_head
            last_start[i] = ws

        alloc[t] = x
        dem[t] = b_row
        rep[t] = r_row
        srv[t] = s_row
        wst[t] = starts
        bend[t] = e_row
        policy.observe(dem[t].copy(), rep[t].copy())

    p_onu = np.concatenate([np.full(heads[i], i, dtype=int) for i in range(n)])
    p_arr = np.concatenate([streams[i][0][: heads[i]] for i in range(n)])
    p_dep = np.concatenate([np.asarray(deps[i], dtype=float) for i in range(n)])
    return SimulationTrace(
        config=config,
        seed=seed,
        policy=policy.describe(),
        allocations=alloc,
        demands=dem,
        reports=rep,
        served=srv,
        window_starts=wst,
        arrived=counts * s,
        backlog_end=bend,
        packets_onu=p_onu,
        packets_arrival=p_arr,
        packets_departure=p_dep,
        unfinished=np.array([generated[-1][i] - heads[i] for i in range(n)]),
        pending_onu=np.concatenate([np.full(generated[-1][i] - heads[i], i, dtype=int) for i in range(n)]),
        pending_arrival=np.concatenate([streams[i][0][heads[i] : generated[-1][i]] for i in range(n)]),
    )


# --- trace files ---------------------------------------------------------------

CYCLES_FILE = "cycles.csv"
PACKETS_FILE = "packets.csv"
META_FILE = "meta.csv"
CONFIG_FILE = "config.cfg"

_PER_ONU = (
    ("x", "allocations"),
    ("b", "demands"),
    ("r", "reports"),
    ("served", "served"),
    ("start", "window_starts"),
    ("arrived", "arrived"),
    ("backlog", "backlog_end"),
)


def save_trace(trace: SimulationTrace, out_dir: str | Path) -> Path:
    """Write a trace as CSV files into ``out_dir``.

    ``cycles.csv``: one row per cycle, column ``t`` then ``x_i``, ``b_i``,
    ``r_i``, ``served_i``, ``start_i``, ``arrived_i``, ``backlog_i`` for
    every ONU ``i``. ``packets.csv``: one row per packet with
    ``onu,arrival,departure``; completed packets first, then packets still
    queued at the end with an empty departure. ``meta.csv`` holds seed, policy and the
    unfinished-packet counts; ``config.cfg`` echoes the configuration.
    Floats are written with ``repr`` so files round-trip exactly.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = trace.config.num_onus
    with open(out / CYCLES_FILE, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"{p}_{i}" for p, _ in _PER_ONU for i in range(n)])
        cols = [getattr(trace, attr) for _, attr in _PER_ONU]
        for t in range(trace.cycles):
            row = [t]
            for c in cols:
                row.extend(repr(v) for v in c[t].tolist())
            w.writerow(row)
    with open(out / PACKETS_FILE, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["onu", "arrival", "departure"])
        for o, a, d in zip(trace.packets_onu.tolist(), trace.packets_arrival.tolist(), trace.packets_departure.tolist()):
            w.writerow([o, repr(a), repr(d)])
        for o, a in zip(trace.pending_onu.tolist(), trace.pending_arrival.tolist()):
            w.writerow([o, repr(a), ""])
    with open(out / META_FILE, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["key", "value"])
        w.writerow(["seed", trace.seed])
        w.writerow(["policy", trace.policy])
        w.writerow(["cycles", trace.cycles])
        w.writerow(["unfinished", " ".join(str(v) for v in trace.unfinished.tolist())])
    (out / CONFIG_FILE).write_text(format_config(trace.config))
    return out


def load_trace(out_dir: str | Path) -> SimulationTrace:
    out = Path(out_dir)
    config = parse_config((out / CONFIG_FILE).read_text())
    n = config.num_onus
    table = np.loadtxt(out / CYCLES_FILE, delimiter=",", skiprows=1, ndmin=2)
    arrays = {}
    for k, (_, attr) in enumerate(_PER_ONU):
        arrays[attr] = table[:, 1 + k * n : 1 + (k + 1) * n]
    with open(out / PACKETS_FILE, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    done = [r for r in rows if r[2] != ""]
    pending = [r for r in rows if r[2] == ""]
    pk = np.array([[float(v) for v in r] for r in done]).reshape(-1, 3)
    with open(out / META_FILE, newline="") as fh:
        meta = dict(list(csv.reader(fh))[1:])
    return SimulationTrace(
        config=config,
        seed=int(meta["seed"]),
        policy=meta["policy"],
        packets_onu=pk[:, 0].astype(int),
        packets_arrival=pk[:, 1],
        packets_departure=pk[:, 2],
        unfinished=np.array([int(v) for v in meta["unfinished"].split()], dtype=int),
        pending_onu=np.array([int(r[0]) for r in pending], dtype=int),
        pending_arrival=np.array([float(r[1]) for r in pending], dtype=float),
        **arrays,
    )
