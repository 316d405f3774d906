"""Command-line experiment runner.

    pondba run --preset paper-base --policy oco --cycles 10000 --seed 1 --out runs/oco
    pondba sweep-delta --preset paper-base --delta-list 0,0.25,0.5,0.75,1 --runs 50 --out runs/fig3
    pondba preset paper-sliceweight > sliceweight.cfg

Exit codes: 0 success, 2 bad configuration or arguments, 3 runtime/IO failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError, PonConfig
from .metrics import NoCompletedTraffic, latency_stats, regret_curve, write_allocation_csv, write_latency_csv, write_regret_csv
from .policies import POLICY_NAMES, make_policy
from .simulator import run_simulation, save_trace

log = logging.getLogger("pondba")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
DEFAULT_CYCLES = 10_000


class UsageError(Exception):
    pass


def parse_policy_spec(spec: str) -> tuple[str, dict]:
    """``"avgpred:h=100"`` -> ``("avgpred", {"h": 100})``."""
    name, _, rest = spec.partition(":")
    name = name.strip()
    if name not in POLICY_NAMES:
        raise UsageError(f"unknown policy {name!r}; valid names: {', '.join(POLICY_NAMES)}")
    params = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise UsageError(f"bad policy parameter {item!r} in {spec!r}")
        conv = {"h": int, "m": float, "eta0": float, "schedule": str}.get(key)
        if conv is None:
            raise UsageError(f"unknown parameter {key!r} for policy {name!r}")
        try:
            params[key] = conv(val)
        except ValueError:
            raise UsageError(f"bad value {val!r} for {key!r}") from None
    try:
        make_policy(name, **params)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return name, params


def replication_seed(base_seed: int, policy: str, delta_t: float, run: int) -> int:
    """Stable 63-bit seed from sha256 of ``"base_seed|policy|delta_t|run"``."""
    key = f"{base_seed}|{policy}|{float(delta_t)!r}|{run}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1


def _load(args) -> PonConfig:
    if args.config and args.preset:
        raise UsageError("give either --config or --preset, not both")
    if args.config:
        try:
            return cfgmod.load_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
    try:
        return cfgmod.preset(args.preset or "paper-base")
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None


def _writable_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write-test"
    probe.write_text("")
    probe.unlink()
    return out


def run(config: PonConfig, policy_spec: str, T: int, seed: int, out_dir: str) -> dict:
    """One simulation; writes the trace plus latency, regret and final-allocation CSVs."""
    name, params = parse_policy_spec(policy_spec)
    out = _writable_dir(out_dir)
    trace = run_simulation(config, make_policy(name, **params), T, seed)
    save_trace(trace, out)
    write_regret_csv(regret_curve(trace), out / "regret.csv")
    write_allocation_csv(trace, trace.cycles - 1, out / "allocation.csv")
    try:
        stats = latency_stats(trace)
    except NoCompletedTraffic:
        (out / "latency.csv").write_text("onu,mean_latency,completed,unfinished,sigma_u\n")
        return {"mean_latency": float("nan"), "sigma_u": float("nan"), "unfinished": int(trace.unfinished.sum())}
    write_latency_csv(stats, out / "latency.csv")
    return {"mean_latency": stats.mean, "sigma_u": stats.sigma_u, "unfinished": int(trace.unfinished.sum())}


def sweep_delta(
    config: PonConfig,
    policies: list[str],
    delta_list: list[float],
    runs: int,
    T: int,
    base_seed: int,
    out_dir: str,
    keep_traces: bool = False,
) -> list[dict]:
    """Mean latency per (policy, delta_t) over independent replications.

    Writes ``runs.csv`` (one row per replication) and ``summary.csv`` with
    columns ``policy,delta_t,runs,mean_latency,stderr``; ``stderr`` is the
    standard error across runs and is left empty for a single run.
    """
    if not delta_list:
        raise UsageError("delta list is empty")
    if runs < 1:
        raise UsageError("runs must be >= 1")
    specs = [(spec, *parse_policy_spec(spec)) for spec in policies]
    out = _writable_dir(out_dir)
    rows = []
    for spec, name, params in specs:
        for dt in delta_list:
            cfg = config.replace(delta_t=float(dt))
            cfgmod.validate_config(cfg)
            for r in range(runs):
                seed = replication_seed(base_seed, spec, dt, r)
                trace = run_simulation(cfg, make_policy(name, **params), T, seed)
                stats = latency_stats(trace)
                if keep_traces:
                    save_trace(trace, out / "traces" / f"{spec.replace(':', '_').replace(',', '_')}_dt{dt}_r{r}")
                rows.append(
                    {
                        "policy": spec,
                        "delta_t": float(dt),
                        "run": r,
                        "seed": seed,
                        "mean_latency": stats.mean,
                        "sigma_u": stats.sigma_u,
                        "unfinished": int(trace.unfinished.sum()),
                    }
                )
                log.info("%s dt=%s run %d: mean latency %.4f", spec, dt, r, stats.mean)

    with open(out / "runs.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["policy", "delta_t", "run", "seed", "mean_latency", "sigma_u", "unfinished"])
        for row in rows:
            w.writerow([row["policy"], repr(row["delta_t"]), row["run"], row["seed"], repr(row["mean_latency"]), repr(row["sigma_u"]), row["unfinished"]])

    summary = summarize(rows)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["policy", "delta_t", "runs", "mean_latency", "stderr"])
        for s in summary:
            w.writerow([s["policy"], repr(s["delta_t"]), s["runs"], repr(s["mean_latency"]), "" if s["stderr"] is None else repr(s["stderr"])])
    return summary


def summarize(rows: list[dict]) -> list[dict]:
    groups: dict = {}
    for row in rows:
        groups.setdefault((row["policy"], row["delta_t"]), []).append(row["mean_latency"])
    out = []
    for (policy, dt), vals in groups.items():
        v = np.asarray(vals)
        se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else None
        out.append({"policy": policy, "delta_t": dt, "runs": v.size, "mean_latency": float(v.mean()), "stderr": se})
    return out


def _parse_deltas(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"bad --delta-list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pondba", description="PON dynamic bandwidth allocation experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="config file (key = value format)")
        sp.add_argument("--preset", help=f"named setup: {', '.join(cfgmod.PRESETS)}")
        sp.add_argument("--cycles", type=int, default=DEFAULT_CYCLES)
        sp.add_argument("--seed", type=int, default=1)
        sp.add_argument("--out", required=True, help="output directory")

    r = sub.add_parser("run", help="run one simulation")
    common(r)
    r.add_argument("--policy", default="oco", help="oco | maxwin | avgpred, optionally with params, e.g. avgpred:h=100")
    r.add_argument("--delta", type=float, help="override delta_t of the config")

    s = sub.add_parser("sweep-delta", help="latency versus delta_t over replications")
    common(s)
    s.add_argument("--policy", action="append", help="repeatable; default: oco, maxwin, avgpred")
    s.add_argument("--delta-list", default="0,0.25,0.5,0.75,1.0")
    s.add_argument("--runs", type=int, default=50)
    s.add_argument("--keep-traces", action="store_true", help="also save every replication's trace")

    pr = sub.add_parser("preset", help="print a preset as a config file")
    pr.add_argument("name", choices=cfgmod.PRESETS)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "preset":
            sys.stdout.write(cfgmod.format_config(cfgmod.preset(args.name)))
            return EXIT_OK
        config = _load(args)
        if args.cycles < 1:
            raise UsageError("--cycles must be >= 1")
        if args.command == "run":
            if args.delta is not None:
                config = cfgmod.validate_config(config.replace(delta_t=args.delta))
            res = run(config, args.policy, args.cycles, args.seed, args.out)
            print(f"mean latency {res['mean_latency']:.6f}  sigma_U {res['sigma_u']:.6f}  unfinished {res['unfinished']}")
        else:
            summary = sweep_delta(
                config,
                args.policy or list(POLICY_NAMES),
                _parse_deltas(args.delta_list),
                args.runs,
                args.cycles,
                args.seed,
                args.out,
                keep_traces=args.keep_traces,
            )
            for s in summary:
                se = "" if s["stderr"] is None else f" +- {s['stderr']:.6f}"
                print(f"{s['policy']:>16} dt={s['delta_t']:<5} {s['mean_latency']:.6f}{se}")
    except (UsageError, ConfigError) as exc:
        print(f"pondba: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - IO and simulation failures share one exit code
        print(f"pondba: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
