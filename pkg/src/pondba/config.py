"""PON configuration: the shared domain parameters, their validation, and a
plain ``key = value`` file format for storing them."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field, fields
from functools import cached_property
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """A configuration violates one or more invariants.

    ``violations`` holds every problem found, not just the first.
    """

    def __init__(self, violations: list[str], line: int | None = None):
        self.violations = list(violations)
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + "; ".join(self.violations))


class CapacityExhausted(ConfigError):
    pass


class SlicePartitionBroken(ConfigError):
    pass


class NonPositiveWeight(ConfigError):
    pass


class InvalidParameter(ConfigError):
    pass


@dataclass(frozen=True)
class PonConfig:
    """Static description of one PON and its offered traffic.

    All times are in cycle units. ``slice_of[i]`` is the slice of ONU ``i``
    and ``slice_weights[j]`` the delay-sensitivity weight of slice ``j``.
    ``lambdas[i]`` is the mean number of packets ONU ``i`` receives per cycle,
    each packet taking ``unit_time`` to transmit. ``delta_t`` is the lag
    between an ONU's report snapshot and its window, during which extra
    unreported traffic arrives.
    """

    num_onus: int
    slice_of: tuple
    slice_weights: tuple
    lambdas: tuple
    guards: tuple = None
    cycle_length: float = 1.0
    unit_time: float = 0.007
    delta_t: float = 0.0

    def __post_init__(self):
        slice_of = self.slice_of
        if isinstance(slice_of, Mapping):
            extra = [k for k in slice_of if not (isinstance(k, int) and 0 <= k < self.num_onus)]
            slice_of = tuple(slice_of.get(i) for i in range(self.num_onus)) + tuple(
                ("extra", k) for k in extra
            )
        guards = self.guards
        if guards is None:
            guards = (0.0,) * max(int(self.num_onus), 0)
        object.__setattr__(self, "slice_of", tuple(slice_of))
        object.__setattr__(self, "slice_weights", tuple(float(p) for p in self.slice_weights))
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        object.__setattr__(self, "guards", tuple(float(v) for v in guards))

    @cached_property
    def guard_array(self) -> np.ndarray:
        return np.asarray(self.guards, dtype=float)

    @cached_property
    def lambda_array(self) -> np.ndarray:
        return np.asarray(self.lambdas, dtype=float)

    @cached_property
    def onu_weights(self) -> np.ndarray:
        """Slice weight ``p_j`` of every ONU, as a length-N vector."""
        return np.array([self.slice_weights[j] for j in self.slice_of], dtype=float)

    @property
    def num_slices(self) -> int:
        return len(self.slice_weights)

    def members(self, slice_index: int) -> list[int]:
        return [i for i, j in enumerate(self.slice_of) if j == slice_index]

    def replace(self, **changes) -> "PonConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return PonConfig(**values)


def capacity(config: PonConfig) -> float:
    """Usable transmission time per cycle, ``C - sum(d)``."""
    return float(config.cycle_length - sum(config.guards))


def _violations(config: PonConfig) -> list[tuple[type, str]]:
    found = []
    n = config.num_onus
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        return [(InvalidParameter, f"num_onus must be a positive integer, got {n!r}")]

    if not config.cycle_length > 0:
        found.append((InvalidParameter, f"cycle_length must be positive, got {config.cycle_length}"))
    if len(config.guards) != n:
        found.append((InvalidParameter, f"guards has {len(config.guards)} entries, expected {n}"))
    elif any(not d >= 0 for d in config.guards):
        found.append((InvalidParameter, "guard windows must be non-negative"))
    elif not capacity(config) > 0:
        found.append(
            (CapacityExhausted, f"guards sum to {sum(config.guards)} >= cycle length {config.cycle_length}")
        )

    num_slices = len(config.slice_weights)
    broken = []
    if len(config.slice_of) != n:
        broken.append(f"slice_of has {len(config.slice_of)} entries, expected {n}")
    for i, j in enumerate(config.slice_of[:n]):
        if j is None:
            broken.append(f"ONU {i} is not assigned to a slice")
        elif not isinstance(j, (int, np.integer)) or isinstance(j, bool):
            broken.append(f"ONU {i} has slice {j!r}")
        elif not 0 <= j < num_slices:
            broken.append(f"ONU {i} is in slice {j}, which has no weight")
    for j in config.slice_of[n:]:
        broken.append(f"unknown ONU in slice map: {j!r}")
    if broken:
        found.append((SlicePartitionBroken, "; ".join(broken)))

    bad_weights = [j for j, p in enumerate(config.slice_weights) if not p > 0]
    if bad_weights:
        found.append((NonPositiveWeight, f"slice weights must be positive (slices {bad_weights})"))

    if len(config.lambdas) != n:
        found.append((InvalidParameter, f"lambdas has {len(config.lambdas)} entries, expected {n}"))
    elif any(not v >= 0 or not np.isfinite(v) for v in config.lambdas):
        found.append((InvalidParameter, "arrival rates must be finite and non-negative"))
    if not config.unit_time > 0:
        found.append((InvalidParameter, f"unit_time must be positive, got {config.unit_time}"))
    if not config.delta_t >= 0:
        found.append((InvalidParameter, f"delta_t must be non-negative, got {config.delta_t}"))
    return found


def validate_config(config: PonConfig) -> PonConfig:
    """Return ``config`` unchanged if it is valid, else raise.

    The raised exception is of the class matching the first violation and
    lists all of them.
    """
    found = _violations(config)
    if found:
        cls = found[0][0]
        raise cls([msg for _, msg in found])
    return config


# --- key = value file format -------------------------------------------------

_SCALARS = {
    "num_onus": int,
    "cycle_length": float,
    "unit_time": float,
    "delta_t": float,
}
_VECTORS = {
    "guards": float,
    "slice_weights": float,
    "lambdas": float,
    "slice_of": int,
}


def parse_config(text: str) -> PonConfig:
    """Parse the ``key = value`` config format.

    One assignment per line; ``#`` starts a comment; vectors are
    whitespace- or comma-separated. Errors carry the offending line number.
    """
    values: dict = {}
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameter([f"expected 'key = value', got {raw.strip()!r}"], line=lineno)
        key, _, rhs = (part.strip() for part in line.partition("="))
        if key in seen:
            raise InvalidParameter([f"duplicate key {key!r} (first on line {seen[key]})"], line=lineno)
        seen[key] = lineno
        try:
            if key in _SCALARS:
                values[key] = _SCALARS[key](rhs)
            elif key in _VECTORS:
                conv = _VECTORS[key]
                values[key] = tuple(conv(tok) for tok in rhs.replace(",", " ").split())
            else:
                raise InvalidParameter([f"unknown key {key!r}"], line=lineno)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise InvalidParameter([f"bad value for {key!r}: {exc}"], line=lineno) from None

    missing = [k for k in ("num_onus", "slice_of", "slice_weights", "lambdas") if k not in values]
    if missing:
        raise InvalidParameter([f"missing required key(s): {', '.join(missing)}"])
    config = PonConfig(**values)
    try:
        return validate_config(config)
    except ConfigError as exc:
        # point at the line of the first key the problem mentions, if any
        msg = " ".join(exc.violations)
        line = min((ln for key, ln in seen.items() if key in msg), default=None)
        raise type(exc)(exc.violations, line=line) from None


def load_config(path: str | Path) -> PonConfig:
    return parse_config(Path(path).read_text())


def format_config(config: PonConfig) -> str:
    def vec(v):
        return " ".join(repr(x) for x in v)

    return "\n".join(
        [
            f"num_onus = {config.num_onus}",
            f"cycle_length = {config.cycle_length!r}",
            f"guards = {vec(config.guards)}",
            f"slice_of = {vec(config.slice_of)}",
            f"slice_weights = {vec(config.slice_weights)}",
            f"lambdas = {vec(config.lambdas)}",
            f"unit_time = {config.unit_time!r}",
            f"delta_t = {config.delta_t!r}",
            "",
        ]
    )


def save_config(config: PonConfig, path: str | Path) -> None:
    Path(path).write_text(format_config(config))


PRESETS = ("paper-base", "paper-sliceweight")


def preset(name: str) -> PonConfig:
    """Named network setups.

    ``paper-base``: ten ONUs in slices {0..4}, {5..7}, {8, 9}; ONUs 0, 3, 6, 9
    carry 10 packets/cycle on average and the rest 1; all slice weights 1.
    ``paper-sliceweight``: same, with the weight of the slice holding ONUs 8
    and 9 raised to 1.2.
    """
    base = PonConfig(
        num_onus=10,
        slice_of=(0, 0, 0, 0, 0, 1, 1, 1, 2, 2),
        slice_weights=(1.0, 1.0, 1.0),
        lambdas=tuple(10.0 if i in (0, 3, 6, 9) else 1.0 for i in range(10)),
    )
    if name == "paper-base":
        return base
    if name == "paper-sliceweight":
        return base.replace(slice_weights=(1.0, 1.0, 1.2))
    raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
