"""Dynamic bandwidth allocation policies.

Every policy exposes ``decide(config)``, returning the window vector for
the coming cycle from what it has observed so far, and ``observe(demand,
report)``, called once the cycle has been served with the actual backlog
each ONU had at its window start and the (possibly stale) REPORT snapshot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import PonConfig, capacity
from .objective import ObjectiveInstance, subgradient
from .projection import project_capped_simplex, radial_rescale

SCHEDULES = ("inverse_sqrt", "inverse_linear")


@dataclass
class PolicyState:
    previous_allocation: np.ndarray | None = None
    demand_history: list = field(default_factory=list)
    report_history: list = field(default_factory=list)
    eta0: float = 0.1
    schedule: str = "inverse_sqrt"

    @property
    def step_index(self) -> int:
        return len(self.demand_history)

    def step_size(self, t: int) -> float:
        if self.schedule == "inverse_sqrt":
            return self.eta0 / math.sqrt(t)
        if self.schedule == "inverse_linear":
            return self.eta0 / t
        raise ValueError(f"unknown step schedule {self.schedule!r}")


def uniform_allocation(config: PonConfig) -> np.ndarray:
    return np.full(config.num_onus, capacity(config) / config.num_onus)


def oco_step(state: PolicyState, config: PonConfig) -> np.ndarray:
    """One projected-gradient step on the loss of the last observed cycle."""
    t = state.step_index
    if t == 0 or state.previous_allocation is None:
        return uniform_allocation(config)
    inst = ObjectiveInstance(state.demand_history[-1], config.onu_weights, capacity(config))
    x_prev = state.previous_allocation
    grad = subgradient(x_prev, inst)
    return project_capped_simplex(x_prev - state.step_size(t) * grad, inst.cap)


def maxwin_decide(reports, m: float, cap: float) -> np.ndarray:
    raw = np.minimum(m, np.asarray(reports, dtype=float))
    return radial_rescale(raw, cap)


def avgpred_decide(history, h: int, cap: float) -> np.ndarray:
    """Mean of the last ``h`` (or fewer, if not yet available) demand vectors."""
    recent = np.asarray(history[-h:], dtype=float)
    return radial_rescale(recent.mean(axis=0), cap)


class Policy:
    name = "policy"

    def __init__(self):
        self.state = PolicyState()

    def decide(self, config: PonConfig) -> np.ndarray:
        x = self._decide(config)
        self.state.previous_allocation = x
        return x

    def _decide(self, config: PonConfig) -> np.ndarray:
        raise NotImplementedError

    def observe(self, demand, report) -> None:
        self.state.demand_history.append(np.asarray(demand, dtype=float))
        self.state.report_history.append(np.asarray(report, dtype=float))

    def describe(self) -> str:
        return self.name


class OcoPolicy(Policy):
    name = "oco"

    def __init__(self, eta0: float = 0.1, schedule: str = "inverse_sqrt"):
        if schedule not in SCHEDULES:
            raise ValueError(f"unknown step schedule {schedule!r}; choose from {SCHEDULES}")
        if not eta0 > 0:
            raise ValueError("eta0 must be positive")
        super().__init__()
        self.state.eta0 = eta0
        self.state.schedule = schedule

    def _decide(self, config):
        return oco_step(self.state, config)

    def describe(self):
        return f"oco(eta0={self.state.eta0},{self.state.schedule})"


class MaxWinPolicy(Policy):
    name = "maxwin"

    def __init__(self, m: float = 0.2):
        if not m > 0:
            raise ValueError("maximum window m must be positive")
        super().__init__()
        self.m = m

    def _decide(self, config):
        if not self.state.report_history:
            return uniform_allocation(config)
        return maxwin_decide(self.state.report_history[-1], self.m, capacity(config))

    def describe(self):
        return f"maxwin(m={self.m})"


class AvgPredPolicy(Policy):
    name = "avgpred"

    def __init__(self, h: int = 100):
        if h < 1:
            raise ValueError("horizon h must be a positive integer")
        super().__init__()
        self.h = int(h)
        self._ring = None
        self._count = 0

    def observe(self, demand, report):
        super().observe(demand, report)
        if self._ring is None:
            self._ring = np.zeros((self.h, len(demand)))
        self._ring[self._count % self.h] = demand
        self._count += 1

    def _decide(self, config):
        if self._count == 0:
            return uniform_allocation(config)
        # ring buffer equals the last min(h, count) demands
        filled = self._ring[: min(self._count, self.h)]
        return radial_rescale(filled.mean(axis=0), capacity(config))

    def describe(self):
        return f"avgpred(h={self.h})"


class StaticPolicy(Policy):
    """Plays the same allocation every cycle."""

    name = "static"

    def __init__(self, allocation):
        super().__init__()
        self.allocation = np.asarray(allocation, dtype=float)

    def _decide(self, config):
        return self.allocation.copy()


POLICY_NAMES = ("oco", "maxwin", "avgpred")


def make_policy(name: str, **params) -> Policy:
    """Build a policy by name; unknown parameters for that policy are ignored."""
    if name == "oco":
        return OcoPolicy(eta0=params.get("eta0", 0.1), schedule=params.get("schedule", "inverse_sqrt"))
    if name == "maxwin":
        return MaxWinPolicy(m=params.get("m", 0.2))
    if name == "avgpred":
        return AvgPredPolicy(h=params.get("h", 100))
    raise ValueError(f"unknown policy {name!r}; valid names: {', '.join(POLICY_NAMES)}")
