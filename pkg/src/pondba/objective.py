"""Slice-weighted proportional-fairness utility.

Each ONU contributes ``b[i] * p[i] * min(log(x[i] + 1), log(b[i] + 1))``:
log utility of its window, weighted by its backlog and slice weight, and
capped once the window is large enough to drain the backlog.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import PonConfig, capacity

FEASIBILITY_TOL = 1e-9


class InfeasiblePoint(ValueError):
    pass


class ZeroReferenceComponent(ValueError):
    pass


@dataclass(frozen=True)
class ObjectiveInstance:
    demand: np.ndarray
    onu_weights: np.ndarray
    cap: float

    @property
    def weights(self) -> np.ndarray:
        """Effective weights ``w[i] = b[i] * p[i]``."""
        return self.demand * self.onu_weights

    @classmethod
    def from_config(cls, demand, config: PonConfig) -> "ObjectiveInstance":
        return cls(np.asarray(demand, dtype=float), config.onu_weights, capacity(config))


def effective_weights(demand, onu_weights) -> np.ndarray:
    return np.asarray(demand, dtype=float) * np.asarray(onu_weights, dtype=float)


def check_feasible(x, cap: float, tol: float = FEASIBILITY_TOL) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < -tol) or x.sum() > cap + tol:
        raise InfeasiblePoint(f"allocation {x} violates x >= 0, sum(x) <= {cap}")
    return x


def utility(x, inst: ObjectiveInstance) -> float:
    x = check_feasible(x, inst.cap)
    b = inst.demand
    return float(np.sum(inst.weights * np.minimum(np.log1p(x), np.log1p(b))))


def loss(x, inst: ObjectiveInstance) -> float:
    return -utility(x, inst)


def subgradient(x, inst: ObjectiveInstance) -> np.ndarray:
    """Subgradient of the loss; at the cap ``x[i] >= b[i]`` the zero branch is taken."""
    x = np.asarray(x, dtype=float)
    return np.where(x < inst.demand, -inst.weights / (x + 1.0), 0.0)


def check_proportional_fairness(x_star, w, candidates, tol: float = 1e-9) -> bool:
    """True iff no candidate has a positive weighted sum of relative gains over ``x_star``."""
    x_star = np.asarray(x_star, dtype=float)
    if np.any(x_star == 0):
        raise ZeroReferenceComponent(f"reference allocation has zero components: {x_star}")
    w = np.asarray(w, dtype=float)
    cands = np.atleast_2d(np.asarray(candidates, dtype=float))
    if cands.size == 0:
        return True
    gains = ((cands - x_star) / x_star) @ w
    return bool(np.all(gains <= tol))
