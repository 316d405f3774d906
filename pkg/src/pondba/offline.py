"""Offline solvers for the best fixed allocation in hindsight.

The summed loss over a demand history is separable across ONUs, each term
concave-piecewise in its own window, so the exact maximizer follows from
the KKT conditions: every ONU takes the window at which its marginal utility
drops to a common price ``tau``, and ``tau`` is found by bisection so the
windows fill the capacity.
"""

from __future__ import annotations

import numpy as np

from .config import PonConfig, capacity
from .projection import project_capped_simplex


class NoConvergence(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DimensionTooLarge(ValueError):
    pass


def _as_matrix(demands) -> np.ndarray:
    d = np.atleast_2d(np.asarray(demands, dtype=float))
    if d.shape[0] == 0:
        raise ValueError("need at least one demand vector")
    return d


def total_loss(x, demands, onu_weights) -> float:
    """Sum over cycles of the per-cycle loss at a fixed allocation ``x``."""
    d = _as_matrix(demands)
    x = np.asarray(x, dtype=float)
    return float(-np.sum(d * onu_weights * np.minimum(np.log1p(x), np.log1p(d))))


class _Segments:
    """Per-ONU piecewise description of the marginal utility.

    On ``[lo[i,k], hi[i,k])`` the right derivative of ONU i's summed utility
    is ``mass[i,k] / (1 + x)``, where ``mass`` is the total weight of cycles
    whose demand exceeds ``x``.
    """

    def __init__(self, demands: np.ndarray, onu_weights: np.ndarray):
        n = demands.shape[1]
        per_onu = []
        for i in range(n):
            b = demands[:, i]
            w = b * onu_weights[i]
            vals, inv = np.unique(b, return_inverse=True)
            wsum = np.bincount(inv, weights=w, minlength=vals.size)
            # weight of cycles with demand strictly above each breakpoint
            above = wsum[::-1].cumsum()[::-1]
            above = np.append(above, 0.0)[1:]
            pos = vals > 0
            vals, above = vals[pos], above[pos]
            total = float(w.sum())
            lo = np.concatenate(([0.0], vals))
            hi = np.concatenate((vals, [np.inf]))
            mass = np.concatenate(([total], above))
            per_onu.append((lo, hi, mass))
        k = max(len(s[0]) for s in per_onu)
        self.lo = np.full((n, k), np.inf)
        self.hi = np.full((n, k), np.inf)
        self.mass = np.zeros((n, k))
        for i, (lo, hi, mass) in enumerate(per_onu):
            self.lo[i, : lo.size] = lo
            self.hi[i, : hi.size] = hi
            self.mass[i, : mass.size] = mass
        self.max_demand = demands.max(axis=0)
        self.max_price = float(self.mass[:, 0].max())

    def windows(self, price: float) -> np.ndarray:
        if price <= 0:
            return np.maximum(self.max_demand, 0.0)
        cand = np.maximum(self.lo, self.mass / price - 1.0)
        cand = np.where(cand < self.hi, cand, np.inf)
        return cand.min(axis=1)


def hindsight_optimum(demands, config: PonConfig, tol: float = 1e-9, max_iter: int = 200) -> np.ndarray:
    """Best fixed allocation for a demand history (exact up to ``tol``).

    Where capacity exceeds what the ONUs could ever use, each ONU gets its
    largest observed demand (the smallest maximizer).
    """
    d = _as_matrix(demands)
    cap = capacity(config)
    seg = _Segments(d, config.onu_weights)
    x = seg.windows(0.0)
    if x.sum() <= cap:
        return x
    lo, hi = 0.0, seg.max_price
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if seg.windows(mid).sum() > cap:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(hi, 1.0):
            break
    x = seg.windows(hi)
    if cap - x.sum() > tol * max(cap, 1.0):
        raise NoConvergence(f"price bisection left {cap - x.sum():.3g} capacity unused", best=x)
    return x


def projected_descent_optimum(
    demands,
    config: PonConfig,
    tol: float = 1e-9,
    max_iter: int = 1_000_000,
    eta0: float = 0.1,
) -> np.ndarray:
    """Hindsight optimum by full-gradient projected descent with steps ``eta0/sqrt(k)``.

    Slow on this nonsmooth objective; kept as a cross-check for
    :func:`hindsight_optimum`. Raises :class:`NoConvergence` carrying the best
    iterate if the step displacement never falls below ``tol``.
    """
    d = _as_matrix(demands)
    cap = capacity(config)
    w = d * config.onu_weights
    x = np.full(d.shape[1], cap / d.shape[1])
    best, best_val = x, total_loss(x, d, config.onu_weights)
    for k in range(1, max_iter + 1):
        grad = -np.where(x < d, w, 0.0).sum(axis=0) / (x + 1.0) / d.shape[0]
        x_new = project_capped_simplex(x - eta0 / np.sqrt(k) * grad, cap)
        step = np.max(np.abs(x_new - x))
        x = x_new
        val = total_loss(x, d, config.onu_weights)
        if val < best_val:
            best, best_val = x, val
        if step < tol:
            return best
    raise NoConvergence(f"no convergence after {max_iter} iterations", best=best)


def brute_force_optimum(demands, config: PonConfig, resolution: float = 1e-3) -> np.ndarray:
    """Exhaustive grid search over the feasible set (N <= 3).

    Ties resolve to the lexicographically smallest grid point.
    """
    d = _as_matrix(demands)
    n_onus = d.shape[1]
    if n_onus > 3:
        raise DimensionTooLarge(f"grid search supports at most 3 ONUs, got {n_onus}")
    cap = capacity(config)
    steps = int(np.floor(cap / resolution + 1e-9))
    grid = np.arange(steps + 1) * resolution
    w = d * config.onu_weights
    # per-ONU utility at every grid value: vals[i, k]
    vals = np.stack(
        [(w[:, i, None] * np.minimum(np.log1p(grid)[None, :], np.log1p(d[:, i])[:, None])).sum(axis=0) for i in range(n_onus)]
    )

    def best_prefix(v):
        # best value and first index achieving it among v[0..k], for every k
        run = np.maximum.accumulate(v)
        idx = np.zeros(v.size, dtype=int)
        cur = 0
        for k in range(1, v.size):
            if v[k] > v[cur]:
                cur = k
            idx[k] = cur
        return run, idx

    if n_onus == 1:
        return np.array([grid[int(np.argmax(vals[0]))]])
    last_val, last_idx = best_prefix(vals[-1])
    if n_onus == 2:
        tot = vals[0] + last_val[steps - np.arange(steps + 1)]
        a = int(np.argmax(tot))
        return np.array([grid[a], grid[last_idx[steps - a]]])
    best, best_pt = -np.inf, None
    for a in range(steps + 1):
        rem = steps - a
        b = np.arange(rem + 1)
        tot = vals[0, a] + vals[1, b] + last_val[rem - b]
        j = int(np.argmax(tot))
        if tot[j] > best:
            best, best_pt = tot[j], (a, j, last_idx[rem - j])
    return grid[np.array(best_pt)]
