"""Feasibility operators for the capped simplex ``{x >= 0, sum(x) <= cap}``."""

import numpy as np


def project_capped_simplex(y, cap: float) -> np.ndarray:
    """Euclidean projection of ``y`` onto ``{x >= 0, sum(x) <= cap}``.

    If clipping negatives already lands inside the set that is the answer;
    otherwise the projection lies on the face ``sum(x) = cap`` and is found by
    sort-and-threshold.
    """
    y = np.asarray(y, dtype=float)
    clipped = np.maximum(y, 0.0)
    if clipped.sum() <= cap:
        return clipped
    u = np.sort(y)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, y.size + 1)
    # largest k with u_k > (css_k - cap) / k
    rho = np.nonzero(u * k > css - cap)[0][-1]
    tau = (css[rho] - cap) / (rho + 1.0)
    return np.maximum(y - tau, 0.0)


def radial_rescale(y, cap: float) -> np.ndarray:
    """Scale ``y`` down onto the capacity budget, keeping the ratios between ONUs."""
    y = np.asarray(y, dtype=float)
    total = y.sum()
    if total <= cap:
        return y.copy()
    return y * (cap / total)
