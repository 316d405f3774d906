import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import single_slice_config
from pondba.config import PonConfig
from pondba.offline import (
    DimensionTooLarge,
    NoConvergence,
    brute_force_optimum,
    hindsight_optimum,
    projected_descent_optimum,
    total_loss,
)


@pytest.mark.parametrize(
    "demands, expected",
    [
        ([[1, 1]], [0.5, 0.5]),
        ([[2, 1]], [1.0, 0.0]),
        ([[1, 0], [0, 1]], [0.5, 0.5]),
    ],
)
def test_hand_solved_instances(demands, expected):
    cfg = single_slice_config(2)
    x = hindsight_optimum(demands, cfg)
    np.testing.assert_allclose(x, expected, atol=1e-9)
    grid = brute_force_optimum(demands, cfg)
    w = np.ones(2)
    assert abs(total_loss(x, demands, w) - total_loss(grid, demands, w)) < 1e-3


def test_zero_demand_ties_resolve_to_origin():
    np.testing.assert_array_equal(brute_force_optimum([[0, 0, 0]], single_slice_config(3)), [0, 0, 0])


def test_grid_search_dimension_guard():
    with pytest.raises(DimensionTooLarge):
        brute_force_optimum([[1, 1, 1, 1]], single_slice_config(4))


def test_spare_capacity_gives_largest_demand():
    cfg = single_slice_config(2, cap=5.0)
    np.testing.assert_array_equal(hindsight_optimum([[1, 0.5], [2, 0.25]], cfg), [2, 0.5])


def test_projected_descent_agrees_on_smooth_instance():
    cfg = single_slice_config(2)
    x = projected_descent_optimum([[3, 2]], cfg, tol=1e-10)
    np.testing.assert_allclose(x, hindsight_optimum([[3, 2]], cfg), atol=1e-6)


def test_projected_descent_reports_best_iterate():
    with pytest.raises(NoConvergence) as info:
        projected_descent_optimum([[3, 2]], single_slice_config(2), tol=1e-14, max_iter=5)
    assert info.value.best is not None


@settings(max_examples=60)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 3))
def test_optimality_conditions(seed, n):
    # no feasible single-coordinate transfer improves the hindsight point
    rng = np.random.default_rng(seed)
    d = rng.uniform(0, 1.5, (rng.integers(1, 6), n))
    p = rng.uniform(0.5, 2, n)
    cfg = single_slice_config(n, weights=tuple(p))
    x = hindsight_optimum(d, cfg)
    base = total_loss(x, d, p)
    for i in range(n):
        for j in range(n):
            if i != j and x[i] > 1e-4:
                y = x.copy()
                y[i] -= 1e-4
                y[j] += 1e-4
                assert total_loss(y, d, p) >= base - 1e-12


def test_slice_weight_monotonicity():
    rng = np.random.default_rng(4)
    for _ in range(40):
        d = rng.uniform(0.2, 1.5, (rng.integers(1, 4), 3))
        cfg = PonConfig(num_onus=3, slice_of=(0, 0, 1), slice_weights=(1.0, 1.0), lambdas=(0, 0, 0))
        before = hindsight_optimum(d, cfg)
        after = hindsight_optimum(d, cfg.replace(slice_weights=(1.0, 1.5)))
        assert after[2] >= before[2] - 1e-9
        if 1e-6 < before[2] < 1 - 1e-6 and before.sum() >= 1 - 1e-9 and before[2] < d[:, 2].max() - 1e-6:
            assert after[2] > before[2]
        grid_b = brute_force_optimum(d, cfg, resolution=1e-2)
        grid_a = brute_force_optimum(d, cfg.replace(slice_weights=(1.0, 1.5)), resolution=1e-2)
        assert grid_a[2] >= grid_b[2] - 1e-2


def test_weight_scaling_invariance():
    rng = np.random.default_rng(9)
    d = rng.uniform(0, 1, (4, 3))
    cfg = single_slice_config(3, weights=(1.0, 2.0, 0.5))
    scaled = cfg.replace(slice_weights=(7.3, 14.6, 3.65))
    np.testing.assert_allclose(hindsight_optimum(d, cfg), hindsight_optimum(d, scaled), atol=1e-9)
