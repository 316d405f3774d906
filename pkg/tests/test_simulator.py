import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import replay_window
from pondba.config import PonConfig, preset
from pondba.policies import OcoPolicy, Policy, StaticPolicy, make_policy
from pondba.simulator import (
    FIT_TOL,
    Packet,
    QueueState,
    generate_arrivals,
    load_trace,
    run_simulation,
    save_trace,
    serve_window,
    window_offsets,
)


def one_onu(lam=1.0, **kw):
    return PonConfig(num_onus=1, slice_of=(0,), slice_weights=(1.0,), lambdas=(lam,), **kw)


def all_arrivals(trace, i):
    done = trace.packets_arrival[trace.packets_onu == i]
    pending = trace.pending_arrival[trace.pending_onu == i]
    return np.sort(np.concatenate((done, pending)))


# --- arrivals ------------------------------------------------------------------


def test_zero_rate_has_no_arrivals():
    rng = np.random.default_rng(0)
    for t in range(50):
        assert generate_arrivals(rng, 0.0, 0.5, t) == ([], [])


def test_reported_count_mean():
    rng = np.random.default_rng(1)
    counts = []
    for t in range(10_000):
        rep, hid = generate_arrivals(rng, 10.0, 0.0, t)
        assert hid == []
        counts.append(len(rep))
    assert np.mean(counts) == pytest.approx(10.0, rel=0.05)


def test_hidden_count_mean_and_placement():
    rng = np.random.default_rng(2)
    counts = []
    for t in range(10_000):
        rep, hid = generate_arrivals(rng, 1.0, 1.0, t)
        counts.append(len(hid))
        assert all(t <= p.arrival_time < t + 1 and p.hidden for p in hid)
        assert all(p.arrival_time == t for p in rep)  # reported segment is empty
    assert np.mean(counts) == pytest.approx(1.0, rel=0.05)


def test_arrival_segments():
    rng = np.random.default_rng(3)
    rep, hid = generate_arrivals(rng, 50.0, 0.25, 7, unit_time=0.02)
    assert all(7 <= p.arrival_time < 7.75 and p.size == 0.02 for p in rep)
    assert all(7.75 <= p.arrival_time < 8 for p in hid)
    with pytest.raises(ValueError):
        generate_arrivals(rng, -1.0, 0.0, 0)


# --- windows and service -------------------------------------------------------


@pytest.mark.parametrize(
    "x, d, expected",
    [([0.3, 0.2], [0, 0], [0, 0.3]), ([0.3, 0.2], [0.05, 0.05], [0, 0.35]), ([0, 0, 0], [0, 0, 0], [0, 0, 0])],
)
def test_window_offsets(x, d, expected):
    cfg = PonConfig(num_onus=len(x), slice_of=(0,) * len(x), slice_weights=(1.0,), lambdas=(0,) * len(x), guards=tuple(d))
    np.testing.assert_allclose(window_offsets(x, cfg, 4.0), np.array(expected) + 4.0, atol=1e-15)


def test_serve_underload():
    q = QueueState([Packet(0, -0.5, 0.01) for _ in range(5)])
    served, rest = serve_window(q, 0.0, 0.1)
    assert len(served) == 5 and rest.backlog == 0


def test_no_partial_packets():
    q = QueueState([Packet(0, -1.0, 0.01) for _ in range(3)])
    served, rest = serve_window(q, 0.0, 0.015)
    assert len(served) == 1 and len(rest.packets) == 2
    assert served[0].departure_time == pytest.approx(0.01)


def test_mid_window_arrival():
    ws = 3.0
    served, rest = serve_window(QueueState([Packet(0, ws + 0.005, 0.01)]), ws, 0.02)
    assert served[0].departure_time == pytest.approx(ws + 0.015)
    assert served[0].latency == pytest.approx(0.01)
    assert replay_window([ws + 0.005], ws, 0.02, 0.01) == pytest.approx([ws + 0.015])


@given(
    offsets=st.lists(st.floats(-1.0, 0.3), max_size=30),
    length=st.floats(0, 0.3),
)
def test_service_matches_event_replay(offsets, length):
    ws = 10.0
    pkts = [Packet(0, ws + o, 0.01) for o in offsets]
    served, rest = serve_window(QueueState(pkts), ws, length)
    expected = replay_window([ws + o for o in offsets], ws, length, 0.01)
    np.testing.assert_allclose([p.departure_time for p in served], expected, atol=1e-12)
    assert len(served) + len(rest.packets) == len(offsets)
    for p in served:
        assert p.departure_time >= p.arrival_time + 0.01 - 1e-12
        assert p.departure_time <= ws + length + FIT_TOL


def test_mixed_sizes_keep_fifo():
    q = QueueState([Packet(0, 0.0, 0.02), Packet(0, 0.1, 0.05), Packet(0, 0.2, 0.01)])
    served, rest = serve_window(q, 1.0, 0.06)
    assert [p.arrival_time for p in served] == [0.0]
    assert len(rest.packets) == 2  # head-of-line blocking


# --- full runs -----------------------------------------------------------------


class SpyPolicy(Policy):
    """Records how much history it had at every decision."""

    name = "spy"

    def __init__(self):
        super().__init__()
        self.seen = []

    def _decide(self, config):
        self.seen.append(len(self.state.demand_history))
        return np.full(config.num_onus, 0.1)


@pytest.fixture(scope="module")
def traces():
    out = []
    for dt, pol in [(0.0, "oco"), (0.5, "maxwin"), (1.0, "avgpred")]:
        cfg = preset("paper-base").replace(delta_t=dt, guards=(0.002,) * 10)
        out.append(run_simulation(cfg, make_policy(pol), 1500, 42))
    return out


def test_no_traffic_run():
    cfg = preset("paper-base").replace(lambdas=(0.0,) * 10)
    tr = run_simulation(cfg, OcoPolicy(), 100, 0)
    assert tr.latencies.size == 0 and np.all(tr.demands == 0)


def test_light_load_served_within_two_cycles():
    tr = run_simulation(one_onu(2.0), StaticPolicy([1.0]), 2000, 5)
    assert tr.unfinished.sum() == 0
    assert tr.latencies.max() < 2


def test_conservation(traces):
    for tr in traces:
        prev = np.vstack((np.zeros(tr.config.num_onus), tr.backlog_end[:-1]))
        np.testing.assert_allclose(tr.backlog_end, prev + tr.arrived - tr.served, rtol=0, atol=1e-12)
        assert np.all(tr.backlog_end[-1] == tr.unfinished * tr.config.unit_time)


def test_backlog_identity(traces):
    s = traces[0].config.unit_time
    for tr in traces:
        ws = tr.window_starts
        for i in range(tr.config.num_onus):
            arr = all_arrivals(tr, i)
            between = np.searchsorted(arr, ws[1:, i], side="right") - np.searchsorted(arr, ws[:-1, i], side="right")
            np.testing.assert_allclose(tr.demands[1:, i], tr.demands[:-1, i] - tr.served[:-1, i] + between * s, atol=1e-12)


def test_service_bounds(traces):
    for tr in traces:
        s = tr.config.unit_time
        assert np.all(tr.served <= tr.allocations + FIT_TOL)
        for i in range(tr.config.num_onus):
            arr = all_arrivals(tr, i)
            ws, x = tr.window_starts[:, i], tr.allocations[:, i]
            during = np.searchsorted(arr, ws + x, side="right") - np.searchsorted(arr, ws, side="right")
            assert np.all(tr.served[:, i] <= tr.demands[:, i] + during * s + 1e-12)


def test_fifo_and_causality(traces):
    for tr in traces:
        s = tr.config.unit_time
        assert np.all(tr.packets_departure >= tr.packets_arrival + s - 1e-12)
        for i in range(tr.config.num_onus):
            sel = tr.packets_onu == i
            assert np.all(np.diff(tr.packets_arrival[sel]) >= 0)
            assert np.all(np.diff(tr.packets_departure[sel]) > 0)


def test_policy_sees_only_past_cycles():
    spy = SpyPolicy()
    tr = run_simulation(preset("paper-base"), spy, 50, 1)
    assert spy.seen == list(range(50))
    np.testing.assert_array_equal(np.array(spy.state.demand_history), tr.demands)


def test_zero_delta_reports_equal_demands(traces):
    tr = traces[0]
    np.testing.assert_array_equal(tr.reports, tr.demands)
    assert np.all(traces[2].reports <= traces[2].demands)
    assert np.any(traces[2].reports < traces[2].demands)


def test_determinism():
    cfg = preset("paper-base").replace(delta_t=0.5)
    a = run_simulation(cfg, OcoPolicy(), 300, 9)
    b = run_simulation(cfg, OcoPolicy(), 300, 9)
    for field in ("allocations", "demands", "reports", "packets_arrival", "packets_departure"):
        assert getattr(a, field).tobytes() == getattr(b, field).tobytes()
    c = run_simulation(cfg, OcoPolicy(), 300, 10)
    assert not np.array_equal(a.demands, c.demands)


def test_infeasible_policy_output_is_rejected():
    with pytest.raises(ValueError):
        run_simulation(preset("paper-base"), StaticPolicy(np.full(10, 0.2)), 5, 0)
    with pytest.raises(ValueError):
        run_simulation(preset("paper-base"), OcoPolicy(), 0, 0)


def test_trace_round_trip(tmp_path, traces):
    tr = traces[1]
    save_trace(tr, tmp_path)
    back = load_trace(tmp_path)
    assert back.config == tr.config and back.seed == tr.seed and back.policy == tr.policy
    for field in ("allocations", "demands", "reports", "served", "window_starts", "arrived", "backlog_end",
                  "packets_onu", "packets_arrival", "packets_departure", "unfinished", "pending_onu", "pending_arrival"):
        np.testing.assert_array_equal(getattr(back, field), getattr(tr, field))
