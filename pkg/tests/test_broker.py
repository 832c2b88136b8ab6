import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ranslice.broker import (ApReport, Observation, SliceBroker, SliceRequest, apply_request,
                             check_qos, compute_reward, pool_size_for, run_ap)
from ranslice.sim import ResourceGrid, SimConfig
from ranslice.sim.channel import fading_index, fading_stream
from ranslice.sim.env import SliceEnv

from oracles import timeline_simulate

GRID = ResourceGrid.from_config(SimConfig())


def report(**kw):
    base = dict(qos_ok=True, max_delay=0.0, n_delivered=0, n_dropped=0, served_bytes=0,
                arrived_bytes=0, rb_pool_size=1)
    base.update(kw)
    return ApReport(**base)


def test_request_bounds():
    SliceRequest(0.1)
    SliceRequest(0.9)
    for bad in (0.05, 0.95, float("nan"), float("inf")):
        with pytest.raises(ValueError):
            SliceRequest(bad)


def test_pool_rounding():
    assert pool_size_for(0.1, GRID) == 5
    assert pool_size_for(0.9, GRID) == 45
    assert pool_size_for(0.5, GRID) == 25
    assert pool_size_for(0.107, GRID) == 5     # 5.35
    assert pool_size_for(0.29, GRID) == 15     # 14.5 rounds half up
    assert list(apply_request(SliceRequest(0.12), GRID)) == [0, 1, 2, 3, 4, 5]


def test_pool_never_empty():
    tiny = ResourceGrid(3, 180e3, 1e-3)
    assert pool_size_for(0.1, tiny) == 1


@given(st.floats(0.1, 0.9), st.floats(0.1, 0.9))
def test_pool_monotone(b1, b2):
    lo, hi = sorted((b1, b2))
    assert pool_size_for(lo, GRID) <= pool_size_for(hi, GRID)


def test_reward_examples():
    assert compute_reward(SliceRequest(0.35), True) == pytest.approx(0.65)
    assert compute_reward(SliceRequest(0.3), True) == pytest.approx(0.7)
    assert compute_reward(SliceRequest(0.9), True) == pytest.approx(0.1)
    assert compute_reward(SliceRequest(0.1), False) == -1.0


def test_qos_boundary():
    assert check_qos(report(max_delay=4e-3), 5e-3)
    assert check_qos(report(max_delay=5e-3), 5e-3)
    assert not check_qos(report(max_delay=6e-3), 5e-3)
    assert not check_qos(report(max_delay=1e-3, n_dropped=1), 5e-3)


def test_zero_traffic_ap():
    env = SliceEnv(SimConfig(arrival_rate=0.0), seed=4, horizon=5)
    obs, rep, reward = SliceBroker(env).step(0.1)
    assert rep.qos_ok and rep.n_delivered == rep.n_dropped == 0
    assert reward == pytest.approx(0.9)
    assert obs.max_buffer == 0.0 and obs.traffic == 0.0


def test_overload_ap_fails():
    env = SliceEnv(SimConfig(arrival_rate=20_000.0), seed=4, horizon=5)
    obs, rep, reward = SliceBroker(env).step(0.1)
    assert not rep.qos_ok and rep.n_dropped > 0 and reward == -1.0
    assert obs.max_buffer == 1.0


def test_run_ap_requires_contiguous_pool():
    env = SliceEnv(seed=1, horizon=5)
    with pytest.raises(ValueError):
        run_ap(env, [1, 2, 3])


def test_ap_is_1000_slots():
    env = SliceEnv(seed=2, horizon=5)
    run_ap(env, range(25))
    run_ap(env, range(25))
    assert env.slot_clock == 2000


def test_full_pool_seed3_meets_qos_and_matches_timeline():
    """One default AP at b = 0.9, checked end to end against the packet timeline."""
    env = SliceEnv(seed=3, horizon=5)
    snap = env.snapshot()
    period = env._prepare_period()
    gain = env._fading_gain
    n_slots, n_pool = 50, pool_size_for(0.9, env.grid)
    rates = []
    for s in range(n_slots):
        per_user = []
        for u, vid in enumerate(period.vids):
            stream = fading_stream(np.uint64(env.fading_key), s, vid)
            per_user.append([env.grid.rb_bandwidth
                             * math.log2(1.0 + period.base_sinr[u]
                                         * gain[fading_index(np.uint64(stream), r)])
                             for r in range(n_pool)])
        rates.append(per_user)
    ref = timeline_simulate(period.arrivals[:n_slots].tolist(), rates, period.vids.tolist())
    env.restore(snap)

    stats = env.run_period(n_pool, log_events=True)
    rep = SliceBroker(SliceEnv(seed=3, horizon=5)).step(0.9)[1]
    assert rep.qos_ok and rep.n_dropped == 0 and rep.max_delay <= 5e-3
    assert stats.n_delivered == rep.n_delivered > 0
    early = sorted(tuple(e) for e in stats.events.tolist() if e[0] < n_slots)
    assert early == sorted(e for step in ref for e in step["events"])


@given(st.integers(0, 10_000), st.floats(0.1, 0.9))
@settings(max_examples=15, deadline=None)
def test_observation_in_unit_box(seed, b):
    env = SliceEnv(seed=seed, horizon=4)
    broker = SliceBroker(env)
    for _ in range(2):
        obs, rep, reward = broker.step(b)
        v = obs.to_vector()
        assert v.shape == (7,)
        assert ((v >= 0) & (v <= 1)).all()
        assert reward in (-1.0, pytest.approx(1.0 - b))
        assert rep.arrived_bytes % 32 == 0


def test_initial_observation():
    assert Observation.initial().to_vector().tolist() == [0, 0, 1, 1, 1, 1, 1]


def test_wider_pool_never_hurts_on_sampled_aps():
    cfg = SimConfig()
    for seed in range(5):
        env = SliceEnv(cfg, seed=seed, horizon=4)
        feasible = [env.first_feasible([k]) == 0 for k in range(5, 46, 5)]
        # once a pool size is feasible every wider one observed is too
        assert feasible == sorted(feasible)
