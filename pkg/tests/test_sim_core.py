import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ranslice.sim import (ResourceGrid, SimConfig, generate_arrivals, load_config,
                          load_mobility_trace, path_loss_db, save_config, save_mobility_trace,
                          shannon_rate, sinr_per_rb, sinr_to_cqi, synth_trace, update_shadowing)
from ranslice.sim.channel import (fading_db, noise_per_rb_dbm, tx_power_per_rb_dbm)
from ranslice.sim.env import SliceEnv
from ranslice.sim.mobility import MobilityTrace, TraceError
from ranslice.sim.traffic import arrival_counts


def write(tmp_path, text, name="trace.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


# --- mobility traces ---------------------------------------------------------------

def test_load_minimal_trace(tmp_path):
    p = write(tmp_path, "time_s,vehicle_id,x_m,y_m\n0,1,0,0\n1,1,10,0\n")
    trace = load_mobility_trace(p)
    assert trace.horizon == 1.0
    assert trace.vehicle_ids == [1]
    assert trace.at(1.0) == {1: (10.0, 0.0)}


def test_per_vehicle_time_regression_names_line(tmp_path):
    p = write(tmp_path, "time_s,vehicle_id,x_m,y_m\n0,1,0,0\n1,2,0,0\n1,1,5,0\n1,1,6,0\n")
    with pytest.raises(TraceError, match=r":5:"):
        load_mobility_trace(p)


def test_parse_error_names_line(tmp_path):
    p = write(tmp_path, "time_s,vehicle_id,x_m,y_m\n0,1,0,0\n1,one,0,0\n")
    with pytest.raises(TraceError, match=r":3:"):
        load_mobility_trace(p)


def test_empty_trace_rejected(tmp_path):
    with pytest.raises(TraceError, match="empty"):
        load_mobility_trace(write(tmp_path, "time_s,vehicle_id,x_m,y_m\n"))
    with pytest.raises(TraceError):
        load_mobility_trace(write(tmp_path, "", "blank.csv"))


def test_bad_header_rejected(tmp_path):
    with pytest.raises(TraceError, match="header"):
        load_mobility_trace(write(tmp_path, "t,id,x,y\n0,1,0,0\n"))


def test_synthetic_trace_round_trip(tmp_path):
    trace = synth_trace(25, 100.0, 13.0, seed=11)
    path = tmp_path / "t.csv"
    save_mobility_trace(trace, path)
    assert load_mobility_trace(path) == trace


def test_synth_trace_population_near_target():
    means = [synth_trace(25, 100.0, 13.0, seed=s).attached_counts().mean() for s in range(20)]
    assert abs(np.mean(means) - 25) <= 0.2 * 25
    seven = synth_trace(25, 100.0, 13.0, seed=7).attached_counts().mean()
    assert abs(seven - 25) <= 0.2 * 25


def test_synth_trace_static_single_vehicle():
    trace = synth_trace(1, 10.0, 0.0, seed=3)
    assert trace.vehicle_ids == [1]
    positions = {(x, y) for _, _, x, y in trace.samples}
    assert len(positions) == 1
    assert len(trace.samples) == 11


def test_synth_trace_deterministic():
    a = synth_trace(25, 50.0, 13.0, seed=42)
    b = synth_trace(25, 50.0, 13.0, seed=42)
    assert a.samples == b.samples
    assert synth_trace(25, 50.0, 13.0, seed=43).samples != a.samples


def test_synth_trace_stays_in_cell():
    trace = synth_trace(25, 200.0, 30.0, seed=1, radius=250.0)
    for t, _, x, y in trace.samples:
        assert math.hypot(x, y) <= 250.0 + 1e-9
    times = [s[0] for s in trace.samples]
    assert times == sorted(times)


# --- link budget ---------------------------------------------------------------

def test_path_loss_reference_points():
    assert path_loss_db(1000.0) == pytest.approx(128.1, abs=1e-12)
    assert path_loss_db(100.0) == pytest.approx(90.5, abs=1e-12)
    assert path_loss_db(0.1) == path_loss_db(10.0)


@given(st.floats(10.0, 1e5), st.floats(10.0, 1e5))
def test_path_loss_monotone(d1, d2):
    lo, hi = sorted((d1, d2))
    assert path_loss_db(lo) <= path_loss_db(hi)


def test_shadowing_frozen_and_noiseless():
    rng = np.random.default_rng(0)
    assert update_shadowing(3.7, 1.0, 8.0, rng) == 3.7
    assert update_shadowing(3.7, 0.9, 0.0, rng) == pytest.approx(0.9 * 3.7, abs=0)


def test_shadowing_iid_variance():
    rng = np.random.default_rng(1)
    draws = update_shadowing(np.zeros(100_000), 0.0, 8.0, rng)
    assert abs(draws.var() / 64.0 - 1.0) < 0.05


def test_shadowing_stationary_variance():
    rng = np.random.default_rng(2)
    x, xs = 0.0, np.empty(100_000)
    for i in range(xs.size):
        x = update_shadowing(x, 0.9, 8.0, rng)
        xs[i] = x
    assert abs(xs.var() / 64.0 - 1.0) < 0.05


def test_shadowing_rejects_bad_rho():
    with pytest.raises(ValueError):
        update_shadowing(0.0, 1.5, 8.0, np.random.default_rng(0))


def test_sinr_zero_db_is_unity():
    cfg = SimConfig()
    grid = ResourceGrid.from_config(cfg)
    pl = tx_power_per_rb_dbm(cfg, grid) - noise_per_rb_dbm(cfg, grid)
    sinr = sinr_per_rb(cfg, pl, 0.0, np.zeros(grid.n_rbs))
    np.testing.assert_allclose(sinr, 1.0, rtol=1e-12)


def test_sinr_fading_3db_doubles():
    cfg = SimConfig()
    fading = np.zeros(50)
    fading[7] = 3.0
    sinr = sinr_per_rb(cfg, 100.0, 0.0, fading)
    assert sinr[7] / sinr[0] == pytest.approx(1.9953, abs=1e-4)


def test_sinr_default_link_budget_200m():
    # 46 dBm - 10 log10(50) = 29.0103 dBm per RB
    # noise -174 + 10 log10(180e3) + 9 = -112.4473 dBm
    # PL(200 m) = 128.1 + 37.6 log10(0.2) = 101.8187 dB
    cfg = SimConfig()
    sinr = sinr_per_rb(cfg, path_loss_db(200.0), 0.0, np.zeros(50))
    assert 10 * np.log10(sinr[0]) == pytest.approx(39.6388, abs=1e-3)


def test_sinr_wrong_fading_length():
    with pytest.raises(ValueError):
        sinr_per_rb(SimConfig(), 100.0, 0.0, np.zeros(3))


def test_shannon_examples():
    assert shannon_rate(180e3, 1.0) == 180_000
    assert shannon_rate(180e3, 0.0) == 0
    assert shannon_rate(180e3, 15.0) == 720_000


@given(st.floats(1e3, 1e8), st.floats(0, 1e6), st.floats(0, 1e6))
def test_shannon_linear_and_increasing(bw, s1, s2):
    assert shannon_rate(2 * bw, s1) == pytest.approx(2 * shannon_rate(bw, s1))
    if s1 < s2:
        assert shannon_rate(bw, s1) <= shannon_rate(bw, s2)


def test_cqi_examples():
    assert sinr_to_cqi(-20.0) == 1
    assert sinr_to_cqi(30.0) == 15
    assert sinr_to_cqi(10.5) == 9
    assert sinr_to_cqi(-6.7) == 1
    assert sinr_to_cqi(22.7) == 15


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_cqi_monotone(a, b):
    lo, hi = sorted((a, b))
    assert 1 <= sinr_to_cqi(lo) <= sinr_to_cqi(hi) <= 15


def test_fading_is_addressable_and_calibrated():
    a = fading_db(123, 7, 4, 50, 3.0)
    assert np.array_equal(a, fading_db(123, 7, 4, 50, 3.0))
    assert not np.array_equal(a, fading_db(123, 8, 4, 50, 3.0))
    draws = np.concatenate([fading_db(99, s, v, 50, 1.0) for s in range(400) for v in range(5)])
    assert abs(draws.mean()) < 0.02
    assert abs(draws.std() - 1.0) < 0.02


# --- traffic ---------------------------------------------------------------------

def test_arrivals_zero_rate():
    rng = np.random.default_rng(0)
    assert all(generate_arrivals([1, 2, 3], 0.0, 1e-3, rng) == [] for _ in range(100))


def test_arrivals_mean_rate():
    rng = np.random.default_rng(5)
    n = sum(len(generate_arrivals(range(10), 250.0, 1e-3, rng)) for _ in range(100_000))
    assert abs(n / 1e6 / 0.25 - 1.0) < 0.01
    counts = arrival_counts(1, 1_000_000, 250.0, 1e-3, np.random.default_rng(6))
    assert abs(counts.mean() / 0.25 - 1.0) < 0.01
    assert abs(counts.var() / 0.25 - 1.0) < 0.02


def test_arrivals_packets_well_formed():
    pkts = generate_arrivals([5], 5000.0, 1e-3, np.random.default_rng(1), slot_index=9)
    assert pkts and all(p.owner == 5 and p.size == 32 == p.remaining and p.arrival_slot == 9
                        for p in pkts)


def test_arrivals_deterministic():
    a = [len(generate_arrivals(range(4), 250.0, 1e-3, np.random.default_rng(3))) for _ in range(3)]
    seq1 = [generate_arrivals(range(4), 250.0, 1e-3, r) for r in [np.random.default_rng(8)] * 50]
    seq2 = [generate_arrivals(range(4), 250.0, 1e-3, r) for r in [np.random.default_rng(8)] * 50]
    assert seq1 == seq2
    assert len(set(a)) == 1


# --- config and grid ----------------------------------------------------------------

def test_default_grid():
    grid = ResourceGrid.from_config(SimConfig())
    assert grid.n_rbs == 50
    assert grid.rb_bandwidth == 180e3
    assert grid.n_rbs * grid.rb_bandwidth <= 10e6


def test_config_json_round_trip(tmp_path):
    cfg = SimConfig(arrival_rate=100.0, seed=2**63)
    save_config(cfg, tmp_path / "c.json")
    assert load_config(tmp_path / "c.json") == cfg


def test_config_unknown_key(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"arrival_rate": 1.0, "bogus": 2}))
    with pytest.raises(KeyError, match="bogus"):
        load_config(tmp_path / "c.json")


@pytest.mark.parametrize("kw", [dict(shadowing_rho=1.2), dict(delay_budget=5.5e-3),
                                dict(cell_radius=0.0), dict(slot_duration=-1e-3)])
def test_config_invariants(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


# --- environment ---------------------------------------------------------------------

def test_env_deterministic():
    def run():
        env = SliceEnv(seed=17, horizon=10)
        return [(s.n_delivered, s.n_dropped, s.max_delay_slots, s.arrived_bytes,
                 s.served_bytes.tolist(), s.peak_occupancy.tolist())
                for s in (env.run_period(k) for k in (5, 12, 30, 8))]
    assert run() == run()


def test_env_period_length():
    env = SliceEnv(seed=1, horizon=5)
    assert env.run_period(25).slots_run == 1000
    assert env.slot_clock == 1000


def test_env_attached_follow_trace():
    trace = MobilityTrace([(0.0, 1, 10.0, 0.0), (0.0, 2, 20.0, 0.0), (1.0, 2, 25.0, 0.0)])
    env = SliceEnv(SimConfig(), trace=trace, seed=0)
    assert env.run_period(10).vehicle_ids.tolist() == [1, 2]
    assert env.run_period(10).vehicle_ids.tolist() == [2]
    assert env.vehicles[2].position == (25.0, 0.0)
