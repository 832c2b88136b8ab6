"""Single-cell downlink environment stepped one allocation period (AP) at a time."""

import copy
import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .channel import (_splitmix64, cqi_array, fading_gain_table, path_loss_db, update_shadowing,
                      wideband_sinr_db)
from .config import ResourceGrid, SimConfig
from .mobility import MobilityTrace, synth_trace
from .traffic import arrival_counts
from ..mac import run_slots

_EMPTY_I2 = np.zeros((0, 0), np.int64)
_EMPTY_F3 = np.zeros((1, 1, 1))


@dataclass
class VehicleState:
    id: int
    position: tuple          # (x, y) [m]
    shadowing_db: float
    attached: bool = True


@dataclass
class PeriodStats:
    """Raw outcome of one AP as seen by the infrastructure."""
    vehicle_ids: np.ndarray
    served_bytes: np.ndarray     # per user
    peak_occupancy: np.ndarray   # per user [bytes]
    cqi: np.ndarray              # per user, AP-averaged index
    arrived_bytes: int
    n_delivered: int
    n_dropped: int
    max_delay_slots: int
    slots_run: int
    pool_size: int
    events: np.ndarray = None


class SliceEnv:
    """Owns mobility, channel and queue state plus its private RNG streams.

    ``seed`` drives shadowing and arrivals (numpy ``Generator``) and the
    per-RB fading key; ``trace`` defaults to a synthetic trace seeded from
    the same value.
    """

    def __init__(self, cfg: SimConfig = None, trace: MobilityTrace = None, seed=None,
                 horizon=None):
        self.cfg = cfg or SimConfig()
        self.grid = ResourceGrid.from_config(self.cfg)
        self.seed = int(self.cfg.seed if seed is None else seed)
        if trace is None:
            horizon = 100.0 if horizon is None else horizon
            trace = synth_trace(self.cfg.n_vehicles_mean, horizon, self.cfg.vehicle_speed,
                                self.seed, radius=self.cfg.cell_radius)
        self.trace = trace
        self._times = np.array(trace.sample_times())
        self._positions = {t: trace.at(t) for t in self._times}
        self.rng = np.random.default_rng(self.seed)
        self.fading_key = int(_splitmix64(np.uint64(self.seed)))
        self._fading_gain = fading_gain_table(self.cfg.fading_sigma)
        self.ap_index = 0
        self.vehicles = {}       # vehicle id -> VehicleState
        self.queues = {}         # vehicle id -> list of [arrival_slot, remaining]

    # -- state -----------------------------------------------------------------
    def snapshot(self):
        state = (copy.deepcopy(self.rng.bit_generator.state), self.ap_index,
                 copy.deepcopy(self.vehicles), copy.deepcopy(self.queues))
        return state, self.state_hash()

    def restore(self, snap):
        state, digest = snap
        rng_state, ap_index, vehicles, queues = copy.deepcopy(state)
        self.rng.bit_generator.state = rng_state
        self.ap_index = ap_index
        self.vehicles = vehicles
        self.queues = queues
        if self.state_hash() != digest:
            raise RuntimeError("environment restore does not reproduce the snapshot")

    def state_hash(self) -> str:
        h = hashlib.sha256()
        h.update(repr(self.rng.bit_generator.state).encode())
        h.update(repr(self.ap_index).encode())
        for vid in sorted(self.vehicles):
            v = self.vehicles[vid]
            h.update(repr((vid, v.position, v.shadowing_db)).encode())
        for vid in sorted(self.queues):
            h.update(repr((vid, self.queues[vid])).encode())
        return h.hexdigest()

    @property
    def slot_clock(self) -> int:
        return self.ap_index * self.cfg.slots_per_ap

    # -- dynamics --------------------------------------------------------------
    def _trace_time(self, k):
        t = k * self.cfg.ap_duration
        i = np.searchsorted(self._times, t + 1e-9, side="right") - 1
        return self._times[max(i, 0)]

    def _update_mobility(self):
        cfg = self.cfg
        present = self._positions[self._trace_time(self.ap_index)]
        vehicles = {}
        for vid in sorted(present):
            old = self.vehicles.get(vid)
            if old is None:
                shadow = cfg.shadowing_sigma * float(self.rng.standard_normal())
            else:
                shadow = update_shadowing(old.shadowing_db, cfg.shadowing_rho,
                                          cfg.shadowing_sigma, self.rng)
            vehicles[vid] = VehicleState(vid, tuple(present[vid]), shadow)
        # queues of vehicles that left the cell are discarded
        self.queues = {vid: q for vid, q in self.queues.items() if vid in vehicles}
        self.vehicles = vehicles

    def channel_state(self):
        """Per attached vehicle (ascending id): ids, path loss [dB], shadowing, wideband SINR [dB]."""
        cfg = self.cfg
        vids = np.array(sorted(self.vehicles), dtype=np.int64)
        pos = np.array([self.vehicles[v].position for v in vids], dtype=float).reshape(-1, 2)
        dist = np.hypot(pos[:, 0], pos[:, 1])
        pl = np.asarray(path_loss_db(dist, cfg.pathloss_coeffs, cfg.pathloss_d_min)).reshape(-1)
        sh = np.array([self.vehicles[v].shadowing_db for v in vids])
        sinr_db = wideband_sinr_db(cfg, self.grid, pl, sh)
        return vids, pl, sh, sinr_db

    def next_period_arrivals(self):
        """Bytes that will arrive during the coming AP (look-ahead without side effects)."""
        snap = self.snapshot()
        self._update_mobility()
        counts = arrival_counts(len(self.vehicles), self.cfg.slots_per_ap,
                                self.cfg.arrival_rate, self.cfg.slot_duration, self.rng)
        self.restore(snap)
        return int(counts.sum()) * self.cfg.packet_size

    def _prepare_period(self):
        """Move to the next AP: mobility, shadowing and the AP's arrival draws."""
        cfg = self.cfg
        self._update_mobility()
        vids, _, _, sinr_db = self.channel_state()
        arrivals = arrival_counts(len(vids), cfg.slots_per_ap, cfg.arrival_rate,
                                  cfg.slot_duration, self.rng)
        existing = max((len(self.queues.get(int(v), ())) for v in vids), default=0)
        per_slot = int(arrivals.max()) if arrivals.size else 0
        cap = existing + (cfg.budget_slots + 1) * per_slot + 1
        q_slot = np.zeros((len(vids), cap), np.int64)
        q_rem = np.zeros((len(vids), cap), np.int64)
        q_len = np.zeros(len(vids), np.int64)
        for u, vid in enumerate(vids):
            q = self.queues.get(int(vid), ())
            for k, (a, r) in enumerate(q):
                q_slot[u, k] = a
                q_rem[u, k] = r
            q_len[u] = len(q)
        return _Period(vids, sinr_db, 10.0 ** (sinr_db / 10.0), arrivals, q_slot, q_rem, q_len)

    def _simulate(self, period, pool_size, *, stop_on_drop=False, log_events=False):
        cfg = self.cfg
        if not 0 <= pool_size <= self.grid.n_rbs:
            raise ValueError(f"pool size {pool_size} outside 0..{self.grid.n_rbs}")
        q_slot = period.q_slot.copy()
        q_rem = period.q_rem.copy()
        q_len = period.q_len.copy()
        q_head = np.zeros_like(q_len)
        if log_events:
            events = np.zeros((int(period.arrivals.sum()) + int(q_len.sum()) + 1, 5), np.int64)
        else:
            events = _EMPTY_I2
        slots_run, n_del, n_drop, max_delay, arrived, served, peak, n_ev = run_slots(
            period.arrivals, period.base_sinr, period.vids, q_slot, q_rem, q_head, q_len,
            pool_size, self.slot_clock, np.uint64(self.fading_key), self._fading_gain,
            self.grid.rb_bandwidth, cfg.slot_duration, cfg.budget_slots, cfg.packet_size,
            _EMPTY_F3, False, stop_on_drop, _EMPTY_I2, _EMPTY_I2, events)
        stats = PeriodStats(
            vehicle_ids=period.vids, served_bytes=served, peak_occupancy=peak,
            cqi=cqi_array(period.sinr_db).astype(float) if len(period.vids) else np.zeros(0),
            arrived_bytes=int(arrived), n_delivered=int(n_del), n_dropped=int(n_drop),
            max_delay_slots=int(max_delay), slots_run=int(slots_run), pool_size=pool_size,
            events=events[:n_ev] if log_events else None)
        return stats, (q_slot, q_rem, q_head, q_len)

    def run_period(self, pool_size, *, log_events=False) -> PeriodStats:
        """Advance one AP with the first ``pool_size`` RBs granted to the slice."""
        period = self._prepare_period()
        stats, (q_slot, q_rem, q_head, q_len) = self._simulate(period, pool_size,
                                                               log_events=log_events)
        cap = q_slot.shape[1]
        queues = {}
        for u, vid in enumerate(period.vids):
            if q_len[u]:
                idx = (q_head[u] + np.arange(q_len[u])) % cap
                queues[int(vid)] = [[int(a), int(r)] for a, r in zip(q_slot[u, idx], q_rem[u, idx])]
        self.queues = queues
        self.ap_index += 1
        return stats

    def first_feasible(self, pool_sizes):
        """Index of the first pool size whose coming AP runs without a deadline miss.

        Every candidate replays the same AP (same mobility, arrivals and
        fading); the environment is left exactly as it was.  Returns ``None``
        if no candidate is feasible.
        """
        snap = self.snapshot()
        period = self._prepare_period()
        found = None
        tried = {}
        for i, k in enumerate(pool_sizes):
            if k not in tried:
                stats, _ = self._simulate(period, k, stop_on_drop=True)
                tried[k] = stats.n_dropped == 0
            if tried[k]:
                found = i
                break
        self.restore(snap)
        return found


@dataclass
class _Period:
    vids: np.ndarray
    sinr_db: np.ndarray
    base_sinr: np.ndarray
    arrivals: np.ndarray
    q_slot: np.ndarray
    q_rem: np.ndarray
    q_len: np.ndarray
