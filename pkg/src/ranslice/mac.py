"""Throughput-to-Average (TTA) downlink scheduling and per-packet delay accounting.

Two implementations of the same slot procedure live here:

* object-level functions (:func:`schedule_slot`, :func:`serve_queues`,
  :func:`step_slot`) that operate on :class:`UserQueue` instances and are
  convenient to inspect, and
* :func:`run_slots`, a compiled loop over a whole allocation period used by
  the environment.  Both must agree bit for bit on identical inputs.

Per slot the order is: arrivals, deadline drops at the head of each queue,
RB assignment among backlogged users, FIFO byte service.
"""

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .sim.channel import fading_index, fading_stream

AVG_RATE_ALPHA = 0.1   # smoothing of UserQueue.avg_rate (diagnostics only)


@dataclass
class UserQueue:
    owner: int
    packets: deque = field(default_factory=deque)
    served_bytes_total: int = 0
    avg_rate: float = 0.0   # [bit/s]

    @property
    def occupancy_bytes(self) -> int:
        return sum(p.remaining for p in self.packets)

    @property
    def backlogged(self) -> bool:
        return bool(self.packets)


@dataclass
class SlotAllocation:
    assignment: dict = field(default_factory=dict)   # RB index -> vehicle id

    def rbs_of(self, owner):
        return sorted(rb for rb, v in self.assignment.items() if v == owner)


@dataclass
class SlotReport:
    served_bytes: dict = field(default_factory=dict)   # vehicle id -> bytes
    delivered: list = field(default_factory=list)      # (packet, delay in slots)
    dropped: list = field(default_factory=list)        # (packet, age in slots)


def tta_metric(rb_rate, user_mean_rate_over_rbs):
    """Achievable rate on one RB relative to the user's mean over the pool."""
    if user_mean_rate_over_rbs <= 0:
        return 0.0
    return rb_rate / user_mean_rate_over_rbs


def schedule_slot(queues, pool, rates) -> SlotAllocation:
    """Give every RB of ``pool`` to the backlogged user with the highest TTA metric.

    ``rates[i][j]`` is the rate [bit/s] of ``queues[i]`` on RB ``pool[j]``.
    Ties go to the lowest vehicle id.
    """
    rates = np.asarray(rates, dtype=float)
    pool = list(pool)
    if rates.shape != (len(queues), len(pool)):
        raise ValueError(f"rates shape {rates.shape} does not cover "
                         f"{len(queues)} users x {len(pool)} RBs")
    contenders = sorted((q.owner, i) for i, q in enumerate(queues) if q.backlogged)
    alloc = SlotAllocation()
    if not contenders or not pool:
        return alloc
    means = {i: sum(rates[i, j] for j in range(len(pool))) / len(pool) for _, i in contenders}
    for j, rb in enumerate(pool):
        best, best_metric = None, -1.0
        for owner, i in contenders:
            m = tta_metric(rates[i, j], means[i])
            if m > best_metric:
                best, best_metric = owner, m
        alloc.assignment[rb] = best
    return alloc


def drop_expired(queues, slot, budget_slots):
    """Remove head packets whose age (delay if served now) exceeds the budget."""
    dropped = []
    for q in queues:
        while q.packets and slot - q.packets[0].arrival_slot + 1 > budget_slots:
            p = q.packets.popleft()
            dropped.append((p, slot - p.arrival_slot + 1))
    return dropped


def serve_queues(alloc, queues, rates, slot, *, pool, slot_duration=1e-3,
                 budget_slots=5) -> SlotReport:
    """Drain each user's queue FIFO by the bytes its assigned RBs carry this slot."""
    rates = np.asarray(rates, dtype=float)
    report = SlotReport(dropped=drop_expired(queues, slot, budget_slots))
    col = {rb: j for j, rb in enumerate(pool)}
    for i, q in enumerate(queues):
        bits = 0.0
        for rb in alloc.rbs_of(q.owner):
            bits += rates[i, col[rb]]
        budget = int(math.floor(bits * slot_duration / 8.0))
        served = 0
        while budget > 0 and q.packets:
            head = q.packets[0]
            take = min(head.remaining, budget)
            head.remaining -= take
            budget -= take
            served += take
            if head.remaining == 0:
                q.packets.popleft()
                report.delivered.append((head, slot - head.arrival_slot + 1))
        q.served_bytes_total += served
        q.avg_rate = ((1 - AVG_RATE_ALPHA) * q.avg_rate
                      + AVG_RATE_ALPHA * served * 8.0 / slot_duration)
        report.served_bytes[q.owner] = served
    return report


def step_slot(queues, pool, rates, slot, *, slot_duration=1e-3, budget_slots=5):
    """Drops, TTA assignment and service for one slot (arrivals already queued)."""
    dropped = drop_expired(queues, slot, budget_slots)
    alloc = schedule_slot(queues, pool, rates)
    report = serve_queues(alloc, queues, rates, slot, pool=pool,
                          slot_duration=slot_duration, budget_slots=budget_slots)
    report.dropped = dropped + report.dropped
    return alloc, report


# --- compiled period loop -----------------------------------------------------

@njit
def run_slots(arrivals, base_sinr, vids, q_slot, q_rem, q_head, q_len,
              n_pool, slot0, key, fading_gain, rb_bandwidth, slot_duration,
              budget_slots, packet_size, rate_table, use_table, stop_on_drop,
              log_assign, log_served, log_events):
    """Simulate ``arrivals.shape[0]`` slots in place on ring-buffer queues.

    Users are indexed in ascending vehicle id.  ``q_slot``/``q_rem`` hold the
    arrival slot and remaining bytes of each queued packet; ``q_head``/``q_len``
    locate the FIFO within each row.  ``fading_gain`` is the linear gain
    table addressed by the per-RB fading hash.  With ``use_table`` the per-RB rates are
    read from ``rate_table[slot, user, rb]`` instead of the channel model.

    Logs are written only when their arrays are non-empty.  ``log_events``
    rows are (slot, user, arrival_slot, kind, delay) with kind 0 = delivered,
    1 = dropped.

    Returns (slots_run, n_delivered, n_dropped, max_delay, arrived_bytes,
    served_bytes[U], peak_occupancy[U], n_events).
    """
    n_slots = arrivals.shape[0]
    n_users = arrivals.shape[1]
    cap = q_slot.shape[1]
    byte_scale = slot_duration / 8.0

    occ = np.zeros(n_users, np.int64)
    for u in range(n_users):
        for k in range(q_len[u]):
            occ[u] += q_rem[u, (q_head[u] + k) % cap]
    served = np.zeros(n_users, np.int64)
    peak = np.zeros(n_users, np.int64)
    rates = np.zeros((n_users, max(n_pool, 1)))
    means = np.zeros(n_users)
    bits = np.zeros(n_users)
    backlog = np.zeros(n_users, np.int64)
    do_assign = log_assign.shape[0] > 0
    do_served = log_served.shape[0] > 0
    do_events = log_events.shape[0] > 0

    n_delivered = 0
    n_dropped = 0
    max_delay = 0
    arrived = 0
    n_ev = 0
    s = 0
    while s < n_slots:
        gslot = slot0 + s
        for u in range(n_users):
            for _ in range(arrivals[s, u]):
                pos = (q_head[u] + q_len[u]) % cap
                q_slot[u, pos] = gslot
                q_rem[u, pos] = packet_size
                q_len[u] += 1
                occ[u] += packet_size
                arrived += packet_size
        stop = False
        for u in range(n_users):
            while q_len[u] > 0 and gslot - q_slot[u, q_head[u]] + 1 > budget_slots:
                h = q_head[u]
                if do_events:
                    log_events[n_ev, 0] = gslot
                    log_events[n_ev, 1] = u
                    log_events[n_ev, 2] = q_slot[u, h]
                    log_events[n_ev, 3] = 1
                    log_events[n_ev, 4] = gslot - q_slot[u, h] + 1
                    n_ev += 1
                occ[u] -= q_rem[u, h]
                q_head[u] = (h + 1) % cap
                q_len[u] -= 1
                n_dropped += 1
                stop = stop_on_drop
            if occ[u] > peak[u]:
                peak[u] = occ[u]
        if stop:
            s += 1
            break

        nb = 0
        for u in range(n_users):
            if q_len[u] > 0:
                backlog[nb] = u
                nb += 1
        if nb > 0 and n_pool > 0:
            for i in range(nb):
                u = backlog[i]
                total = 0.0
                stream = fading_stream(key, gslot, vids[u])
                for r in range(n_pool):
                    if use_table:
                        rate = rate_table[s, u, r]
                    else:
                        g = base_sinr[u] * fading_gain[fading_index(stream, r)]
                        rate = rb_bandwidth * math.log2(1.0 + g)
                    rates[u, r] = rate
                    total += rate
                means[u] = total / n_pool
                bits[u] = 0.0
            for r in range(n_pool):
                best = -1
                best_m = -1.0
                for i in range(nb):
                    u = backlog[i]
                    m = rates[u, r] / means[u] if means[u] > 0 else 0.0
                    if m > best_m:
                        best = u
                        best_m = m
                bits[best] += rates[best, r]
                if do_assign:
                    log_assign[s, r] = best
            for i in range(nb):
                u = backlog[i]
                budget = int(math.floor(bits[u] * byte_scale))
                got = 0
                while budget > 0 and q_len[u] > 0:
                    h = q_head[u]
                    take = min(q_rem[u, h], budget)
                    q_rem[u, h] -= take
                    budget -= take
                    got += take
                    if q_rem[u, h] == 0:
                        delay = gslot - q_slot[u, h] + 1
                        if do_events:
                            log_events[n_ev, 0] = gslot
                            log_events[n_ev, 1] = u
                            log_events[n_ev, 2] = q_slot[u, h]
                            log_events[n_ev, 3] = 0
                            log_events[n_ev, 4] = delay
                            n_ev += 1
                        if delay > max_delay:
                            max_delay = delay
                        n_delivered += 1
                        q_head[u] = (h + 1) % cap
                        q_len[u] -= 1
                occ[u] -= got
                served[u] += got
                if do_served:
                    log_served[s, u] = got
        s += 1
    return s, n_delivered, n_dropped, max_delay, arrived, served, peak, n_ev
