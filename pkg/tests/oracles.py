"""Independent reference models used only by the tests."""

import math


def timeline_simulate(arrivals, rates, vids, slot0=0, *, slot_duration=1e-3, budget_slots=5,
                      packet_size=32, initial=()):
    """Brute-force per-packet timeline of the slice scheduler.

    Keeps one flat list of packets (no per-user queues).  Every slot:
    expire every pending packet whose delay-if-served-now exceeds the
    budget, let each RB pick the pending owner with the best rate-to-mean
    ratio (lowest id on ties), give each owner ``floor(sum of rates * slot / 8)``
    bytes and hand them to that owner's pending packets oldest first.

    ``arrivals[s][u]`` counts packets of user ``u`` arriving in slot ``s``;
    ``rates[s][u][r]`` is the rate of user ``u`` on pool RB ``r``.
    ``initial`` lists (user, arrival_slot, remaining) packets already queued.

    Returns per slot: dict(assign=list, served=list, events=sorted list).
    """
    n_users = len(vids)
    seq = 0
    pending = []   # [order, user, arrival_slot, remaining]
    for u, a, rem in initial:
        pending.append([seq, u, a, rem])
        seq += 1
    out = []
    for s, counts in enumerate(arrivals):
        g = slot0 + s
        for u in range(n_users):
            for _ in range(counts[u]):
                pending.append([seq, u, g, packet_size])
                seq += 1
        events = []
        alive = []
        for p in pending:
            if g - p[2] + 1 > budget_slots:
                events.append((g, p[1], p[2], 1, g - p[2] + 1))
            else:
                alive.append(p)
        pending = alive
        owners = sorted({p[1] for p in pending}, key=lambda u: vids[u])
        n_rb = len(rates[s][0]) if n_users else 0
        assign = [-1] * n_rb
        for r in range(n_rb):
            best, best_m = -1, -1.0
            for u in owners:
                # left-to-right sum, bit-compatible with the model
                mean = sum(rates[s][u][k] for k in range(n_rb)) / n_rb
                m = rates[s][u][r] / mean if mean > 0 else 0.0
                if m > best_m:
                    best, best_m = u, m
            assign[r] = best
        served = [0] * n_users
        for u in owners:
            bits = 0.0
            for r in range(n_rb):
                if assign[r] == u:
                    bits += rates[s][u][r]
            left = int(math.floor(bits * slot_duration / 8.0))
            mine = sorted((p for p in pending if p[1] == u), key=lambda p: p[0])
            for p in mine:
                if left <= 0:
                    break
                take = min(p[3], left)
                p[3] -= take
                left -= take
                served[u] += take
                if p[3] == 0:
                    events.append((g, u, p[2], 0, g - p[2] + 1))
            pending = [p for p in pending if p[3] > 0]
        out.append({"assign": assign, "served": served, "events": sorted(events)})
    return out
