"""Per-vehicle packet arrivals."""

from dataclasses import dataclass

import numpy as np


@dataclass
class Packet:
    owner: int
    size: int               # [bytes]
    arrival_slot: int
    remaining: int = -1     # [bytes]

    def __post_init__(self):
        if self.remaining < 0:
            self.remaining = self.size
        if not 0 <= self.remaining <= self.size:
            raise ValueError("remaining bytes outside [0, size]")


def generate_arrivals(attached, rate, slot, rng, *, packet_size=32, slot_index=0):
    """Poisson(rate * slot) packets per attached vehicle for one slot.

    ``attached`` is an iterable of objects with an ``id`` attribute (or plain ids).
    """
    if rate < 0:
        raise ValueError("arrival rate must be non-negative")
    ids = [getattr(v, "id", v) for v in attached]
    if not ids:
        return []
    counts = rng.poisson(rate * slot, size=len(ids))
    return [Packet(vid, packet_size, slot_index)
            for vid, n in zip(ids, counts) for _ in range(int(n))]


def arrival_counts(n_vehicles, n_slots, rate, slot, rng):
    """Arrivals for a whole period as ``counts[slot, vehicle]``.

    Same law as i.i.d. Poisson(rate * slot) per cell: each vehicle draws its
    period total from Poisson(rate * slot * n_slots) and scatters those
    arrivals uniformly over the slots.
    """
    if rate < 0:
        raise ValueError("arrival rate must be non-negative")
    totals = rng.poisson(rate * slot * n_slots, size=n_vehicles)
    owners = np.repeat(np.arange(n_vehicles), totals)
    slots = rng.integers(0, n_slots, size=owners.size)
    counts = np.zeros((n_slots, n_vehicles), np.int64)
    np.add.at(counts, (slots, owners), 1)
    return counts
