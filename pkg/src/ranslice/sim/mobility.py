"""Vehicle mobility traces: CSV ingestion and a synthetic random-waypoint generator.

Trace CSV layout (UTF-8, header row, rows sorted by time)::

    time_s,vehicle_id,x_m,y_m
    0,1,12.5,-40.0
    ...

A vehicle is attached to the cell at time ``t`` iff it has a sample at ``t``.
"""

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

HEADER = ["time_s", "vehicle_id", "x_m", "y_m"]


class TraceError(ValueError):
    """Malformed or inconsistent mobility trace."""


@dataclass
class MobilityTrace:
    samples: list                  # (time, vehicle_id, x, y), time-sorted
    horizon: float = 0.0
    _times: list = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.samples:
            raise TraceError("empty trace")
        if not self.horizon:
            self.horizon = float(self.samples[-1][0])
        self._times = [s[0] for s in self.samples]

    @property
    def vehicle_ids(self):
        return sorted({s[1] for s in self.samples})

    def at(self, t):
        """Samples taken exactly at time ``t`` as ``{vehicle_id: (x, y)}``."""
        lo = bisect_right(self._times, t - 1e-9)
        hi = bisect_right(self._times, t + 1e-9)
        return {vid: (x, y) for _, vid, x, y in self.samples[lo:hi]}

    def sample_times(self):
        return sorted(set(self._times))

    def attached_counts(self):
        times = self.sample_times()
        return np.array([len(self.at(t)) for t in times])

    def __eq__(self, other):
        if not isinstance(other, MobilityTrace):
            return NotImplemented
        return self.samples == other.samples and self.horizon == other.horizon


def _validate(samples, where=lambda i: f"row {i}"):
    last_t = -math.inf
    last_by_vehicle = {}
    for i, (t, vid, x, y) in enumerate(samples):
        if not all(math.isfinite(v) for v in (t, x, y)):
            raise TraceError(f"{where(i)}: non-finite value")
        if t < last_t:
            raise TraceError(f"{where(i)}: time {t} goes backwards (rows must be sorted by time)")
        prev = last_by_vehicle.get(vid)
        if prev is not None and t <= prev:
            raise TraceError(f"{where(i)}: vehicle {vid} timestamp {t} not after {prev}")
        last_by_vehicle[vid] = t
        last_t = t


def load_mobility_trace(path) -> MobilityTrace:
    samples = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise TraceError(f"{path}: empty trace")
        if [h.strip() for h in header] != HEADER:
            raise TraceError(f"{path}:1: bad header {header}, expected {','.join(HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise TraceError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                samples.append((float(row[0]), int(row[1]), float(row[2]), float(row[3])))
            except ValueError as exc:
                raise TraceError(f"{path}:{lineno}: {exc}") from None
    if not samples:
        raise TraceError(f"{path}: empty trace")
    # data rows start at line 2
    _validate(samples, where=lambda i: f"{path}:{i + 2}")
    return MobilityTrace(samples)


def save_mobility_trace(trace: MobilityTrace, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for t, vid, x, y in trace.samples:
            w.writerow([repr(float(t)), vid, repr(float(x)), repr(float(y))])


def _uniform_in_disk(rng, radius):
    r = radius * math.sqrt(rng.random())
    phi = 2.0 * math.pi * rng.random()
    return r * math.cos(phi), r * math.sin(phi)


class _Walker:
    """Random-waypoint vehicle inside a disk; leaves after a travel budget."""

    def __init__(self, vid, rng, radius, speed, mean_travel):
        self.vid = vid
        self.radius = radius
        self.speed = speed
        self.x, self.y = _uniform_in_disk(rng, radius)
        self.wx, self.wy = _uniform_in_disk(rng, radius)
        self.budget = rng.exponential(mean_travel)

    def advance(self, rng, dt):
        step = self.speed * dt
        self.budget -= step
        while step > 0.0:
            dx, dy = self.wx - self.x, self.wy - self.y
            dist = math.hypot(dx, dy)
            if dist <= step:
                self.x, self.y = self.wx, self.wy
                self.wx, self.wy = _uniform_in_disk(rng, self.radius)
                step -= dist
            else:
                self.x += dx / dist * step
                self.y += dy / dist * step
                step = 0.0
        return self.budget > 0.0


def synth_trace(n_vehicles_mean, horizon, speed, seed, *, radius=250.0, dt=1.0,
                mean_travel=None) -> MobilityTrace:
    """Random-waypoint population with Poisson arrivals and travel-limited departures.

    Starts from ``round(n_vehicles_mean)`` vehicles. Each vehicle drives an
    exponential distance (mean ``mean_travel``, default the cell diameter)
    before leaving; arrivals are Poisson with rate ``n_mean * speed / mean_travel``
    so the population is an M/M/inf process with mean ``n_vehicles_mean``.
    With ``speed == 0`` nobody moves, leaves or arrives.
    """
    if n_vehicles_mean <= 0:
        raise ValueError("n_vehicles_mean must be positive")
    if horizon < 0 or speed < 0 or dt <= 0:
        raise ValueError("horizon and speed must be non-negative, dt positive")
    mean_travel = mean_travel or 2.0 * radius
    rng = np.random.default_rng(seed)
    birth_rate = n_vehicles_mean * speed / mean_travel

    next_id = 1
    walkers = []
    for _ in range(int(round(n_vehicles_mean))):
        walkers.append(_Walker(next_id, rng, radius, speed, mean_travel))
        next_id += 1

    samples = []
    n_steps = int(math.floor(horizon / dt + 1e-9))
    for k in range(n_steps + 1):
        t = k * dt
        for w in walkers:
            samples.append((t, w.vid, w.x, w.y))
        if k == n_steps:
            break
        walkers = [w for w in walkers if w.advance(rng, dt)]
        for _ in range(rng.poisson(birth_rate * dt)):
            walkers.append(_Walker(next_id, rng, radius, speed, mean_travel))
            next_id += 1
    if not samples:
        raise ValueError("generated trace is empty")
    return MobilityTrace(samples, horizon=float(n_steps * dt))
