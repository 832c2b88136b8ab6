"""Infrastructure-side slice enforcement and the tenant-facing observation/reward.

Only :class:`Observation` and :class:`ApReport` cross from the infrastructure
provider to the tenant; policies never see queues or channel internals.
"""

import math
from dataclasses import dataclass

import numpy as np

from .sim.config import ResourceGrid, SimConfig
from .sim.env import PeriodStats, SliceEnv

B_MIN, B_MAX = 0.1, 0.9


@dataclass(frozen=True)
class SliceRequest:
    b: float    # fraction of the maximum slice bandwidth

    def __post_init__(self):
        if not (math.isfinite(self.b) and B_MIN - 1e-12 <= self.b <= B_MAX + 1e-12):
            raise ValueError(f"bandwidth fraction {self.b} outside [{B_MIN}, {B_MAX}]")


@dataclass
class Observation:
    max_buffer: float
    traffic: float
    worst_cqis: tuple

    def to_vector(self):
        return np.array([self.max_buffer, self.traffic, *self.worst_cqis])

    @classmethod
    def initial(cls, k=5):
        """What the tenant knows before its first request: nothing queued, good radio."""
        return cls(0.0, 0.0, (1.0,) * k)


@dataclass
class ApReport:
    qos_ok: bool
    max_delay: float        # [s]
    n_delivered: int
    n_dropped: int
    served_bytes: int
    arrived_bytes: int
    rb_pool_size: int


def apply_request(req: SliceRequest, grid: ResourceGrid):
    """RB pool for one AP: the first round(b * n_rbs) RBs, at least one."""
    # the slack keeps decimal fractions such as 0.29 * 50 = 14.4999... rounding up
    n = max(1, int(math.floor(req.b * grid.n_rbs + 0.5 + 1e-9)))
    return range(min(n, grid.n_rbs))


def pool_size_for(b, grid: ResourceGrid) -> int:
    return len(apply_request(SliceRequest(b), grid))


def check_qos(report: ApReport, budget: float) -> bool:
    # 5 ms exactly still meets a 5 ms budget
    return report.n_dropped == 0 and report.max_delay <= budget + 1e-12


def compute_reward(req: SliceRequest, qos_ok: bool) -> float:
    return 1.0 - req.b if qos_ok else -1.0


def build_observation(stats: PeriodStats, cfg: SimConfig) -> Observation:
    k = cfg.n_worst_cqi
    peak = float(stats.peak_occupancy.max()) if len(stats.peak_occupancy) else 0.0
    worst = np.sort(stats.cqi)[:k] / 15.0
    worst = np.concatenate([worst, np.ones(k - len(worst))])
    return Observation(
        max_buffer=float(np.clip(peak / cfg.buffer_norm, 0.0, 1.0)),
        traffic=float(np.clip(stats.arrived_bytes / cfg.traffic_normalizer, 0.0, 1.0)),
        worst_cqis=tuple(float(c) for c in np.clip(worst, 0.0, 1.0)),
    )


def build_report(stats: PeriodStats, cfg: SimConfig) -> ApReport:
    report = ApReport(
        qos_ok=False,
        max_delay=stats.max_delay_slots * cfg.slot_duration,
        n_delivered=stats.n_delivered,
        n_dropped=stats.n_dropped,
        served_bytes=int(stats.served_bytes.sum()),
        arrived_bytes=stats.arrived_bytes,
        rb_pool_size=stats.pool_size,
    )
    report.qos_ok = check_qos(report, cfg.delay_budget)
    return report


def run_ap(env: SliceEnv, pool):
    """Run one allocation period with ``pool`` granted; returns (Observation, ApReport)."""
    pool = list(pool)
    if pool != list(range(len(pool))):
        raise ValueError("slice pools are contiguous from RB 0")
    stats = env.run_period(len(pool))
    return build_observation(stats, env.cfg), build_report(stats, env.cfg)


class SliceBroker:
    """Enforces one tenant's requests on an environment it owns exclusively."""

    def __init__(self, env: SliceEnv):
        self.env = env
        self.observation = Observation.initial(env.cfg.n_worst_cqi)

    @property
    def cfg(self):
        return self.env.cfg

    def step(self, b):
        """Enforce request ``b`` for one AP; returns (observation, report, reward)."""
        req = SliceRequest(float(b))
        obs, report = run_ap(self.env, apply_request(req, self.env.grid))
        self.observation = obs
        return obs, report, compute_reward(req, report.qos_ok)
