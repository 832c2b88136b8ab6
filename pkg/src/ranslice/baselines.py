"""Comparison policies: fixed request, ideal traffic-proportional heuristic, per-AP oracle.

A policy is any object with ``act(observation, env) -> b``.  Only the
heuristic and the oracle look at ``env``: they are granted knowledge a real
tenant would not have.
"""

import math
from dataclasses import dataclass, field

from .broker import B_MAX, B_MIN, pool_size_for
from .sim.channel import CQI_EFFICIENCY
from .sim.config import ResourceGrid, SimConfig

POLICY_KINDS = ("fixed", "heuristic", "ddpg", "oracle")


def clamp_b(b):
    return min(max(b, B_MIN), B_MAX)


@dataclass
class PolicySpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        p = self.params
        if self.kind == "fixed" and not B_MIN <= p.get("b0", 0.9) <= B_MAX:
            raise ValueError("b0 outside [0.1, 0.9]")
        if self.kind == "heuristic":
            if p.get("weight", 1.0) <= 0:
                raise ValueError("heuristic weight must be positive")
            if p.get("t_ref") is not None and p["t_ref"] <= 0:
                raise ValueError("t_ref must be positive")
        if self.kind == "oracle":
            action_grid(p.get("grid_step", 0.01))

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind")
        return cls(kind, d)

    def to_dict(self):
        return {"kind": self.kind, **self.params}


def fixed_policy(b0):
    if not B_MIN <= b0 <= B_MAX:
        raise ValueError("b0 outside [0.1, 0.9]")
    return b0


def heuristic_policy(next_ap_traffic, weight, t_ref):
    """Request proportional to the (perfectly predicted) traffic of the coming AP."""
    if t_ref <= 0:
        raise ValueError("t_ref must be positive")
    return clamp_b(weight * next_ap_traffic / t_ref)


def default_t_ref(cfg: SimConfig, grid: ResourceGrid = None) -> float:
    """Bytes the whole band carries in one AP at CQI-7 spectral efficiency."""
    grid = grid or ResourceGrid.from_config(cfg)
    return CQI_EFFICIENCY[7 - 1] * grid.bandwidth * cfg.ap_duration / 8.0


def action_grid(grid_step):
    n = (B_MAX - B_MIN) / grid_step
    if grid_step <= 0 or abs(n - round(n)) > 1e-6:
        raise ValueError(f"grid step {grid_step} does not divide [{B_MIN}, {B_MAX}]")
    return [round(B_MIN + i * grid_step, 12) for i in range(int(round(n)) + 1)]


def oracle_search(env, grid_step=0.01):
    """Smallest grid ``b`` whose coming AP meets the delay budget.

    Candidates are tried in ascending order, each replaying the same AP.
    Returns ``(b, feasible)``; when nothing on the grid works the answer is
    ``(0.9, False)``.  The environment is left untouched; the caller commits.
    """
    grid = action_grid(grid_step)
    sizes = [pool_size_for(b, env.grid) for b in grid]
    i = env.first_feasible(sizes)
    if i is None:
        return B_MAX, False
    return grid[i], True


class FixedPolicy:
    kind = "fixed"

    def __init__(self, b0):
        self.b0 = fixed_policy(b0)

    def act(self, observation, env=None):
        return self.b0


class HeuristicPolicy:
    kind = "heuristic"

    def __init__(self, weight=1.0, t_ref=None):
        if weight <= 0:
            raise ValueError("heuristic weight must be positive")
        self.weight = weight
        self.t_ref = t_ref

    def act(self, observation, env):
        t_ref = self.t_ref or default_t_ref(env.cfg, env.grid)
        return heuristic_policy(env.next_period_arrivals(), self.weight, t_ref)


class OraclePolicy:
    kind = "oracle"

    def __init__(self, grid_step=0.01):
        action_grid(grid_step)
        self.grid_step = grid_step
        self.n_infeasible = 0

    def act(self, observation, env):
        b, feasible = oracle_search(env, self.grid_step)
        self.n_infeasible += not feasible
        return b


class ScaledPolicy:
    """``clamp(w * b)`` around another policy (availability sweeps)."""

    def __init__(self, inner, weight):
        self.inner = inner
        self.weight = weight
        self.kind = inner.kind

    def act(self, observation, env):
        return clamp_b(self.weight * self.inner.act(observation, env))
