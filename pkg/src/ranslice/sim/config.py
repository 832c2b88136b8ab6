"""Simulation parameters and the derived resource grid."""

import json
import math
from dataclasses import dataclass, field, fields, asdict


@dataclass
class SimConfig:
    """Physical-layer, traffic and population parameters of one cell."""

    # geometry / link budget
    cell_radius: float = 250.0          # [m]
    tx_power: float = 46.0              # total BS power [dBm]
    noise_psd: float = -174.0           # [dBm/Hz]
    noise_figure: float = 9.0           # [dB]
    # numerology
    carrier_bandwidth: float = 10e6     # [Hz]
    subcarrier_spacing: float = 15e3    # [Hz]
    slot_duration: float = 1e-3         # [s]
    ap_duration: float = 1.0            # allocation period [s]
    # channel
    pathloss_coeffs: tuple = (128.1, 37.6)  # (intercept dB, slope dB/decade of km)
    pathloss_d_min: float = 10.0        # distance clamp [m]
    shadowing_sigma: float = 8.0        # [dB]
    shadowing_rho: float = 0.9          # per-AP correlation
    fading_sigma: float = 3.0           # per-RB per-slot lognormal term [dB]
    # traffic
    packet_size: int = 32               # [bytes]
    arrival_rate: float = 250.0         # [packets/s per vehicle]
    delay_budget: float = 5e-3          # [s]
    # population (synthetic traces)
    n_vehicles_mean: float = 25.0
    vehicle_speed: float = 13.0         # [m/s]
    # observation
    n_worst_cqi: int = 5
    buffer_norm: float = 3200.0         # [bytes] per user, 100 packets of 32 B
    traffic_norm: float = 0.0           # [bytes] per AP; 0 -> derived from load
    seed: int = 0

    def __post_init__(self):
        self.pathloss_coeffs = tuple(float(c) for c in self.pathloss_coeffs)
        if len(self.pathloss_coeffs) != 2:
            raise ValueError("pathloss_coeffs must be (intercept, slope)")
        positive = ("cell_radius", "carrier_bandwidth", "subcarrier_spacing",
                    "slot_duration", "ap_duration", "pathloss_d_min",
                    "packet_size", "delay_budget", "n_vehicles_mean",
                    "buffer_norm", "n_worst_cqi")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("shadowing_sigma", "fading_sigma", "arrival_rate",
                     "vehicle_speed", "traffic_norm"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 <= self.shadowing_rho <= 1.0:
            raise ValueError("shadowing_rho must lie in [0, 1]")
        ratio = self.delay_budget / self.slot_duration
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("delay_budget must be an integer multiple of slot_duration")
        ratio = self.ap_duration / self.slot_duration
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("ap_duration must be an integer multiple of slot_duration")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def budget_slots(self) -> int:
        return int(round(self.delay_budget / self.slot_duration))

    @property
    def slots_per_ap(self) -> int:
        return int(round(self.ap_duration / self.slot_duration))

    @property
    def traffic_normalizer(self) -> float:
        if self.traffic_norm > 0:
            return self.traffic_norm
        # twice the mean offered load of one AP
        return (2.0 * self.arrival_rate * self.n_vehicles_mean
                * self.packet_size * self.ap_duration) or 1.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pathloss_coeffs"] = list(self.pathloss_coeffs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise KeyError(f"unknown SimConfig keys: {', '.join(unknown)}")
        return cls(**d)


def load_config(path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a flat JSON object")
    return SimConfig.from_dict(data)


def save_config(cfg: SimConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)


@dataclass(frozen=True)
class ResourceGrid:
    n_rbs: int
    rb_bandwidth: float     # [Hz]
    slot_duration: float    # [s]

    @classmethod
    def from_config(cls, cfg: SimConfig) -> "ResourceGrid":
        rb_bw = 12 * cfg.subcarrier_spacing
        # 90% of the channel carries RBs, the rest is guard band (50 RBs in 10 MHz)
        n = int(math.floor(0.9 * cfg.carrier_bandwidth / rb_bw + 1e-9))
        if n < 1:
            raise ValueError("carrier narrower than one resource block")
        return cls(n_rbs=n, rb_bandwidth=rb_bw, slot_duration=cfg.slot_duration)

    @property
    def bandwidth(self) -> float:
        return self.n_rbs * self.rb_bandwidth
