"""Link budget: path loss, shadowing, per-RB fading, Shannon rate, CQI."""

import math

import numpy as np
from numba import njit
from scipy.special import ndtri

from .config import SimConfig, ResourceGrid

# LTE wideband CQI switching points [dB] for indices 1..15
CQI_THRESHOLDS_DB = np.array([
    -6.7, -4.7, -2.3, 0.2, 2.4, 4.3, 5.9, 8.1,
    10.3, 11.7, 14.1, 16.3, 18.7, 21.0, 22.7,
])

# spectral efficiency [bit/s/Hz] of the 4-bit CQI table, indices 1..15
CQI_EFFICIENCY = np.array([
    0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141,
    2.4063, 2.7305, 3.3223, 3.9023, 4.5234, 5.1152, 5.5547,
])


def path_loss_db(distance, coeffs=(128.1, 37.6), d_min=10.0):
    """Urban-macro path loss ``A + B log10(d / 1 km)``; works on scalars and arrays."""
    a, b = coeffs
    d = np.maximum(np.asarray(distance, dtype=float), d_min)
    pl = a + b * np.log10(d / 1000.0)
    return float(pl) if pl.ndim == 0 else pl


def update_shadowing(prev, rho, sigma, rng):
    """One Gauss-Markov step of log-normal shadowing (dB), stationary variance sigma^2."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    prev = np.asarray(prev, dtype=float)
    z = rng.standard_normal(prev.shape)
    nxt = rho * prev + math.sqrt(1.0 - rho * rho) * sigma * z
    return float(nxt) if nxt.ndim == 0 else nxt


def noise_per_rb_dbm(cfg: SimConfig, grid: ResourceGrid) -> float:
    return cfg.noise_psd + 10.0 * math.log10(grid.rb_bandwidth) + cfg.noise_figure


def tx_power_per_rb_dbm(cfg: SimConfig, grid: ResourceGrid) -> float:
    return cfg.tx_power - 10.0 * math.log10(grid.n_rbs)


def wideband_sinr_db(cfg: SimConfig, grid: ResourceGrid, pathloss, shadowing):
    """Per-RB SINR in dB before the per-RB fading term."""
    return (tx_power_per_rb_dbm(cfg, grid) - np.asarray(pathloss) - np.asarray(shadowing)
            - noise_per_rb_dbm(cfg, grid))


def sinr_per_rb(cfg: SimConfig, pathloss, shadowing, fading, grid: ResourceGrid = None):
    """Linear SINR on each RB of the full grid."""
    grid = grid or ResourceGrid.from_config(cfg)
    fading = np.asarray(fading, dtype=float)
    if fading.shape != (grid.n_rbs,):
        raise ValueError(f"expected {grid.n_rbs} fading values, got {fading.shape}")
    sinr_db = wideband_sinr_db(cfg, grid, pathloss, shadowing) + fading
    return 10.0 ** (sinr_db / 10.0)


def shannon_rate(bandwidth, sinr):
    """Shannon capacity in bit/s."""
    return bandwidth * np.log2(1.0 + np.asarray(sinr, dtype=float))


def sinr_to_cqi(sinr_db) -> int:
    """Largest CQI index whose threshold is <= sinr_db (floor 1)."""
    if not math.isfinite(sinr_db):
        raise ValueError("SINR must be finite")
    idx = int(np.searchsorted(CQI_THRESHOLDS_DB, sinr_db, side="right"))
    return max(idx, 1)


def cqi_array(sinr_db):
    """Vectorised :func:`sinr_to_cqi`."""
    idx = np.searchsorted(CQI_THRESHOLDS_DB, np.asarray(sinr_db, dtype=float), side="right")
    return np.maximum(idx, 1)


# --- counter-based fading ---------------------------------------------------
# Fading is a pure function of (stream key, slot, vehicle, rb) so any slot can be
# replayed under a different RB pool with identical draws and only the
# (user, rb) pairs that are actually scheduled ever get evaluated.  Deviates
# come from inverse-CDF sampling on a 2^16-point quantile grid.

_MASK64 = (1 << 64) - 1
_TABLE_BITS = 16
NORMAL_QUANTILES = ndtri((np.arange(1 << _TABLE_BITS) + 0.5) / (1 << _TABLE_BITS))


@njit
def _splitmix64(x):
    x = (x + np.uint64(0x9E3779B97F4A7C15))
    z = x
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit
def fading_stream(key, slot, vehicle):
    """Hash seed of the per-RB fading draws of one vehicle in one slot."""
    h = _splitmix64(np.uint64(key) ^ _splitmix64(np.uint64(slot)))
    return _splitmix64(h ^ (np.uint64(vehicle) * np.uint64(0x100000001B3)))


@njit
def fading_index(stream, rb):
    return np.int64(_splitmix64(stream + np.uint64(rb)) >> np.uint64(64 - _TABLE_BITS))


def fading_gain_table(sigma_db):
    """Linear power gain for every quantile of a sigma_db log-normal term."""
    return 10.0 ** (sigma_db * NORMAL_QUANTILES / 10.0)


def fading_db(key, slot, vehicle, n_rbs, sigma):
    """Per-RB fading [dB] of one vehicle in one slot across ``n_rbs`` RBs."""
    stream = np.uint64(fading_stream(np.uint64(int(key) & _MASK64), slot, vehicle))
    return np.array([sigma * NORMAL_QUANTILES[fading_index(stream, rb)]
                     for rb in range(n_rbs)])
