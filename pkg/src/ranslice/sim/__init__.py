"""Physical layer, mobility and traffic of the simulated cell."""

from .config import ResourceGrid, SimConfig, load_config, save_config
from .channel import (path_loss_db, update_shadowing, sinr_per_rb, shannon_rate,
                      sinr_to_cqi)
from .mobility import MobilityTrace, load_mobility_trace, save_mobility_trace, synth_trace
from .traffic import Packet, generate_arrivals
