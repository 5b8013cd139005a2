"""Full-duplex open-loop training for multiuser MIMO broadcast channels.

Simulates continuously adaptive beamforming (downlink data sent while users
keep uploading pilots) against half-duplex training, evaluates the rate
loss bounds, and finds optimal training durations.
"""

__version__ = "0.1.0"

from .config import ConfigError, SystemConfig, db_to_linear, linear_to_db, load_config, round_to_cycle, validate
from .channel import ChannelBlock, ChannelEstimate, mmse_update, sample_block
from .precoding import LinkPowers, Precoder, SingularEstimateError, link_powers, zf
from .rates import (
    RateBreakdown,
    analytic_breakdown,
    ar_cab,
    ar_hd,
    delta_r_data,
    delta_r_ini,
    delta_r_ini_inv,
    r_zf,
    r_zf_closed_form,
)
from .optimizer import (
    TrainingPlan,
    brute_force_optimum,
    gain_lower_bound,
    loss_bound_cab,
    loss_bound_hd,
    t_cab_approx,
    t_hd_approx,
)
from .montecarlo import BlockTrace, ergodic_efficiency, simulate_cab, simulate_hd, simulated_breakdown

__all__ = [
    "BlockTrace",
    "ChannelBlock",
    "ChannelEstimate",
    "ConfigError",
    "LinkPowers",
    "Precoder",
    "RateBreakdown",
    "SingularEstimateError",
    "SystemConfig",
    "TrainingPlan",
    "analytic_breakdown",
    "ar_cab",
    "ar_hd",
    "brute_force_optimum",
    "db_to_linear",
    "delta_r_data",
    "delta_r_ini",
    "delta_r_ini_inv",
    "ergodic_efficiency",
    "gain_lower_bound",
    "linear_to_db",
    "link_powers",
    "load_config",
    "loss_bound_cab",
    "loss_bound_hd",
    "mmse_update",
    "r_zf",
    "r_zf_closed_form",
    "round_to_cycle",
    "sample_block",
    "simulate_cab",
    "simulate_hd",
    "simulated_breakdown",
    "t_cab_approx",
    "t_hd_approx",
    "validate",
    "zf",
]
