"""Finite-key analysis and simulation of phase-coding side-channel-secure QKD."""
from .bounds import (chernoff_upper, kato_lower_expectation, kato_lower_observation,
                     kato_upper_expectation, kato_upper_observation)
from .channel import ChannelParams, click_rates, expected_tallies, transmittance
from .optimizer import SearchSpec, optimize_point, rate_distance_curve
from .security import (KeyRateResult, ProtocolParams, Tallies, finite_key_rate, key_length,
                       key_rate_asymptotic, phase_error_bound)
from .simulator import SimConfig, simulate

__version__ = "0.1.0"
