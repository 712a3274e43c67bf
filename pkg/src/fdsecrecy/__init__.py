"""Secrecy-capacity bounds for a full-duplex wirelessly powered link with a passive eavesdropper.

An energy transmitter (ET) powers an energy harvesting user (EHU) and jams
an eavesdropper (EVE) while receiving the EHU's confidential message.  The
package computes an upper bound and an achievable rate for the secrecy
capacity, a half-duplex benchmark, and simulates the battery protocol.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .bounds import (SearchConfig, SecrecyResult, lower_bound, mac_decodability_check,
                     secrecy_rate, upper_bound)
from .hd_benchmark import TGridConfig, hd_power, hd_secrecy_rate
from .inputs import EtInputDistribution
from .model import (Channel, ConfigError, FadingGrid, RunConfig, SystemParams, load_config,
                    parse_config)
from .numerics import binary_deficit, cal_I, mixture_entropy, MixtureSpec
from .power_policy import PowerPolicy, calibrate_lambda2, solve_ehu_power
from .protocol_sim import SimConfig, SimTrace, harvest_energy, simulate, slack_policy

__all__ = [
    "BACKEND", "Channel", "ConfigError", "EtInputDistribution", "FadingGrid", "MixtureSpec",
    "PowerPolicy", "RunConfig", "SearchConfig", "SecrecyResult", "SimConfig", "SimTrace",
    "SystemParams", "TGridConfig", "binary_deficit", "cal_I", "calibrate_lambda2",
    "hd_power", "hd_secrecy_rate", "harvest_energy", "load_config", "lower_bound",
    "mac_decodability_check", "mixture_entropy", "parse_config", "secrecy_rate", "simulate",
    "slack_policy", "solve_ehu_power", "upper_bound",
]
