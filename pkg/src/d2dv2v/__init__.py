"""Radio resource management for D2D-based V2V links underlaying a cellular uplink."""

from .allocation import (
    Assignment,
    CapacityError,
    SubUserMap,
    build_weights,
    expand_subusers,
    hungarian_max_weight,
    srbp_matching,
)
from .baselines import SizeError, exhaustive_optimal, modified_feng, modified_zulhasnine
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .evaluation import DropResult, aggregate, check_allocation, simulate_ssf, sumrate_slow
from .power import PowerAllocation, Status, solve_power
from .qos import BracketError, McConfig, VueQos, derive_sinr_threshold, outage_probability
from .scenario import ChannelConfig, LinkClass, LinkGains, Scenario, generate_drop
from .schemes import SCHEMES, run_scheme, srbp

__version__ = "0.1.0"
