"""IA feasibility, incomplete CSIT allocation and distributed min-leakage precoding."""

__version__ = "0.1.0"

from .channel_model import (  # noqa: E402
    RNG_ID,
    AntennaConfig,
    ChannelMatrix,
    ConfigParseError,
    SubIC,
    draw_channel,
    parse_config,
)
from .csit_allocation import (  # noqa: E402
    CsitAllocation,
    CsitMask,
    RemovalPlan,
    allocate_super,
    allocate_tight,
    allocation_size,
    complete_size,
)
from .feasibility import Classification, FeasibilityReport, is_feasible, is_feasible_bruteforce  # noqa: E402
from .precoding import (  # noqa: E402
    BeamformerSet,
    SolverOptions,
    distributed_precode,
    min_leakage_solve,
    rx_filters,
    user_rates,
)

__all__ = [
    "__version__",
    "RNG_ID",
    "AntennaConfig",
    "ChannelMatrix",
    "ConfigParseError",
    "SubIC",
    "draw_channel",
    "parse_config",
    "CsitAllocation",
    "CsitMask",
    "RemovalPlan",
    "allocate_super",
    "allocate_tight",
    "allocation_size",
    "complete_size",
    "Classification",
    "FeasibilityReport",
    "is_feasible",
    "is_feasible_bruteforce",
    "BeamformerSet",
    "SolverOptions",
    "distributed_precode",
    "min_leakage_solve",
    "rx_filters",
    "user_rates",
]
