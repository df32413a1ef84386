"""Simulation, verification, and attack search for key distribution over lossy channels."""

__version__ = "0.1.0"

from .analysis import TradeoffPoint, eve_states, qber, tradeoff_point
from .attack import (
    FilteredAttack,
    InfeasibleAttackError,
    ProbeKets,
    PrsAttack,
    check_equal_throughput,
    check_isometry,
    filter_no_count,
    passive_loss_attack,
    pure_imaginary_deficit_attack,
    throughput_of,
    usd_intercept_resend,
)
from .montecarlo import SimConfig, SimReport, run_protocol, uniformity_check
from .search import SearchResult, SearchSpec, optimize_attack, random_feasible_attack, sweep_tradeoff
from .states import b92, bb84_four_state, bb84_six_state

__all__ = [
    "TradeoffPoint",
    "eve_states",
    "qber",
    "tradeoff_point",
    "FilteredAttack",
    "InfeasibleAttackError",
    "ProbeKets",
    "PrsAttack",
    "check_equal_throughput",
    "check_isometry",
    "filter_no_count",
    "passive_loss_attack",
    "pure_imaginary_deficit_attack",
    "throughput_of",
    "usd_intercept_resend",
    "SimConfig",
    "SimReport",
    "run_protocol",
    "uniformity_check",
    "SearchResult",
    "SearchSpec",
    "optimize_attack",
    "random_feasible_attack",
    "sweep_tradeoff",
    "b92",
    "bb84_four_state",
    "bb84_six_state",
    "__version__",
]
