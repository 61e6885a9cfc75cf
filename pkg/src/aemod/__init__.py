"""Charging and dispatch decisions for an electric mobility-on-demand zone.

The zone model gives closed-form flows and response times, the optimizer
maximizes the worst-class response-rate margin, and the simulator checks the
queueing model by discrete-event simulation.
"""

from .errors import (
    AEMoDError,
    ConfigError,
    EnumerationTooLargeError,
    InfeasibleZoneError,
    InstabilityError,
    NoFeasiblePointError,
)
from .optimizer import SolveResult, SolverConfig, brute_force_oracle, certify, solve
from .policies import PolicyKind, build_policy
from .simulator import SimConfig, SimMode, SimReport, simulate
from .zone_model import (
    DecisionSet,
    ZoneConfig,
    analytic_response_times,
    check_stability,
    effective_service_rates,
    fleet_rate_bound,
    vehicle_class_rates,
)

__version__ = "0.1.0"

__all__ = [
    "AEMoDError",
    "ConfigError",
    "DecisionSet",
    "EnumerationTooLargeError",
    "InfeasibleZoneError",
    "InstabilityError",
    "NoFeasiblePointError",
    "PolicyKind",
    "SimConfig",
    "SimMode",
    "SimReport",
    "SolveResult",
    "SolverConfig",
    "ZoneConfig",
    "analytic_response_times",
    "brute_force_oracle",
    "build_policy",
    "certify",
    "check_stability",
    "effective_service_rates",
    "fleet_rate_bound",
    "simulate",
    "solve",
    "vehicle_class_rates",
]
