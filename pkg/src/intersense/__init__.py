"""Outcome-dependent spectrum sensing and access for unslotted primary channels.

The package evaluates and optimises when a secondary user should sense each
primary channel, given alternating-renewal (exponential) primary activity,
imperfect sensing, a single sensing radio and per-channel interference
limits. Analytic evaluation rests on embedded Markov chains; a Monte-Carlo
simulator checks it.
"""

from .access import (
    ChannelBelief,
    UnboundedAccessError,
    access_duration_for_constraint,
    access_interference,
    channel_rank,
    next_channel_order,
    run_limited_access_policy,
)
from .full import OutcomeDurationTable, myopic_table, optimal_two_channel
from .markov import (
    DegenerateChainError,
    DualPeriodPolicy,
    InfeasibleOverheadError,
    channel_metrics,
    joint_metrics,
    network_metrics,
    network_throughput,
    steady_state,
)
from .optimize import (
    GridSpec,
    InfeasibleError,
    OptimizationResult,
    optimize_dual_period,
    optimize_single_period,
    optimize_with_errors,
)
from .renewal import (
    ChannelParams,
    delta_numeric_oracle,
    expected_free_time_from_busy,
    expected_free_time_from_free,
    prob_free_given_busy,
    prob_free_given_free,
    utilization,
)
from .scenario import ConfigError, Scenario, dump_scenario, load_scenario, parse_scenario
from .sensing import DetectorSpec, SensingErrorModel, required_sensing_time
from .simulator import PerformanceReport, SimConfig, simulate_dual_period, simulate_full, simulate_limited_access

__version__ = "0.1.0"
