"""Interference-aware opportunistic random access for ultra-dense multi-cell networks.

Closed-form analytics, reproducible Monte-Carlo simulation, exhaustive
parameter search, and a config-driven experiment runner for slotted-ALOHA
random access with two-threshold opportunistic transmission under the SINR
capture model.
"""

from .analytics import (
    InfeasibleThresholdError,
    NetworkConfig,
    ProtocolParams,
    decode_prob_tilde,
    design_protocol_params,
    erlang_cdf,
    erlang_cdf_inv,
    erlang_cdf_lower_bound,
    exp_cdf,
    exp_cdf_inv,
    invert_threshold_relation,
    mac_throughput,
    select_nu_star,
    select_rate,
    threshold_relation,
    throughput_lower_bound,
    user_scaling_min_n,
)
from .channel import (
    CaitErrorModel,
    ChannelRealization,
    draw_gain_batch,
    draw_realization,
    perceived_gains,
)
from .engine import SlotOutcome, ThroughputStats, run_trials, simulate_slot
from .experiments import (
    ConfigError,
    ExperimentConfig,
    run_experiment,
    validate_config,
)
from .optimizer import (
    GridSpec,
    NoOptimumError,
    Optimum,
    crossover_scan,
    find_crossover,
    grid_search,
)
from .protocols import (
    ProtocolKind,
    TransmissionDecision,
    decide_aloha,
    decide_ia_ora,
    decide_ora,
)

__all__ = [
    "CaitErrorModel",
    "ChannelRealization",
    "ConfigError",
    "ExperimentConfig",
    "GridSpec",
    "InfeasibleThresholdError",
    "NetworkConfig",
    "NoOptimumError",
    "Optimum",
    "ProtocolKind",
    "ProtocolParams",
    "SlotOutcome",
    "ThroughputStats",
    "TransmissionDecision",
    "crossover_scan",
    "decide_aloha",
    "decide_ia_ora",
    "decide_ora",
    "decode_prob_tilde",
    "design_protocol_params",
    "draw_gain_batch",
    "draw_realization",
    "erlang_cdf",
    "erlang_cdf_inv",
    "erlang_cdf_lower_bound",
    "exp_cdf",
    "exp_cdf_inv",
    "find_crossover",
    "grid_search",
    "invert_threshold_relation",
    "mac_throughput",
    "perceived_gains",
    "run_experiment",
    "run_trials",
    "select_nu_star",
    "select_rate",
    "simulate_slot",
    "threshold_relation",
    "throughput_lower_bound",
    "user_scaling_min_n",
    "validate_config",
]
