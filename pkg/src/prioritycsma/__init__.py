"""Simulation and analysis of priority-based CSMA on interference graphs."""
from .config import HopMode, ProtocolMode, ScenarioConfig, load_config
from .errors import ConfigError, ConnectivityError, DomainError, InsufficientDataError, OracleFailure
from .experiments import (
    classify_stability,
    fluid_scaling_study,
    growth_rate,
    one_slot_rate_check,
    sweep,
)
from .fluid import (
    FluidTrajectory,
    MultiHopDrift,
    SingleHopDrift,
    integrate,
    lyapunov_max,
    lyapunov_max_drift_check,
    lyapunov_utility_drift_check,
    multi_hop_drift,
    phi,
    quadratic_drift_multi_hop,
    single_hop_drift,
)
from .graph import (
    InterferenceGraph,
    build_circle,
    build_from_edges,
    build_random_regular,
    build_torus,
    graph_from_spec,
    regularity_degree,
)
from .simulator import QueueState, SlotOutcome, Trace, draw_transmissions, run, step_multi_hop, step_single_hop
from .stability import (
    StabilityVerdict,
    asymmetric_routing_drift,
    c_membership,
    conjecture_scan,
    cyclic_sum,
    symmetric_threshold,
    two_fairness_check,
)

__version__ = "0.1.0"
