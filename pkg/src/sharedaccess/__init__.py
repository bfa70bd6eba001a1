"""Shared-access network analysis: stochastic-geometry success probabilities,
congestion-controlled primary queue, secondary throughput, delay-constrained
optimization, and a slot-level Monte Carlo oracle."""

from .errors import (
    DegenerateXi,
    DomainError,
    InvalidArrival,
    InvalidParameter,
    NoFeasiblePoint,
    PowerRatioViolation,
    QuadratureFailure,
    Unstable,
    ValidationError,
    ZeroArrival,
)
from .model import (
    INFINITE,
    ChannelParams,
    DelayConstraint,
    Finite,
    Geometry,
    Infinite,
    ProtocolParams,
    ValidatedConfig,
    config_from_dict,
    db_to_linear,
    dbm_to_mw,
    load_config,
    mw_to_dbm,
    validate,
)
from .metrics import ThroughputReport, secondary_throughput
from .optimize import (
    FeasibleBound,
    GridSpec,
    KappaConstants,
    OptimizationResult,
    constrained_optimal_q2,
    feasible_q2_bound,
    global_optimal_q2,
    grid_optimize,
    kappa_constants,
    lambert_w0,
    optimal_q1,
)
from .phy import (
    SuccessProbabilities,
    expected_pt_to_sr_distance,
    p_1_1,
    p_1_12,
    p_2_12,
    p_2_2,
    sinc_norm,
    success_probabilities,
)
from .queueing import (
    QueueAnalysis,
    ServiceRates,
    StationaryDistribution,
    analyze,
    is_stable,
    occupancy,
    stationary,
    xi_ratio,
)
from .sim import EmpiricalSuccess, SimSpec, SimStats, empirical_success_probs, run, sample_ppp

__version__ = "0.1.0"
