"""Energy-efficiency-maximizing UAV trajectory planning under ground jammers."""

from .errors import (
    InfeasibleTrajectoryError,
    MonotonicityError,
    PropulsionDomainError,
    ScenarioError,
    SolverError,
    UaveeError,
)
from .initpath import SlackSet, Theta, line_init, slack_init
from .ipm import KktResiduals, Scaling, Solution, SolverOptions, kkt_residuals, solve
from .optimizer import (
    AlgoOptions,
    FinalMetrics,
    RunReport,
    dinkelbach_inner,
    evaluate_final,
    optimize,
)
from .physics import (
    FeasibilityReport,
    Trajectory,
    channel_gain,
    energy_efficiency,
    kinematic_residuals,
    propulsion_power,
    slot_rate,
    slot_rates,
    throughput_bits,
    trajectory_energy,
)
from .program import ConvexProgram, ProgramBuilder, VariableLayout, dump_program
from .scenario import (
    ChannelParams,
    EnergyParams,
    GroundNode,
    Horizon,
    Jammer,
    Scenario,
    UavParams,
    case_scenario,
    default_scenario,
    load_scenario,
    save_scenario,
)
from .surrogate import (
    AffineBound,
    Mode,
    RateBound,
    build_subproblem,
    dist_sq_bound,
    pull_interior,
    rate_bound_coeffs,
    speed_sq_bound,
)

__version__ = "0.1.0"
