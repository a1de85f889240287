"""Transport through thin random channels with side pockets: geometry,
random environments, the metric-graph limit, Monte Carlo on the graph and in
the channel, and closed-form exit-time and speed evaluators."""

__version__ = "0.1.0"

from .analytic import (ExitTimeResult, ScaleSpeed, SpeedEstimate, WingTimeTerms,
                       exit_time_quadrature, inverse_speed, wing_time_formula, wing_time_terms)
from .bvp import BvpSolution, solve_exit_bvp
from .environment import (Dist, EnvironmentParams, KEstimate, WingLaw, WingMoments, estimate_K,
                          sample_environment, wing_moment_estimates)
from .errors import (ConstructionError, DivergenceError, GeometryError,
                     InsufficientSampleError, NarrowChanError, ParameterError,
                     PreconditionError, RangeError, SimulationFault, SingularSystemError,
                     StepTooLargeError)
from .geometry import (ChannelSpec, WingSpec, boundary_normal, cross_section,
                       validate_assumptions, width_l0)
from .graph import GraphPoint, MetricGraph, build_graph, gluing_weights, locate
from .graph_mc import MeanEstimate, SimParams, mean_exit_time, simulate_exit
from .reflected import (ReflectedBatch, ReflectedPath, SdeParams, VelocityField,
                        compare_to_graph, simulate_exit_2d, step_project)

__all__ = [n for n in dir() if not n.startswith("_")]
