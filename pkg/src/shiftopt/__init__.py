"""Online optimization of piecewise-constant utilities under changing environments.

Forecasters with shifting-regret guarantees on the continuous domain
[0, 1], an exact mixture-of-restarts sampler, offline regret oracles,
adversarial and synthetic stream generators, and a seeded benchmark CLI.
"""

from ._backend import BACKEND
from .bench import RunArtifact, RunConfig, run
from .clustering import (
    ClusteringInstance,
    clustering_stream,
    instance_stream,
    load_points_csv,
    seeding_payoff_curve,
)
from .environments import (
    GENERATORS,
    UtilityStream,
    alternating_stream,
    build_stream,
    counterexample_stream,
    dispersion_profile,
    indicator_interval,
    lower_bound_stream,
    random_stream,
    step_left,
    step_right,
    two_expert_stream,
)
from .errors import (
    BudgetError,
    DomainError,
    NumericalDriftError,
    ParameterError,
    ShiftoptError,
    ValidationError,
)
from .forecasters import (
    FORECASTERS,
    DiscreteFixedShareForecaster,
    ExponentialForecaster,
    FixedShareForecaster,
    ForecasterConfig,
    GeneralizedShareForecaster,
    RandomRestartForecaster,
    default_params_adaptive,
    default_params_shifted,
    default_params_sparse,
    make_forecaster,
    restart_weight_ensemble,
)
from .mixture import MixtureSampler
from .oracles import (
    RegretReport,
    ShiftedOptimum,
    StreamTable,
    adaptive_regret,
    build_regret_report,
    expected_payoff,
    interval_best,
    shifted_opt,
    sparse_shifted_opt,
    top_decile_recurrence,
)
from .piecewise import LogDensity, PiecewiseConstant, merge_breakpoints, values_on_grid

__version__ = "0.1.0"
