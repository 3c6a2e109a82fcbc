"""Para-model (PMA) control of dynamical-system robot reaching motions."""

from .controller import PmaGains, PmaState, init_function, pma_step, pma_step_vector, reset
from .dynamics import IntegratorConfig, ModelKind, VectorFieldModel, eval_field, euler_step, run_open_loop
from .errors import ConfigurationError, NumericFault
from .optimizer import OptimizerReport, Parameter, SearchSpace, default_search_space, direct_search, evaluate_objective
from .simulation import (
    DEFAULT_GAINS,
    NO_DISTURBANCE,
    ClosedLoopScenario,
    DisturbanceKind,
    DisturbanceProfile,
    ReferenceKind,
    ReferenceSpec,
    default_scenario,
    disturbance_step,
    ise,
    reference_at,
    rejection_metrics,
    run_closed_loop,
)
from .trajectory import TrajectoryLog, read_csv

__version__ = "0.1.0"
