"""Structured sparse recovery with combinatorial selection and l1 shrinkage."""

from .clash import ClashConfig, IterationTrace, check_trace, clash_run, model_sp_run
from .convex import (
    SolverConfig,
    lasso_solve,
    project_l1_ball,
    restricted_lasso_solve,
    spectral_step,
)
from .core import (
    DimensionError,
    InfeasibleModelError,
    ProblemInstance,
    SupportSet,
    data_error,
    generate_instance,
    gradient,
)
from .projections import (
    ClusteredChainModel,
    ExplicitIlpModel,
    PartitionBudgetModel,
    UniformModel,
    brute_force_project,
    build_ilp,
    project,
    variance_reduction,
)

__version__ = "0.1.0"
