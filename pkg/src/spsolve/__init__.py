"""Successive projection solvers for systems of nonlinear equations and inequalities."""
from .core import (
    Ball,
    EllipsoidSurface,
    HalfSpace,
    Hyperplane,
    PairwiseDistance,
    ProblemInstance,
    Sphere,
    Subspace,
    gradient,
    gradient_norm_at_solution,
    residual,
    residual_vector,
)
from .analysis import RateReport, rate_report
from .projections import project
from .selection import Rule, make_rule, next_index, nonuniform_weights
from .solver import (
    DivergenceError,
    IterateTrace,
    SolverConfig,
    Status,
    initial_point,
    mp_step,
    sp_solve,
    sp_step,
)

__version__ = "0.1.0"
