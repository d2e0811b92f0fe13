"""Successive projection: ``x_{k+1} = P_{i_k}(x_k)`` and the mean-projection step."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional

import numpy as np

from .core import DimensionError, PairwiseDistance, ProblemInstance
from .projections import _project
from .selection import Rule, make_rule

DIVERGENCE_NORM = 1e12


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    # a deterministic rule reproduced its iterate exactly, so no later step can change it
    STALLED = "stalled"


class DivergenceError(RuntimeError):
    """Raised when an iterate becomes non-finite or leaves the ``1e12`` ball.

    ``trace`` holds every record up to the last finite iterate.
    """

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class SolverConfig:
    rule: Rule = Rule.CYCLIC
    tol: float = 1e-10
    # counted in single projections; one MP step costs m
    max_iterations: int = 100_000
    seed: int = 0
    record_trace: bool = True
    norms: Optional[np.ndarray] = None

    def __post_init__(self):
        self.rule = Rule(self.rule)
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass
class IterateTrace:
    """Per-step solver records; ``iterations`` counts projections performed so far.

    The first record (index ``None``) describes the starting point. MP steps
    are labelled ``"mean"``. ``errors`` is ``None`` when no solution is known.
    """

    x0: np.ndarray
    iterations: List[int] = field(default_factory=list)
    indices: list = field(default_factory=list)
    residual_inf: List[float] = field(default_factory=list)
    residual_2: List[float] = field(default_factory=list)
    errors: Optional[List[float]] = None
    x_final: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.iterations)

    def append(self, k, index, r, err):
        self.iterations.append(k)
        self.indices.append(index)
        self.residual_inf.append(float(np.max(np.abs(r))))
        self.residual_2.append(float(np.linalg.norm(r)))
        if self.errors is not None:
            self.errors.append(err)


class SolveResult(NamedTuple):
    x: np.ndarray
    trace: IterateTrace
    status: Status


def solution_error(problem: ProblemInstance, x: np.ndarray) -> float:
    """Distance from ``x`` to the known solution, modulo the problem's symmetry.

    Complex problems are compared after the best global phase rotation;
    pure distance-geometry problems after the best rigid motion.
    """
    xs = problem.known_solution
    if problem.is_complex:
        phase = np.vdot(xs, x)
        rot = phase / abs(phase) if phase != 0 else 1.0
        return float(np.linalg.norm(x - rot * xs))
    if isinstance(problem.constraints[0], PairwiseDistance) and all(
        isinstance(c, PairwiseDistance) for c in problem.constraints
    ):
        d = problem.constraints[0].d
        return float(np.linalg.norm(rigid_align(x.reshape(-1, d), xs.reshape(-1, d)) - x.reshape(-1, d)))
    return float(np.linalg.norm(x - xs))


def rigid_align(Y: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Orthogonal-Procrustes image of point set ``X`` best matching ``Y`` (reflections allowed)."""
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    H = (X - mx).T @ (Y - my)
    U, _, Vt = np.linalg.svd(H)
    return (X - mx) @ (U @ Vt) + my


def initial_point(problem: ProblemInstance, rng: np.random.Generator, radius: Optional[float] = None):
    """Random start: ``x* + radius * g / ||g||`` when a solution is known, else Gaussian."""
    n = problem.dim
    if problem.is_complex:
        g = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    else:
        g = rng.standard_normal(n)
    if radius is None or problem.known_solution is None:
        return g
    return problem.known_solution + radius * g / np.linalg.norm(g)


def _check_point(problem, x):
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != problem.dim:
        raise DimensionError(f"expected dimension {problem.dim}, got {x.shape}")
    return x


def sp_step(problem: ProblemInstance, x, i: int) -> np.ndarray:
    """Project ``x`` onto constraint ``i`` (0-based)."""
    x = _check_point(problem, x)
    if not 0 <= i < problem.m:
        raise IndexError(f"constraint index {i} out of range for m={problem.m}")
    return _project(problem.constraints[i], x)


def mp_step(problem: ProblemInstance, x) -> np.ndarray:
    """Average of the projections onto all ``m`` sets."""
    x = _check_point(problem, x)
    return _mean_projection(problem, x)


def _mean_projection(problem, x):
    acc = np.zeros_like(x)
    for c in problem.constraints:
        acc += _project(c, x)
    return acc / problem.m


def sp_solve(
    problem: ProblemInstance,
    x0,
    config: Optional[SolverConfig] = None,
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> SolveResult:
    """Run successive projection from ``x0`` until the residual is below ``config.tol``.

    The stopping test uses the infinity norm of the residual vector (positive
    part for inequalities) and is evaluated after every projection, or after
    every mean step. ``callback(k, x)`` sees each new iterate. Greedy and
    mean steps stop with ``Status.STALLED`` when an update leaves ``x``
    bit-for-bit unchanged above ``tol``, which happens once ``tol`` is below
    the rounding floor of the residuals. Runs are
    deterministic in ``(problem, x0, config.seed)``; ``seed`` may also be a
    ``numpy.random.SeedSequence``.
    """
    config = config or SolverConfig()
    x = np.array(_check_point(problem, x0), dtype=complex if problem.is_complex else float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 has non-finite entries")
    rng = np.random.default_rng(config.seed)
    mean_step = config.rule is Rule.MEAN
    deterministic = mean_step or config.rule.is_greedy
    rule = None if mean_step else make_rule(config.rule, problem, config.norms)
    track_error = problem.known_solution is not None

    trace = IterateTrace(x0=x.copy(), errors=[] if track_error else None)
    record = config.record_trace

    def err_of(v):
        return solution_error(problem, v) if track_error else None

    r = problem.residuals(x)
    if record:
        trace.append(0, None, r, err_of(x))
    status = Status.MAX_ITERATIONS
    k = 0
    if np.max(np.abs(r)) <= config.tol:
        status = Status.CONVERGED
    else:
        constraints = problem.constraints
        while k < config.max_iterations:
            if mean_step:
                x_new = _mean_projection(problem, x)
                k += problem.m
                label = "mean"
            else:
                label = rule.next_index(r, k, rng)
                x_new = _project(constraints[label], x)
                k += 1
            if not np.all(np.isfinite(x_new)) or np.linalg.norm(x_new) > DIVERGENCE_NORM:
                trace.x_final = x
                raise DivergenceError(f"iterate diverged after {k} projections", trace)
            if deterministic and np.array_equal(x_new, x):
                status = Status.STALLED
                break
            x = x_new
            r = problem.residuals(x)
            if record:
                trace.append(k, label, r, err_of(x))
            if callback is not None:
                callback(k, x)
            if np.max(np.abs(r)) <= config.tol:
                status = Status.CONVERGED
                break
    trace.x_final = x.copy()
    return SolveResult(x, trace, status)
