"""Seeded multi-trial experiments: CSV curves, SVG plot and a rate report."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..analysis import empirical_rate, rate_report
from ..core import PairwiseDistance, ProblemInstance, residual_vector
from ..selection import ALL_RULES, SEQUENTIAL_RULES, Rule
from ..solver import DivergenceError, SolverConfig, initial_point, sp_solve
from .generators import (
    gen_circle_problem,
    gen_graph_realization,
    gen_linear_system,
    gen_phase_retrieval,
)
from .metrics import nmse, nmse_phase_aligned, nmse_rigid_aligned
from .svg import line_plot_svg

log = logging.getLogger(__name__)

PROBLEM_ALIASES = {
    "circles": "circles",
    "phase": "phase",
    "phase_retrieval": "phase",
    "linear": "linear",
    "grp": "grp",
    "graph_realization": "grp",
}
CSV_HEADER = ("cycle", "nmse_mean", "nmse_min", "nmse_max", "residual_inf_mean")
GREEDY_COST_NOTE = (
    "gp/ngp evaluate all m residuals per projection: O(m^2 n) work per cycle "
    "versus O(m n) for cp, rp, rpp and nrp"
)


class ConfigError(ValueError):
    pass


class AllTrialsDivergedError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    problem: str = "circles"
    n: Optional[int] = 100
    m: Optional[int] = 400
    n_v: Optional[int] = None
    d: Optional[int] = None
    edges: Optional[int] = None
    variants: Sequence[Rule] = SEQUENTIAL_RULES
    trials: int = 1
    seed: int = 0
    tol: float = 1e-10
    max_cycles: int = 200
    # distance of x0 from x*, as a fraction of ||x*||
    init_radius: float = 0.5
    out: Path = Path("sp-out")

    def __post_init__(self):
        if self.problem not in PROBLEM_ALIASES:
            raise ConfigError(f"unknown problem {self.problem!r}")
        self.problem = PROBLEM_ALIASES[self.problem]
        try:
            self.variants = tuple(Rule(v) for v in self.variants)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not self.variants:
            raise ConfigError("at least one variant is required")
        if len(set(self.variants)) != len(self.variants):
            raise ConfigError("variants must be distinct")
        if self.problem == "grp":
            if not all(isinstance(v, int) and v > 0 for v in (self.n_v, self.d, self.edges)):
                raise ConfigError("grp needs positive n_v, d and edges")
            if self.edges > self.n_v * (self.n_v - 1) // 2:
                raise ConfigError("too many edges for n_v points")
        else:
            if not all(isinstance(v, int) and v > 0 for v in (self.n, self.m)):
                raise ConfigError("n and m must be positive integers")
            if self.m < self.n:
                raise ConfigError("generated instances need m >= n")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.trials < 30 and any(v in (Rule.RANDOM, Rule.NONUNIFORM) for v in self.variants):
            raise ConfigError("rp/nrp expectation estimates need trials >= 30")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.max_cycles < 1:
            raise ConfigError("max_cycles must be at least 1")
        if not self.init_radius >= 0:
            raise ConfigError("init_radius must be nonnegative")
        self.out = Path(self.out)


def make_problem(config: ExperimentConfig) -> ProblemInstance:
    if config.problem == "circles":
        problem = gen_circle_problem(config.n, config.m, config.seed)
    elif config.problem == "phase":
        problem = gen_phase_retrieval(config.n, config.m, config.seed)
    elif config.problem == "linear":
        problem = gen_linear_system(config.n, config.m, config.seed)
    else:
        problem = gen_graph_realization(config.n_v, config.d, config.edges, config.seed)
    r = residual_vector(problem, problem.known_solution)
    if np.max(np.abs(r)) > 1e-9:
        raise RuntimeError(f"generated instance is not solved by x*: max residual {np.max(np.abs(r)):.3e}")
    return problem


def nmse_for(problem: ProblemInstance):
    """The NMSE that matches the problem's solution symmetry."""
    if problem.is_complex:
        return nmse_phase_aligned
    if all(isinstance(c, PairwiseDistance) for c in problem.constraints):
        d = problem.constraints[0].d
        return lambda x, xs: nmse_rigid_aligned(x, xs, d)
    return nmse


def rate_unit(rule: Rule) -> str:
    """Iteration unit of the asymptotic rate for each rule."""
    if rule in (Rule.CYCLIC, Rule.PERMUTED):
        return "cycle"
    if rule is Rule.MEAN:
        return "step"
    return "projection"


@dataclass
class TrialRun:
    cycle_nmse: List[float]
    cycle_residual: List[float]
    # error per rate unit (projection, MP step or cycle)
    unit_errors: List[float]
    converged: bool


def run_trial(problem: ProblemInstance, rule: Rule, trial_seed, init_radius: float, tol: float, max_cycles: int) -> TrialRun:
    """One solve from a random start; ``trial_seed`` is spawned into init and solver streams."""
    init_ss, solve_ss = np.random.SeedSequence(trial_seed).spawn(2)
    x_star = problem.known_solution
    m = problem.m
    metric = nmse_for(problem)
    x0 = initial_point(problem, np.random.default_rng(init_ss), init_radius * float(np.linalg.norm(x_star)))
    cyc_nmse = [metric(x0, x_star)]
    cyc_res = [float(np.max(np.abs(problem.residuals(x0))))]

    def on_step(k, x):
        if k % m == 0:
            cyc_nmse.append(metric(x, x_star))
            cyc_res.append(float(np.max(np.abs(problem.residuals(x)))))

    config = SolverConfig(rule=rule, tol=tol, max_iterations=max_cycles * m, seed=solve_ss)
    x, trace, status = sp_solve(problem, x0, config, callback=on_step)
    k_final = trace.iterations[-1]
    if k_final % m:
        cyc_nmse.append(metric(x, x_star))
        cyc_res.append(float(np.max(np.abs(problem.residuals(x)))))
    errors = trace.errors
    if rate_unit(rule) == "cycle":
        errors = errors[::m]
    return TrialRun(cyc_nmse, cyc_res, list(errors), status.value == "converged")


def _pad(rows: List[List[float]]) -> np.ndarray:
    length = max(len(r) for r in rows)
    return np.array([r + [r[-1]] * (length - len(r)) for r in rows])


def fit_averaged_rate(unit_errors: List[List[float]]) -> Optional[float]:
    """Contraction factor of the root-mean-square error over trials.

    The RMS error is the square root of ``E||x_k - x*||^2``, the quantity whose
    decay the random-rule rates describe. Curves are cut to the shortest
    trial, so every average is over the same trials. The fit uses the second
    half of that range.
    """
    length = min(len(e) for e in unit_errors)
    mean = np.sqrt(np.mean(np.square([e[:length] for e in unit_errors]), axis=0))
    above = int(np.argmax(~(mean > 1e-14))) if np.any(~(mean > 1e-14)) else mean.size
    window = above // 2
    if window < 2:
        return None
    return empirical_rate(mean[:above], window)


def trial_seed(seed: int, rule: Rule, trial: int) -> list:
    return [int(seed), ALL_RULES.index(rule), int(trial)]


def format_float(x: float) -> str:
    return repr(float(x))


def write_csv(path: Path, nmse_rows: np.ndarray, res_rows: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        mean, lo, hi = nmse_rows.mean(axis=0), nmse_rows.min(axis=0), nmse_rows.max(axis=0)
        rmean = res_rows.mean(axis=0)
        for c in range(nmse_rows.shape[1]):
            w.writerow([c] + [format_float(v) for v in (mean[c], lo[c], hi[c], rmean[c])])


@dataclass
class ExperimentResult:
    problem: ProblemInstance
    csv_paths: Dict[str, Path]
    svg_path: Path
    report_path: Path
    report: dict
    runs: Dict[str, List[TrialRun]] = field(repr=False, default_factory=dict)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every configured variant over ``config.trials`` seeded trials and write the artifacts.

    Files written to ``config.out``: ``<variant>.csv`` per variant,
    ``nmse.svg`` and ``report.json``. Divergent trials are left out of the
    curves and counted in the report. If every trial of every variant
    diverges, :class:`AllTrialsDivergedError` is raised after the report is
    written.
    """
    problem = make_problem(config)
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    runs: Dict[str, List[TrialRun]] = {}
    diverged: Dict[str, int] = {}
    csv_paths: Dict[str, Path] = {}
    curves: Dict[str, List[float]] = {}
    empirical: Dict[str, float] = {}
    for rule in config.variants:
        ok: List[TrialRun] = []
        bad = 0
        for t in range(config.trials):
            try:
                ok.append(
                    run_trial(problem, rule, trial_seed(config.seed, rule, t), config.init_radius, config.tol, config.max_cycles)
                )
            except DivergenceError as exc:
                log.warning("%s trial %d diverged: %s", rule.value, t, exc)
                bad += 1
        diverged[rule.value] = bad
        runs[rule.value] = ok
        if not ok:
            continue
        nmse_rows = _pad([r.cycle_nmse for r in ok])
        res_rows = _pad([r.cycle_residual for r in ok])
        path = out / f"{rule.value}.csv"
        write_csv(path, nmse_rows, res_rows)
        csv_paths[rule.value] = path
        curves[rule.value] = list(np.log10(np.maximum(nmse_rows.mean(axis=0), 1e-300)))
        try:
            rate = fit_averaged_rate([r.unit_errors for r in ok])
        except ValueError:
            rate = None
        if rate is not None:
            empirical[rule.value] = rate

    svg_path = out / "nmse.svg"
    svg_path.write_text(
        line_plot_svg(curves, title=f"{config.problem}: NMSE vs cycle"), encoding="utf-8"
    )
    report = analysis_report(problem)
    report["empirical"] = empirical
    report["empirical_units"] = {v.value: rate_unit(v) for v in config.variants if v.value in empirical}
    report["diverged"] = diverged
    report["trials"] = config.trials
    report["notes"] = [GREEDY_COST_NOTE] if any(v.is_greedy for v in config.variants) else []
    report_path = out / "report.json"
    write_json(report_path, report)
    if all(not runs[v.value] for v in config.variants):
        raise AllTrialsDivergedError("all trials diverged")
    return ExperimentResult(problem, csv_paths, svg_path, report_path, report, runs)


def analysis_report(problem: ProblemInstance, restarts: int = 8, seed: int = 0) -> dict:
    try:
        return rate_report(problem, restarts=restarts, seed=seed).to_dict()
    except ValueError as exc:
        return {"error": str(exc), "empirical": {}}


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n", encoding="utf-8")
