from .experiment import (
    AllTrialsDivergedError,
    ConfigError,
    ExperimentConfig,
    fit_averaged_rate,
    make_problem,
    run_experiment,
    run_trial,
)
from .generators import gen_circle_problem, gen_graph_realization, gen_linear_system, gen_phase_retrieval
from .metrics import nmse, nmse_phase_aligned, nmse_rigid_aligned
