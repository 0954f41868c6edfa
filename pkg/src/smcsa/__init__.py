"""Annealed particle search for regression under black-box shape constraints.

The optimiser (:mod:`smcsa.core`) evolves a population of feasible
parameter vectors through a cooling schedule with importance resampling
and Metropolis moves; feasibility is an arbitrary yes/no indicator.
Built-in indicators (:mod:`smcsa.constraints`) decide monotonicity of
rational curves and B-spline expansions exactly from the coefficients.
Model families and losses live in :mod:`smcsa.models`; datasets,
benchmark protocols, and an exact spline reference solver in
:mod:`smcsa.experiments`; the command-line front end in :mod:`smcsa.cli`.
"""

from .constraints import (DECREASING, INCREASING, Interval, RootReport,
                          bspline_monotone_batch, bspline_monotone_indicator,
                          has_no_roots_in, is_nonnegative_on, poly_derivative,
                          poly_eval, rational_monotone_indicator,
                          real_roots_in_interval)
from .core import (CoolingSchedule, InfeasibleStartError, Particle, Population,
                   Problem, ProposalConfig, RunResult, acceptance_probability,
                   compute_weights, multistart_sa_run, propose, resample,
                   resample_indices, sa_move, smcsa_run)
from .experiments import (CANONICAL_SEED, DataFormatError, ExperimentSpec,
                          StartSet, StartSetError, SummaryRow, SummaryTable,
                          contaminate_ht1, duplicate_starts, gen_ht0,
                          gen_lidar_surrogate, gen_start_set, load_dataset_csv,
                          monotone_spline_problem, qp_oracle_monotone_spline,
                          rational_monotone_problem, run_experiment,
                          run_replication, scale_axes, scale_by_max,
                          summarize_runs, write_dataset_csv)
from .models import (BSplineBasis, Dataset, DomainError, LossSpec, PoleError,
                     RationalModel, SingularDesignError, bspline_basis,
                     bspline_basis_derivative, design_matrix, loss,
                     ols_estimate, rational_crude_estimate, rational_eval,
                     spline_derivative, spline_value, tukey_biweight)

__version__ = "0.1.0"

__all__ = [
    "DECREASING", "INCREASING", "Interval", "RootReport",
    "bspline_monotone_batch", "bspline_monotone_indicator", "has_no_roots_in",
    "is_nonnegative_on", "poly_derivative", "poly_eval",
    "rational_monotone_indicator", "real_roots_in_interval",
    "CoolingSchedule", "InfeasibleStartError", "Particle", "Population",
    "Problem", "ProposalConfig", "RunResult", "acceptance_probability",
    "compute_weights", "multistart_sa_run", "propose", "resample",
    "resample_indices", "sa_move", "smcsa_run",
    "CANONICAL_SEED", "DataFormatError", "ExperimentSpec", "StartSet",
    "StartSetError", "SummaryRow", "SummaryTable", "contaminate_ht1",
    "duplicate_starts", "gen_ht0", "gen_lidar_surrogate", "gen_start_set",
    "load_dataset_csv", "monotone_spline_problem", "qp_oracle_monotone_spline",
    "rational_monotone_problem", "run_experiment", "run_replication",
    "scale_axes", "scale_by_max", "summarize_runs", "write_dataset_csv",
    "BSplineBasis", "Dataset", "DomainError", "LossSpec", "PoleError",
    "RationalModel", "SingularDesignError", "bspline_basis",
    "bspline_basis_derivative", "design_matrix", "loss", "ols_estimate",
    "rational_crude_estimate", "rational_eval", "spline_derivative",
    "spline_value", "tukey_biweight",
    "__version__",
]
