"""Numerical free central limit theorem: subordination, Edgeworth-type expansions and rates."""
from .cauchy import (StieltjesValue, TauRepresentation, TransformError, UpperHalfPoint, cauchy_G,
                     extract_tau, reciprocal_F, stieltjes_density)
from .edgeworth import (BranchError, EdgeworthParams, ExpansionError, SupportWindow,
                        edgeworth_params, meixner_density, meixner_F, meixner_gap,
                        quintic_residual, support_window, v_n)
from .functionals import (FunctionalReport, first_moment_log_kernel, fisher, free_entropy,
                          l1_distance, log_energy, log_potential, relative_entropy,
                          relative_fisher)
from .measures import (Arcsine, Atomic, FreeMeixner, GridDensity, Measure, MeasureError,
                       Semicircle, from_literal, standardize, symmetric_bernoulli,
                       two_atom_skewed)
from .rates import ExperimentConfig, RateTable, fit_slope
from .subordination import (SolverError, TruncationContext, build_truncated, density_pn,
                            operational_n1,
                            power_density, solve_T, solve_Z, subordination_S)

__version__ = "0.1.0"
