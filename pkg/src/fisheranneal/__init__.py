"""Time-inhomogeneous Langevin dynamics toolkit.

Simulates annealed overdamped, skew-drift, and kinetic Langevin ensembles,
estimates KL / L1 / relative-Fisher divergences against the time-dependent
Gibbs reference, and certifies the matrix decay conditions behind them.
"""

from .dynamics import (ConstantJ, DimensionError, NonReversible, Overdamped,
                       QuadraticJ, Underdamped, check_pi_gamma_divergence,
                       drift, gamma)
from .integrate import (BLOCK_SIZE, Ensemble, IntegrationError, StepPlan,
                        em_step, normal_draws, run_trajectory)
from .measure import (DecayFit, DivergenceReport, HistogramGrid,
                      QuadratureError, ReferenceMeasure, discrete_kl,
                      discrete_l1, fisher_estimate, fit_decay_rate,
                      histogram_kl, l1_distance, normalization_constant)
from .oracle import (GaussianState, binned_gaussian_kl, gaussian_kl,
                     gaussian_relative_fisher, normal_bin_masses,
                     solve_gaussian_oracle)
from .potentials import PRESET_POTENTIALS, Potential, get_potential, quadratic_form
from .schedules import Schedule, constant, hyperbolic, inverse_log, shifted_inverse_log
from .curvature import (Cor63Result, CurvatureReport, DiagonalAlpha, GammaField,
                        HessianField, Prop62Flags, PreconditionError,
                        UnderdampedParams, check_prop62, corollary63_lambda,
                        gronwall_envelope, hessian_j_drift,
                        hessian_nonreversible_diag, hessian_overdamped,
                        hessian_underdamped, lambda_certificate,
                        overdamped_forcing_estimate, underdamped_field_in_u,
                        underdamped_matrices)
from .experiments import (ComparisonVerdict, RunRecord, Scenario,
                          compare_scenarios, list_presets, preset_scenario,
                          run_scenario, slope_window)

__version__ = "0.1.0"
