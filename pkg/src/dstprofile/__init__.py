"""Exact, asymptotic and simulated profiles of random digital search trees."""
from .asymptotics import (F_saddle, F_small_explicit, LevelPredictions, SaddleResult,
                          central_range, height_probability_bounds, level_predictions,
                          mean_elementary, predict_height_level, predict_saturation_level,
                          saddle_solve)
from .bits import ExplicitBits, SplitMixBits
from .errors import (BitExhausted, CapExceeded, DegenerateVariance, DomainError, DstError,
                     NoConvergence, OutsideCentralRange, PrecisionExhausted)
from .experiments import (CltReport, ConcentrationReport, ExperimentSpec, clt_experiment,
                          concentration_experiment, profile_table)
from .limitfns import F_eval, FI_eval, G_eval, GI_eval, LimitFnValue, P_eval, phi_eval
from .moments import (CLOSED_CAP, EXTERNAL, INTERNAL, MU_CAP, NU_CAP, MomentTable,
                      charlier_coeffs, charlier_tau, depoissonize, internal_mean,
                      internal_mean_exact, internal_variance_exact, mean_closed,
                      poisson_eval, poisson_mean, poissonized_variance, recurrence_tables,
                      second_moment_closed, unsuccessful_search_pmf, variance_exact)
from .precision import DEFAULT, PrecisionContext
from .qseries import QTable, q_finite, q_infinity, q_log_asymptotic, q_log_direct, q_product
from .simulator import (DstTree, EmpiricalMoments, ProfileSummary, TrialConfig, build_tree,
                        level_samples, profiles, run_trials, sample_unsuccessful_depth,
                        simulate_tree)

__version__ = "0.1.0"
