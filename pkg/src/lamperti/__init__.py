"""Tail asymptotics toolkit for Markov chains with asymptotically zero drift.

Exact solvers (stationary tables, killed-harmonic functions, the
h-transform), a seeded Monte Carlo engine with numba and numpy twin
backends, tail fitting with a prefactor cross-check, and a pipeline
that ties them into reproducible report bundles.
"""

from .assumptions import AssumptionCheck, validate_assumptions
from .chains import (ChainSpec, DriftProfile, JumpLaw, MomentTable,
                     make_birth_death, make_left_skip_free,
                     make_origin_jump_chain, make_reflected_walk,
                     make_updrift_birth_death, moments)
from .config import ConfigError, RunSettings, build_chain, load_settings
from .drift import (DriftReport, PassageBounds, classify, drift,
                    log_drift_check, passage_bounds)
from .engine import (BudgetExceededError, EventLedger, GammaTestReport,
                     OccupationReport, PassageReport, RenewalEstimate,
                     SimConfig, TrajectoryBatch, gamma_limit_test,
                     passage_time_suite, renewal_estimate,
                     return_probability, simulate, stationary_occupation)
from .harmonic import (HarmonicTable, SandwichReport,
                       harmonic_identity_check, harmonic_solve,
                       skip_free_sandwich_check, u_c_drift,
                       u_equivalence_check)
from .pipeline import PipelineAbort, PipelineResult, run_pipeline
from .rates import RateFunctions, rate
from .stationary import (StationaryTable, diffusion_density,
                         stationary_global_balance, stationary_skip_free)
from .tailfit import ConstantPrediction, TailFitReport, fit_tail, predict_constant
from .transform import (ReturnCheck, TransformedChain, nstep_consistency,
                        transform, transformed_moments,
                        transformed_return_check)
from .verification import CriterionResult, VerifyContext, run_all, run_criterion

__version__ = "0.1.0"

__all__ = [
    "AssumptionCheck", "validate_assumptions",
    "ChainSpec", "DriftProfile", "JumpLaw", "MomentTable",
    "make_birth_death", "make_left_skip_free", "make_origin_jump_chain",
    "make_reflected_walk", "make_updrift_birth_death", "moments",
    "ConfigError", "RunSettings", "build_chain", "load_settings",
    "DriftReport", "PassageBounds", "classify", "drift", "log_drift_check",
    "passage_bounds",
    "BudgetExceededError", "EventLedger", "GammaTestReport",
    "OccupationReport", "PassageReport", "RenewalEstimate", "SimConfig",
    "TrajectoryBatch", "gamma_limit_test", "passage_time_suite",
    "renewal_estimate", "return_probability", "simulate",
    "stationary_occupation",
    "HarmonicTable", "SandwichReport", "harmonic_identity_check",
    "harmonic_solve", "skip_free_sandwich_check", "u_c_drift",
    "u_equivalence_check",
    "PipelineAbort", "PipelineResult", "run_pipeline",
    "RateFunctions", "rate",
    "StationaryTable", "diffusion_density", "stationary_global_balance",
    "stationary_skip_free",
    "ConstantPrediction", "TailFitReport", "fit_tail", "predict_constant",
    "ReturnCheck", "TransformedChain", "nstep_consistency", "transform",
    "transformed_moments", "transformed_return_check",
    "CriterionResult", "VerifyContext", "run_all", "run_criterion",
]
