"""Prognostic score adjustment for two-arm randomized trials.

Closed-form design calculus (variance fraction, design factor, sample
sizes), ANCOVA decision rules for a score versus its covariates, and a
deterministic Monte Carlo harness that fits a random-forest score on
historical controls and analyses simulated trials with it.
"""

from .ancova import (AncovaInputs, DecisionReport, binary_covariate_multiplier, expected_qk,
                     imbalance_ratio, score_vs_covariates, second_order_precision)
from .design import (DesignQuery, design_factor, design_factor_gap, fraction_grid,
                     interim_pi_rho, r2_oos, sample_size_two_arm, score_mse, variance_fraction)
from .dgp import DgpParams, TrialData, sample_friedman_trial, sample_idealized_trial
from .rng import RngStream
from .simulate import ExperimentConfig, ExperimentResults, fast_config, run_experiment

__version__ = "0.1.0"

__all__ = [
    "AncovaInputs", "DecisionReport", "DesignQuery", "DgpParams", "ExperimentConfig",
    "ExperimentResults", "RngStream", "TrialData", "binary_covariate_multiplier",
    "design_factor", "design_factor_gap", "expected_qk", "fast_config", "fraction_grid",
    "imbalance_ratio", "interim_pi_rho", "r2_oos", "run_experiment", "sample_friedman_trial",
    "sample_idealized_trial", "sample_size_two_arm", "score_mse", "score_vs_covariates",
    "second_order_precision", "variance_fraction",
]
