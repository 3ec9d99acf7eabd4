"""Filtering, likelihoods and EM for diffusions with a hidden Markov switch."""

from ._core import (
    ConfigError,
    Model,
    NumericalError,
    e_step,
    em_run,
    hmm_forward,
    innovations_loglik,
    load_model,
    log_lik_partial,
    mle_partial,
    model_from_json,
    run_filter,
    scenario,
    scenario_names,
    simulate,
    smooth,
)

__all__ = [
    "ConfigError",
    "Model",
    "NumericalError",
    "e_step",
    "em_run",
    "hmm_forward",
    "innovations_loglik",
    "load_model",
    "log_lik_partial",
    "mle_partial",
    "model_from_json",
    "run_filter",
    "scenario",
    "scenario_names",
    "simulate",
    "smooth",
]
