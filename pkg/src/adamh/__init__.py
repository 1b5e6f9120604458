"""Adaptive Metropolis-Hastings samplers with mixture-of-normals and
t-copula independence proposals, Bayesian benchmark targets, and chain
efficiency diagnostics."""

from .diagnostics import DiagnosticsReport, autocorr, ect, ess, inefficiency, summarize
from .dists import CovMatrix, MvtParams, mvn_logpdf, mvn_sample, mvt_logpdf, mvt_sample
from .engine import ChainHistory, RunConfig, mh_step, run_chain, run_matrix
from .mixfit import MixtureOfNormals, fit_marginal, fit_mixture, jarque_bera_gate, khm_cluster, nc_schedule
from .copula import TCopulaModel, copula_logpdf, copula_sample, fit_t_copula, to_x, to_z
from .targets import (BimodalTarget, Dataset, GaussianTarget, LogisticTarget,
                      PriorSpec, ProbitReTarget, QuantileTarget)

__all__ = [
    "BimodalTarget", "ChainHistory", "CovMatrix", "Dataset",
    "DiagnosticsReport", "GaussianTarget", "LogisticTarget",
    "MixtureOfNormals", "MvtParams", "PriorSpec", "ProbitReTarget",
    "QuantileTarget", "RunConfig", "TCopulaModel", "autocorr",
    "copula_logpdf", "copula_sample", "ect", "ess", "fit_marginal",
    "fit_mixture", "fit_t_copula", "inefficiency", "jarque_bera_gate",
    "khm_cluster", "mh_step", "mvn_logpdf", "mvn_sample", "mvt_logpdf",
    "mvt_sample", "nc_schedule", "run_chain", "run_matrix", "summarize",
    "to_x", "to_z",
]
