"""Chain efficiency diagnostics: acceptance rate, truncated-kernel
inefficiency factors, equivalent sample size and equivalent computing time."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ESS_BASE = 10_000      # ESS = ESS_BASE / IF
ECT_BASE = 100_000     # ECT = ECT_BASE * IF * time-per-iteration


def autocorr(series, max_lag: int) -> np.ndarray:
    """Autocorrelations rho_0..rho_max_lag with the biased 1/M denominator."""
    x = np.asarray(series, float).ravel()
    m = x.size
    if m <= max_lag:
        raise ValueError("series shorter than max_lag")
    xc = x - x.mean()
    var = float(np.mean(xc * xc))
    if var == 0.0:
        raise ValueError("zero-variance series")
    nfft = 1 << int(np.ceil(np.log2(2 * m)))
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f))[: max_lag + 1] / m
    return acov / acov[0]


def inefficiency(series) -> float:
    """IF = 1 + 2 sum_{j<=T} rho_j, truncated at the first lag below 2/sqrt(M).

    Falls back to M/2 lags when no lag meets the cutoff; returns NaN for a
    zero-variance series and floors the estimate at zero.
    """
    x = np.asarray(series, float).ravel()
    m = x.size
    if m < 100:
        raise ValueError("need at least 100 observations")
    try:
        rho = autocorr(x, m // 2)
    except ValueError:
        return math.nan
    cutoff = 2.0 / math.sqrt(m)
    below = np.flatnonzero(np.abs(rho[1:]) < cutoff)
    t = int(below[0]) + 1 if below.size else m // 2
    return max(float(1.0 + 2.0 * np.sum(rho[1 : t + 1])), 0.0)


def ess(inef: float, base: int = ESS_BASE) -> float:
    if inef <= 0:
        raise ValueError("IF must be positive")
    return base / inef


def ect(inef: float, time_per_iter: float, base: int = ECT_BASE) -> float:
    if inef <= 0:
        raise ValueError("IF must be positive")
    return base * inef * time_per_iter


@dataclass
class DiagnosticsReport:
    acceptance_rate: float          # percent
    names: list
    post_mean: np.ndarray
    post_sd: np.ndarray
    if_values: np.ndarray           # NaN where undefined
    ess_values: np.ndarray
    if_min: float
    if_median: float
    if_max: float
    ect: float
    time_per_iteration: float
    undefined: list                 # parameter names with undefined IF


def summarize(history, burn_in: int) -> DiagnosticsReport:
    """Post-burn-in acceptance rate, per-parameter IF/ESS and the
    min/median/max IF triple; constant parameters are flagged and excluded
    from the triple."""
    draws = history.iterates[burn_in:]
    if draws.shape[0] == 0:
        raise ValueError("burn-in leaves no iterates")
    accepted = history.accepted[burn_in:]
    names = list(history.names)
    d = draws.shape[1]
    ifs = np.empty(d)
    undefined = []
    for j in range(d):
        ifs[j] = inefficiency(draws[:, j])
        if math.isnan(ifs[j]):
            undefined.append(names[j])
    valid = ifs[~np.isnan(ifs)]
    if valid.size == 0:
        if_min = if_med = if_max = math.nan
    else:
        if_min, if_med, if_max = (float(np.min(valid)), float(np.median(valid)),
                                  float(np.max(valid)))
    tpi = float(np.mean(history.times[burn_in:]))
    with np.errstate(divide="ignore"):
        ess_vals = ESS_BASE / ifs
    return DiagnosticsReport(
        acceptance_rate=100.0 * float(np.mean(accepted)),
        names=names,
        post_mean=draws.mean(axis=0),
        post_sd=draws.std(axis=0, ddof=1),
        if_values=ifs,
        ess_values=ess_vals,
        if_min=if_min, if_median=if_med, if_max=if_max,
        ect=ECT_BASE * if_med * tpi if not math.isnan(if_med) else math.nan,
        time_per_iteration=tpi,
        undefined=undefined)
