"""Log-posterior evaluators: logistic, quantile and probit random-effects
likelihoods under normal, double-exponential and mixture-of-normals priors,
plus the synthetic bimodal demonstration target.

All targets live on an unconstrained parameter space; positive or (0,1)
hyperparameters enter through log / logit transforms whose Jacobians are
added by the prior layer.  Parameter vectors are laid out as

    [hyperparameter (if the prior has one), scale (if the model has one),
     regression coefficients ...]

with the first design column conventionally the intercept.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit, log_ndtr, logsumexp

from .dists import LOG_2PI, inv_gamma_logpdf

_HALF_LOG_2PI = 0.5 * LOG_2PI


@dataclass(frozen=True)
class Dataset:
    design: np.ndarray          # (n, d)
    response: np.ndarray        # (n,)
    group_index: np.ndarray | None = None  # 1..N contiguous, probit RE only

    def __post_init__(self):
        object.__setattr__(self, "design", np.atleast_2d(np.asarray(self.design, float)))
        object.__setattr__(self, "response", np.asarray(self.response, float).ravel())
        if self.design.shape[0] != self.response.size:
            raise ValueError("design and response lengths differ")
        if self.group_index is not None:
            g = np.asarray(self.group_index, int).ravel()
            if g.size != self.response.size:
                raise ValueError("group index length mismatch")
            uniq = np.unique(g)
            if uniq[0] != 1 or not np.array_equal(uniq, np.arange(1, uniq.size + 1)):
                raise ValueError("group indices must be contiguous from 1")
            object.__setattr__(self, "group_index", g)

    @property
    def n_obs(self) -> int:
        return self.response.size

    @property
    def n_features(self) -> int:
        return self.design.shape[1]

    @property
    def n_groups(self) -> int:
        return 0 if self.group_index is None else int(self.group_index.max())


@dataclass(frozen=True)
class PriorSpec:
    kind: str                    # normal | double_exponential | mixture_normals
    variance: float = 1e6        # diffuse normal variance (also the intercept's)
    tau_s2: float = 0.01
    tau_l2: float = 1e4
    ig_shape: float = 0.01
    ig_scale: float = 0.01

    def __post_init__(self):
        if self.kind not in ("normal", "double_exponential", "mixture_normals"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if min(self.variance, self.tau_s2, self.tau_l2) <= 0:
            raise ValueError("variances must be positive")
        if self.tau_s2 >= self.tau_l2:
            raise ValueError("tau_s2 must be smaller than tau_l2")

    @property
    def n_hyper(self) -> int:
        return 0 if self.kind == "normal" else 1


def _normal_logpdf(x, var):
    return -_HALF_LOG_2PI - 0.5 * np.log(var) - 0.5 * np.asarray(x) ** 2 / var


def log_prior(theta, spec: PriorSpec, scale_kind: str = "none") -> float:
    """Joint log prior over [hyper?, scale?, beta...] including Jacobians.

    ``scale_kind`` adds the IG(0.01, 0.01) hyperprior for the quantile
    scale (theta holds log sigma) or the random-effect variance (theta
    holds log sigma_mu^2).  The intercept (first coefficient) is always
    N(0, 1e6).
    """
    theta = np.asarray(theta, float)
    pos = 0
    total = 0.0
    hyper = None
    if spec.n_hyper:
        hyper = theta[pos]
        pos += 1
    if scale_kind != "none":
        log_s = theta[pos]
        pos += 1
        s = np.exp(log_s)
        # change of variables from the positive scale to its log
        total += inv_gamma_logpdf(s, spec.ig_shape, spec.ig_scale) + log_s
    beta = theta[pos:]
    intercept, rest = beta[0], beta[1:]
    total += float(_normal_logpdf(intercept, 1e6))

    if spec.kind == "normal":
        total += float(np.sum(_normal_logpdf(rest, spec.variance)))
    elif spec.kind == "double_exponential":
        tau = np.exp(hyper)
        total += float(np.sum(-np.log(2.0 * tau) - np.abs(rest) / tau))
        total += inv_gamma_logpdf(tau, spec.ig_shape, spec.ig_scale) + hyper
    else:  # mixture_normals
        omega = expit(hyper)
        comp = np.stack([np.log(omega) + _normal_logpdf(rest, spec.tau_s2),
                         np.log1p(-omega) + _normal_logpdf(rest, spec.tau_l2)])
        total += float(np.sum(logsumexp(comp, axis=0)))
        # uniform(0,1) prior on omega contributes only the logit Jacobian
        total += float(np.log(omega) + np.log1p(-omega))
    return total


def logistic_loglik(beta, data: Dataset) -> float:
    eta = data.design @ np.asarray(beta, float)
    return float(np.sum(data.response * eta) - np.sum(np.logaddexp(0.0, eta)))


def rho_delta(u, delta: float):
    """Quantile check function: delta*u for u >= 0, (delta-1)*u otherwise."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    u = np.asarray(u, float)
    out = 0.5 * (np.abs(u) + (2.0 * delta - 1.0) * u)
    return float(out) if np.ndim(out) == 0 else out


def quantile_loglik(beta, log_sigma: float, data: Dataset, delta: float) -> float:
    sigma = np.exp(log_sigma)
    resid = data.response - data.design @ np.asarray(beta, float)
    n = data.n_obs
    return float(n * np.log(delta * (1.0 - delta)) - n * log_sigma
                 - np.sum(rho_delta(resid / sigma, delta)))


# --- probit random effects (pseudo-marginal) --------------------------------

@dataclass(frozen=True)
class ImportanceState:
    """Per-group normal importance densities h_i = N(mean_i, kappa * var_i)."""

    mean: np.ndarray
    var: np.ndarray
    kappa: float = 4.0
    m_draws: int = 100
    refresh_interval: int = 100

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, float))
        object.__setattr__(self, "var", np.asarray(self.var, float))
        if np.any(self.var <= 0):
            raise ValueError("importance variances must be positive")
        if self.kappa < 1.0:
            raise ValueError("kappa must be >= 1")


def initial_importance_state(n_groups: int, m_draws: int = 100,
                             kappa: float = 4.0,
                             refresh_interval: int = 100) -> ImportanceState:
    # first h is N(0, 1.5 sigma^2) with sigma^2 = 1; stored var absorbs kappa
    return ImportanceState(mean=np.zeros(n_groups),
                           var=np.full(n_groups, 1.5 / kappa),
                           kappa=kappa, m_draws=m_draws,
                           refresh_interval=refresh_interval)


def _group_slices(data: Dataset):
    g = data.group_index
    out = []
    for i in range(1, data.n_groups + 1):
        out.append(np.flatnonzero(g == i))
    return out


def _group_log_weights(idx, mu, beta, log_s2, data: Dataset, st, i):
    """log p(y_i | mu) + log p(mu | sigma_mu^2) - log h_i(mu) for M draws."""
    eta = mu[:, None] + data.design[idx] @ beta
    sign = 2.0 * data.response[idx] - 1.0
    ll_obs = np.sum(log_ndtr(sign * eta), axis=1)
    s2 = np.exp(log_s2)
    lp_mu = -_HALF_LOG_2PI - 0.5 * log_s2 - 0.5 * mu ** 2 / s2
    hv = st.kappa * st.var[i]
    lh = -_HALF_LOG_2PI - 0.5 * np.log(hv) - 0.5 * (mu - st.mean[i]) ** 2 / hv
    return ll_obs + lp_mu - lh


def probit_re_loglik_hat(beta, log_sigma_mu2, data: Dataset,
                         st: ImportanceState, rng: np.random.Generator) -> float:
    """Unbiased importance-sampling estimate of the marginal log likelihood.

    Fresh draws from each group's importance density on every call
    (pseudo-marginal style).  Returns -inf if every weight in some group
    underflows, which makes the Metropolis step reject the proposal.
    """
    beta = np.asarray(beta, float)
    total = 0.0
    sds = np.sqrt(st.kappa * st.var)
    for i, idx in enumerate(_group_slices(data)):
        mu = st.mean[i] + sds[i] * rng.standard_normal(st.m_draws)
        logw = _group_log_weights(idx, mu, beta, log_sigma_mu2, data, st, i)
        top = np.max(logw)
        if not np.isfinite(top):
            return -np.inf
        total += top + np.log(np.mean(np.exp(logw - top)))
    return float(total)


def refresh_importance(theta_history, data: Dataset, st: ImportanceState,
                       rng: np.random.Generator,
                       theta_split=None) -> ImportanceState:
    """Re-center the importance densities on self-normalized posterior moments.

    ``theta_history`` holds recent (beta, log_sigma_mu2) iterates; each
    contributes a self-normalized estimate of E(mu_i | y_i, theta) and the
    second moment, averaged across iterates.  Variances are floored at 1e-6.
    """
    slices = _group_slices(data)
    n_groups = len(slices)
    e1 = np.zeros(n_groups)
    e2 = np.zeros(n_groups)
    counts = np.zeros(n_groups)
    sds = np.sqrt(st.kappa * st.var)
    for beta, log_s2 in theta_history:
        beta = np.asarray(beta, float)
        for i, idx in enumerate(slices):
            mu = st.mean[i] + sds[i] * rng.standard_normal(st.m_draws)
            logw = _group_log_weights(idx, mu, beta, log_s2, data, st, i)
            top = np.max(logw)
            if not np.isfinite(top):
                continue
            w = np.exp(logw - top)
            tot = w.sum()
            e1[i] += np.sum(w * mu) / tot
            e2[i] += np.sum(w * mu ** 2) / tot
            counts[i] += 1
    mean = st.mean.copy()
    var = st.var.copy()
    ok = counts > 0
    mean[ok] = e1[ok] / counts[ok]
    var[ok] = np.maximum(e2[ok] / counts[ok] - mean[ok] ** 2, 1e-6)
    return replace(st, mean=mean, var=var)


def bimodal_target_logpdf(x, mode: float = 3.0) -> float:
    """Equal mixture of N(-mode*1, I) and N(+mode*1, I)."""
    x = np.asarray(x, float)
    d = x.size
    a = -0.5 * np.sum((x + mode) ** 2)
    b = -0.5 * np.sum((x - mode) ** 2)
    return float(np.log(0.5) - 0.5 * d * LOG_2PI + np.logaddexp(a, b))


# --- target models consumed by the engine -----------------------------------

@dataclass
class BimodalTarget:
    dim: int = 5
    mode: float = 3.0
    stochastic: bool = field(default=False, init=False)

    @property
    def names(self):
        return [f"x{j}" for j in range(self.dim)]

    def start(self) -> np.ndarray:
        return np.full(self.dim, -self.mode)

    def logpdf(self, theta, rng=None) -> float:
        return bimodal_target_logpdf(theta, self.mode)


@dataclass
class GaussianTarget:
    """Plain multivariate normal; used for calibration and smoke tests."""

    mu: np.ndarray
    cov: "object"  # CovMatrix or array-like
    stochastic: bool = field(default=False, init=False)

    def __post_init__(self):
        from .dists import CovMatrix
        if not isinstance(self.cov, CovMatrix):
            self.cov = CovMatrix.from_entries(self.cov)

    @property
    def dim(self) -> int:
        return len(self.mu)

    @property
    def names(self):
        return [f"x{j}" for j in range(self.dim)]

    def start(self) -> np.ndarray:
        return np.asarray(self.mu, float).copy()

    def logpdf(self, theta, rng=None) -> float:
        from .dists import mvn_logpdf
        return mvn_logpdf(theta, self.mu, self.cov)


@dataclass
class LogisticTarget:
    data: Dataset
    prior: PriorSpec
    stochastic: bool = field(default=False, init=False)

    @property
    def dim(self) -> int:
        return self.prior.n_hyper + self.data.n_features

    @property
    def names(self):
        hyper = ["theta"] if self.prior.n_hyper else []
        return hyper + [f"beta{j}" for j in range(self.data.n_features)]

    def start(self) -> np.ndarray:
        return np.zeros(self.dim)

    def logpdf(self, theta, rng=None) -> float:
        beta = theta[self.prior.n_hyper:]
        return logistic_loglik(beta, self.data) + log_prior(theta, self.prior)


@dataclass
class QuantileTarget:
    data: Dataset
    prior: PriorSpec
    delta: float
    stochastic: bool = field(default=False, init=False)

    @property
    def dim(self) -> int:
        return self.prior.n_hyper + 1 + self.data.n_features

    @property
    def names(self):
        hyper = ["theta"] if self.prior.n_hyper else []
        return hyper + ["log_sigma"] + [f"beta{j}" for j in range(self.data.n_features)]

    def start(self) -> np.ndarray:
        return np.zeros(self.dim)

    def logpdf(self, theta, rng=None) -> float:
        h = self.prior.n_hyper
        log_sigma = theta[h]
        beta = theta[h + 1:]
        return (quantile_loglik(beta, log_sigma, self.data, self.delta)
                + log_prior(theta, self.prior, scale_kind="sigma"))


@dataclass
class ProbitReTarget:
    """Probit random-effects posterior with the random effects integrated
    out by importance sampling (pseudo-marginal)."""

    data: Dataset
    prior: PriorSpec
    m_draws: int = 100
    kappa: float = 4.0
    refresh_interval: int = 100
    refresh_by: str = "accepted"   # or "iterations"
    stochastic: bool = field(default=True, init=False)

    def __post_init__(self):
        if self.data.group_index is None:
            raise ValueError("probit RE target needs a group column")
        if self.refresh_by not in ("accepted", "iterations"):
            raise ValueError("refresh_by must be 'accepted' or 'iterations'")
        self.state = initial_importance_state(
            self.data.n_groups, m_draws=self.m_draws, kappa=self.kappa,
            refresh_interval=self.refresh_interval)

    @property
    def dim(self) -> int:
        return self.prior.n_hyper + 1 + self.data.n_features

    @property
    def names(self):
        hyper = ["theta"] if self.prior.n_hyper else []
        return hyper + ["log_sigma_mu2"] + [f"beta{j}" for j in range(self.data.n_features)]

    def start(self) -> np.ndarray:
        return np.zeros(self.dim)

    def split(self, theta):
        h = self.prior.n_hyper
        return theta[h + 1:], theta[h]

    def logpdf(self, theta, rng=None) -> float:
        if rng is None:
            raise ValueError("pseudo-marginal target requires an RNG")
        beta, log_s2 = self.split(theta)
        ll = probit_re_loglik_hat(beta, log_s2, self.data, self.state, rng)
        if not np.isfinite(ll):
            return -np.inf
        return ll + log_prior(theta, self.prior, scale_kind="sigma_mu2")

    def refresh(self, theta_history, rng: np.random.Generator) -> None:
        pairs = [self.split(np.asarray(t, float)) for t in theta_history]
        self.state = refresh_importance(pairs, self.data, self.state, rng)
