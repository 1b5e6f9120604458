"""The five proposal schemes and their adaptive state.

Random walks carry streaming moments of past iterates; the independence
samplers carry a fitted mixture of normals or a t-copula / multivariate-t
mixture, refit at engine-designated schedule points.  Each state object is
owned by exactly one chain.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .copula import (TCopulaModel, copula_logpdf, fit_t_copula,
                     sample_scores, to_x)
from .dists import (CovMatrix, MvtParams, _chol_with_jitter, identity_cov,
                    mvn_sample, mvt_logpdf, mvt_sample)
from .mixfit import MixtureOfNormals, fit_mixture, nc_schedule

LOG_TCT_COPULA_W = np.log(0.7)
LOG_TCT_MVT_W = np.log(0.3)


# --- adaptive random walk ----------------------------------------------------

@dataclass
class RwState:
    dim: int
    n0: int
    sigma1: CovMatrix
    kappa1: float
    kappa2: float
    kappa3: float
    three_component: bool
    count: int = 0
    mean: np.ndarray = None
    m2: np.ndarray = None
    _chol_cache: tuple = field(default=None, repr=False)

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.dim)
        if self.m2 is None:
            self.m2 = np.zeros((self.dim, self.dim))

    def running_cov(self) -> np.ndarray:
        if self.count < 2:
            raise ValueError("need at least two iterates")
        return self.m2 / (self.count - 1)

    def running_chol(self) -> np.ndarray:
        if self._chol_cache is None or self._chol_cache[0] != self.count:
            self._chol_cache = (self.count, _chol_with_jitter(self.running_cov()))
        return self._chol_cache[1]


def make_rw_state(dim: int, three_component: bool, n0: int | None = None,
                  kappa3: float = 25.0, sigma1: CovMatrix | None = None) -> RwState:
    return RwState(dim=dim,
                   n0=200 * dim if n0 is None else n0,
                   sigma1=sigma1 if sigma1 is not None else identity_cov(dim),
                   kappa1=0.1 ** 2 / dim,
                   kappa2=2.38 ** 2 / dim,
                   kappa3=kappa3,
                   three_component=three_component)


def rw_weights(st: RwState, n: int) -> np.ndarray:
    """Component probabilities at iteration n (sum to 1 by construction)."""
    if n <= st.n0 or st.count < 2:
        return np.array([1.0])
    if st.three_component:
        return np.array([0.05, 0.90, 0.05])
    return np.array([0.05, 0.95])


def rw_propose(x, st: RwState, n: int, rng: np.random.Generator) -> np.ndarray:
    w = rw_weights(st, n)
    c = 0 if w.size == 1 else rng.choice(w.size, p=w)
    if c == 0:
        step = st.sigma1.chol_lower @ rng.standard_normal(st.dim) * np.sqrt(st.kappa1)
    else:
        kappa = st.kappa2 if c == 1 else st.kappa3
        step = st.running_chol() @ rng.standard_normal(st.dim) * np.sqrt(kappa)
    return np.asarray(x, float) + step


def rw_accept_ratio(x, z, target, rng=None) -> float:
    """Symmetric-proposal acceptance probability min(1, pi(z)/pi(x))."""
    lx = target.logpdf(np.asarray(x, float), rng)
    lz = target.logpdf(np.asarray(z, float), rng)
    if not np.isfinite(lz):
        return 0.0
    return float(min(1.0, np.exp(min(lz - lx, 0.0))))


def update_running_moments(st: RwState, x_new) -> RwState:
    """Streaming (Welford) update; matches batch moments to 1e-10."""
    x = np.asarray(x_new, float)
    st.count += 1
    delta = x - st.mean
    st.mean = st.mean + delta / st.count
    st.m2 = st.m2 + np.outer(delta, x - st.mean)
    return st


# --- independence MH, four-term mixture-of-normals proposal -------------------

WEIGHTS_BEFORE_G3 = np.array([0.8, 0.2])
WEIGHTS_WITH_G3 = np.array([0.15, 0.05, 0.7, 0.1])


@dataclass
class ImhMnState:
    stage: int
    g1: MixtureOfNormals
    g3: MixtureOfNormals | None = None

    def terms(self):
        """Active (weight, mixture) pairs; g2/g4 are scaled views of g1/g3."""
        if self.g3 is None:
            w = WEIGHTS_BEFORE_G3
            return [(w[0], self.g1), (w[1], self.g1.scaled_covs(10.0))]
        w = WEIGHTS_WITH_G3
        return [(w[0], self.g1), (w[1], self.g1.scaled_covs(10.0)),
                (w[2], self.g3), (w[3], self.g3.scaled_covs(20.0))]


def imh_mn_logpdf(x, st: ImhMnState):
    terms = st.terms()
    x = np.asarray(x, float)
    parts = np.stack([np.log(w) + np.atleast_1d(g.logpdf(x)) for w, g in terms])
    out = np.logaddexp.reduce(parts, axis=0)
    return float(out[0]) if x.ndim == 1 else out


def imh_mn_propose(st: ImhMnState, rng: np.random.Generator) -> np.ndarray:
    terms = st.terms()
    w = np.array([t[0] for t in terms])
    c = rng.choice(len(terms), p=w)
    return terms[c][1].sample(rng)


def imh_mn_adapt(st: ImhMnState, history, accepted_count: int,
                 rng: np.random.Generator) -> bool:
    """Refit the adapted term; keeps the previous fit on failure."""
    pts = np.atleast_2d(np.asarray(history, float))
    nc = nc_schedule(accepted_count, pts.shape[1])
    try:
        st.g3 = fit_mixture(pts, nc, rng)
        return True
    except (ValueError, np.linalg.LinAlgError):
        return False


def imh_mn_stage_transition(st: ImhMnState) -> None:
    """Stage 2 freezes the current adapted estimate as the base term."""
    if st.g3 is not None:
        st.g1 = st.g3
    st.stage = 2


# --- independence MH, t-copula + multivariate-t mixture -----------------------

@dataclass
class ImhTctState:
    copula: TCopulaModel
    mvt: MvtParams           # dof fixed at 5
    antithetic: bool = False
    pending_reflect: bool = False

    def __post_init__(self):
        if self.mvt.dof != 5.0:
            raise ValueError("the heavy-tailed mixture component has dof 5")


def make_tct_state(history, rng: np.random.Generator,
                   antithetic: bool = False,
                   incumbent_nu: float = 1000.0) -> ImhTctState:
    pts = np.atleast_2d(np.asarray(history, float))
    cop = fit_t_copula(pts, rng, incumbent_nu=incumbent_nu)
    mvt = MvtParams(location=pts.mean(axis=0),
                    scale=CovMatrix.from_entries(_moment_cov(pts)),
                    dof=5.0)
    return ImhTctState(copula=cop, mvt=mvt, antithetic=antithetic)


def _moment_cov(pts: np.ndarray) -> np.ndarray:
    cov = np.cov(pts, rowvar=False)
    cov = np.atleast_2d(cov)
    return 0.5 * (cov + cov.T) + 1e-8 * np.eye(pts.shape[1])


def imh_tct_logpdf(x, st: ImhTctState):
    x = np.asarray(x, float)
    a = LOG_TCT_COPULA_W + np.atleast_1d(copula_logpdf(x, st.copula))
    b = LOG_TCT_MVT_W + np.atleast_1d(mvt_logpdf(x, st.mvt))
    out = np.logaddexp(a, b)
    return float(out[0]) if x.ndim == 1 else out


def antithetic_mate(x_or_z, component: str, st: ImhTctState) -> np.ndarray:
    """Negatively coupled partner: -x for copula draws, 2 mu - z for mvt draws."""
    v = np.asarray(x_or_z, float)
    if component == "copula":
        return -v
    if component == "mvt":
        return 2.0 * st.mvt.location - v
    raise ValueError("component must be 'copula' or 'mvt'")


def imh_tct_propose(x_current, st: ImhTctState, rng: np.random.Generator):
    """Returns (proposal, logq); logq is None for a deterministic mate step.

    With antithetics on, fresh draws alternate with mate steps.  A mate is
    the negatively coupled partner of the chain state (which equals the
    mate of the previous draw whenever that draw was accepted) and is an
    involution of the state, so its acceptance ratio is pi(mate)/pi(x)
    with no proposal-density correction.  The pair counts as two
    iterations.
    """
    if st.antithetic and st.pending_reflect:
        st.pending_reflect = False
        comp = "copula" if rng.random() < 0.7 else "mvt"
        return antithetic_mate(x_current, comp, st), None
    if st.antithetic:
        st.pending_reflect = True
    if rng.random() < 0.7:
        x = to_x(sample_scores(st.copula, rng), st.copula)
    else:
        x = mvt_sample(st.mvt, rng)
    return x, float(imh_tct_logpdf(x, st))


def imh_tct_adapt(st: ImhTctState, history, rng: np.random.Generator) -> bool:
    """Refit copula (carrying the incumbent dof) and the mvt moments."""
    pts = np.atleast_2d(np.asarray(history, float))
    try:
        cop = fit_t_copula(pts, rng, incumbent_nu=st.copula.dof)
        mvt = MvtParams(location=pts.mean(axis=0),
                        scale=CovMatrix.from_entries(_moment_cov(pts)),
                        dof=5.0)
    except (ValueError, np.linalg.LinAlgError):
        return False
    st.copula = cop
    st.mvt = mvt
    return True
