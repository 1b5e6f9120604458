"""t-copula distribution with mixture-of-normals marginals.

The model joins arbitrary univariate marginals through the dependence
structure of a multivariate t with unit-diagonal scale matrix.  Degrees of
freedom are chosen on a fixed grid by profile likelihood, holding the
marginals and the scale matrix fixed at the incumbent transform.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .dists import (LOG_2PI, CovMatrix, MvtParams, mvn_logpdf, mvn_sample,
                    mvt_logpdf, mvt_sample, t_cdf_1d, t_invcdf_1d, t_logpdf_1d)
from .mixfit import MixtureOfNormals, fit_marginal

NU_GRID = (3.0, 5.0, 10.0, 1000.0)

GAUSS_DOF = 1000.0  # the top grid point is the exact Gaussian copula

TAIL_CLAMP = 1e-12


def _score_cdf(z, nu):
    return ndtr(z) if nu >= GAUSS_DOF else t_cdf_1d(z, nu)


def _score_invcdf(p, nu):
    return ndtri(p) if nu >= GAUSS_DOF else t_invcdf_1d(p, nu)


def _score_logpdf(z, nu):
    if nu >= GAUSS_DOF:
        z = np.asarray(z, float)
        return -0.5 * (LOG_2PI + z * z)
    return t_logpdf_1d(z, nu)


def _joint_logpdf(z, corr: CovMatrix, nu: float):
    if nu >= GAUSS_DOF:
        return mvn_logpdf(z, np.zeros(corr.dim), corr)
    return mvt_logpdf(z, MvtParams(location=np.zeros(corr.dim),
                                   scale=corr, dof=nu))


def sample_scores(model: "TCopulaModel", rng: np.random.Generator,
                  size: int | None = None):
    """Draw z from the copula's joint score distribution."""
    if model.dof >= GAUSS_DOF:
        return mvn_sample(np.zeros(model.dim), model.corr, rng, size=size)
    p = MvtParams(location=np.zeros(model.dim), scale=model.corr,
                  dof=model.dof)
    return mvt_sample(p, rng, size=size)


@dataclass
class TCopulaModel:
    marginals: list[MixtureOfNormals]
    corr: CovMatrix
    dof: float

    def __post_init__(self):
        if self.dof not in NU_GRID:
            raise ValueError(f"dof must lie on the grid {NU_GRID}")
        if len(self.marginals) != self.corr.dim:
            raise ValueError("one marginal per dimension required")

    @property
    def dim(self) -> int:
        return self.corr.dim


def marginal_cdf(x, m: MixtureOfNormals):
    return m.cdf(x)


def marginal_invcdf(p, m: MixtureOfNormals):
    """Inverse mixture CDF by safeguarded Newton with bisection fallback.

    Bracket starts at the mixture mean +/- 8 overall standard deviations
    and doubles until it contains the root; tolerance 1e-14 in probability.
    """
    p_in = np.asarray(p, float)
    scalar = p_in.ndim == 0
    p = np.atleast_1d(p_in).astype(float)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ValueError("p must lie strictly inside (0, 1)")

    mu = float(m.mean()[0])
    sd = max(float(np.sqrt(m.overall_cov()[0, 0])), 1e-6)
    half = 8.0 * sd
    lo = np.full_like(p, mu - half)
    hi = np.full_like(p, mu + half)
    for _ in range(200):
        need = m.cdf(lo) > p
        if not np.any(need):
            break
        lo = np.where(need, mu - (mu - lo) * 2.0, lo)
    for _ in range(200):
        need = m.cdf(hi) < p
        if not np.any(need):
            break
        hi = np.where(need, mu + (hi - mu) * 2.0, hi)

    x = np.clip(mu + sd * ndtri(p), lo, hi)
    # polish only the still-active points; a point retires when its
    # residual drops below tolerance or no representable step remains
    idx = np.arange(p.size)
    for _ in range(100):
        f = m.cdf(x[idx]) - p[idx]
        hi[idx] = np.where(f > 0, np.minimum(hi[idx], x[idx]), hi[idx])
        lo[idx] = np.where(f < 0, np.maximum(lo[idx], x[idx]), lo[idx])
        x_new = x[idx] - f / np.maximum(m.pdf(x[idx]), 1e-300)
        bad = ~np.isfinite(x_new) | (x_new < lo[idx]) | (x_new > hi[idx])
        x_new = np.where(bad, 0.5 * (lo[idx] + hi[idx]), x_new)
        live = (np.abs(f) >= 1e-14) & (x_new != x[idx])
        x[idx[live]] = x_new[live]
        idx = idx[live]
        if idx.size == 0:
            break
    return float(x[0]) if scalar else x


def to_z(x, model: TCopulaModel):
    """Map data space to copula space: z_j = T^-1_nu(F_j(x_j)).

    Probabilities are clamped to [1e-12, 1-1e-12] so chain outliers in
    zero-density regions stay finite.
    """
    x = np.asarray(x, float)
    scalar = x.ndim == 1
    pts = np.atleast_2d(x)
    z = np.empty_like(pts)
    for j, m in enumerate(model.marginals):
        p = np.clip(m.cdf(pts[:, j]), TAIL_CLAMP, 1.0 - TAIL_CLAMP)
        z[:, j] = _score_invcdf(p, model.dof)
    return z[0] if scalar else z


def to_x(z, model: TCopulaModel):
    """Inverse of :func:`to_z` (Newton root finding on each marginal CDF)."""
    z = np.asarray(z, float)
    scalar = z.ndim == 1
    pts = np.atleast_2d(z)
    x = np.empty_like(pts)
    for j, m in enumerate(model.marginals):
        p = np.clip(_score_cdf(pts[:, j], model.dof), TAIL_CLAMP, 1.0 - TAIL_CLAMP)
        x[:, j] = marginal_invcdf(p, m)
    return x[0] if scalar else x


def copula_logpdf(x, model: TCopulaModel):
    """Log density: joint t at z minus univariate t terms plus marginal terms."""
    x = np.asarray(x, float)
    scalar = x.ndim == 1
    pts = np.atleast_2d(x)
    z = np.atleast_2d(to_z(pts, model))
    out = np.asarray(_joint_logpdf(z, model.corr, model.dof), float).copy()
    for j, m in enumerate(model.marginals):
        out -= _score_logpdf(z[:, j], model.dof)
        out += np.log(np.maximum(m.pdf(pts[:, j]), 1e-300))
    return float(out[0]) if scalar else out


def _profile_loglik(probs: np.ndarray, corr: CovMatrix, nu: float) -> float:
    """Copula log likelihood at dof nu for fixed marginal probabilities.

    The scores z are recomputed for each candidate nu; evaluating the
    density ratio at scores from a different dof systematically favors
    heavy tails, so the recomputation is required for the grid search to
    pick the true dof.
    """
    z = np.column_stack([_score_invcdf(probs[:, j], nu)
                         for j in range(probs.shape[1])])
    ll = np.sum(_joint_logpdf(z, corr, nu))
    for j in range(corr.dim):
        ll -= np.sum(_score_logpdf(z[:, j], nu))
    return float(ll)


def fit_t_copula(points, rng: np.random.Generator,
                 incumbent_nu: float = 1000.0) -> TCopulaModel:
    """Fit marginals, scale matrix and degrees of freedom from draws.

    The transform to z uses the incumbent degrees of freedom (1000 on the
    first fit); the scale matrix is the sample correlation of the z's and
    the new dof maximizes the profile likelihood over the fixed grid with
    marginals and scale held fixed.
    """
    pts = np.atleast_2d(np.asarray(points, float))
    n, d = pts.shape
    if n < 10 * d:
        raise ValueError("need at least 10 points per dimension")
    marginals = [fit_marginal(pts[:, j], rng) for j in range(d)]

    probs = np.empty_like(pts)
    z = np.empty_like(pts)
    for j, m in enumerate(marginals):
        probs[:, j] = np.clip(m.cdf(pts[:, j]), TAIL_CLAMP, 1.0 - TAIL_CLAMP)
        z[:, j] = _score_invcdf(probs[:, j], incumbent_nu)

    c = np.corrcoef(z, rowvar=False)
    c = np.atleast_2d(c)
    # product-moment estimate projected back to an exact unit diagonal
    dd = np.sqrt(np.diag(c))
    c = c / np.outer(dd, dd)
    np.fill_diagonal(c, 1.0)
    corr = CovMatrix.from_entries(0.5 * (c + c.T))

    best = max(NU_GRID, key=lambda nu: _profile_loglik(probs, corr, nu))
    return TCopulaModel(marginals=marginals, corr=corr, dof=float(best))


def copula_sample(model: TCopulaModel, rng: np.random.Generator,
                  size: int | None = None):
    return to_x(sample_scores(model, rng, size=size), model)
