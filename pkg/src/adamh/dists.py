"""Dense multivariate normal / Student-t primitives shared by all samplers.

Everything here is pure given its inputs plus an explicitly passed
``numpy.random.Generator``, so independent chains can evaluate and sample
concurrently as long as each one owns its generator.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import betainc, gammaln, ndtri, stdtrit

LOG_2PI = float(np.log(2.0 * np.pi))

_JITTER_TRIES = 3


class FactorizationError(np.linalg.LinAlgError):
    """Covariance could not be factorized even after jitter escalation."""


def _chol_with_jitter(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, repairing near-degenerate matrices.

    Adds 1e-10 * trace/dim to the diagonal on failure and escalates by 10x
    up to three retries.  Adaptive covariances built from histories full of
    rejection duplicates routinely need this.
    """
    d = a.shape[0]
    base = 1e-10 * float(np.trace(a)) / d
    if base <= 0.0 or not np.isfinite(base):
        base = 1e-10
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(d)
    for k in range(_JITTER_TRIES):
        try:
            return np.linalg.cholesky(a + base * 10.0**k * eye)
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError("matrix not positive definite after jitter repair")


@dataclass(frozen=True)
class CovMatrix:
    """Symmetric positive-definite matrix with a cached Cholesky factor."""

    entries: np.ndarray
    chol_lower: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_entries(cls, a) -> "CovMatrix":
        a = np.atleast_2d(np.asarray(a, dtype=float))
        if a.shape[0] != a.shape[1]:
            raise ValueError("covariance must be square")
        scale = max(float(np.max(np.abs(a))), 1.0)
        if np.max(np.abs(a - a.T)) > 1e-12 * scale:
            raise ValueError("covariance not symmetric within tolerance")
        a = 0.5 * (a + a.T)
        return cls(entries=a, chol_lower=_chol_with_jitter(a))

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol_lower))))

    def whiten(self, y: np.ndarray) -> np.ndarray:
        """Solve L w = y for w; accepts a vector or a (n, d) batch."""
        return solve_triangular(self.chol_lower, np.asarray(y, float).T,
                                lower=True, check_finite=False).T

    def scaled(self, factor: float) -> "CovMatrix":
        return CovMatrix(entries=self.entries * factor,
                         chol_lower=self.chol_lower * np.sqrt(factor))


def identity_cov(dim: int) -> CovMatrix:
    eye = np.eye(dim)
    return CovMatrix(entries=eye, chol_lower=eye.copy())


@dataclass(frozen=True)
class MvtParams:
    """Location/scale/degrees-of-freedom triple for a multivariate t."""

    location: np.ndarray
    scale: CovMatrix
    dof: float

    def __post_init__(self):
        if self.dof <= 0:
            raise ValueError("dof must be positive")
        if len(self.location) != self.scale.dim:
            raise ValueError("location length must match scale dimension")


def mvn_logpdf(x, mu, sigma: CovMatrix) -> float:
    """Log density of N(mu, sigma) at x."""
    x = np.asarray(x, float)
    mu = np.asarray(mu, float)
    if x.shape[-1] != sigma.dim or mu.shape[-1] != sigma.dim:
        raise ValueError("dimension mismatch")
    w = sigma.whiten(x - mu)
    maha = np.sum(w * w, axis=-1)
    out = -0.5 * (sigma.dim * LOG_2PI + sigma.logdet() + maha)
    return float(out) if np.ndim(out) == 0 else out


def mvt_logpdf(x, p: MvtParams) -> float:
    """Log density of the multivariate Student t with the standard normalization."""
    x = np.asarray(x, float)
    if x.shape[-1] != p.scale.dim:
        raise ValueError("dimension mismatch")
    d, nu = p.scale.dim, p.dof
    w = p.scale.whiten(x - p.location)
    maha = np.sum(w * w, axis=-1)
    out = (gammaln(0.5 * (nu + d)) - gammaln(0.5 * nu)
           - 0.5 * d * np.log(nu * np.pi) - 0.5 * p.scale.logdet()
           - 0.5 * (nu + d) * np.log1p(maha / nu))
    return float(out) if np.ndim(out) == 0 else out


def mvn_sample(mu, sigma: CovMatrix, rng: np.random.Generator, size: int | None = None):
    mu = np.asarray(mu, float)
    if size is None:
        return mu + sigma.chol_lower @ rng.standard_normal(sigma.dim)
    z = rng.standard_normal((size, sigma.dim))
    return mu + z @ sigma.chol_lower.T


def mvt_sample(p: MvtParams, rng: np.random.Generator, size: int | None = None):
    """Draw from the multivariate t via Gaussian / inverse-chi-square mixing."""
    if size is None:
        g = mvn_sample(np.zeros(p.scale.dim), p.scale, rng)
        w = rng.chisquare(p.dof)
        return p.location + g * np.sqrt(p.dof / w)
    g = mvn_sample(np.zeros(p.scale.dim), p.scale, rng, size=size)
    w = rng.chisquare(p.dof, size=size)
    return p.location + g * np.sqrt(p.dof / w)[:, None]


def t_logpdf_1d(z, nu: float):
    z = np.asarray(z, float)
    out = (gammaln(0.5 * (nu + 1.0)) - gammaln(0.5 * nu)
           - 0.5 * np.log(nu * np.pi) - 0.5 * (nu + 1.0) * np.log1p(z * z / nu))
    return float(out) if np.ndim(out) == 0 else out


def t_pdf_1d(z, nu: float):
    return np.exp(t_logpdf_1d(z, nu))


def t_cdf_1d(z, nu: float):
    """CDF of the standardized Student t via the regularized incomplete beta."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    z = np.asarray(z, float)
    zz = z * z
    tail = 0.5 * betainc(0.5 * nu, 0.5, nu / (nu + zz))
    out = np.where(z > 0, 1.0 - tail, tail)
    out = np.where(z == 0, 0.5, out)
    return float(out) if np.ndim(out) == 0 else out


def t_invcdf_1d(p, nu: float):
    """Quantile of the standardized Student t.

    Starts from the library quantile and polishes with monotone-safeguarded
    Newton on our own CDF (bisection fallback) so that the cdf/invcdf pair
    round-trips; terminates at 1e-14 accuracy in probability.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    p_in = np.asarray(p, float)
    scalar = p_in.ndim == 0
    p = np.atleast_1d(p_in).astype(float)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ValueError("p must lie strictly inside (0, 1)")

    z = np.asarray(stdtrit(nu, p), float).reshape(p.shape)
    width = 1e-6 * (1.0 + np.abs(z))
    lo = z - width
    hi = z + width
    for _ in range(200):
        need = t_cdf_1d(lo, nu) > p
        if not np.any(need):
            break
        width = np.where(need, 2.0 * width, width)
        lo = np.where(need, z - width, lo)
    width = 1e-6 * (1.0 + np.abs(z))
    for _ in range(200):
        need = t_cdf_1d(hi, nu) < p
        if not np.any(need):
            break
        width = np.where(need, 2.0 * width, width)
        hi = np.where(need, z + width, hi)

    # polish only the still-active points; a point retires when its
    # residual drops below tolerance or no representable step remains
    idx = np.arange(p.size)
    for _ in range(100):
        f = t_cdf_1d(z[idx], nu) - p[idx]
        hi[idx] = np.where(f > 0, np.minimum(hi[idx], z[idx]), hi[idx])
        lo[idx] = np.where(f < 0, np.maximum(lo[idx], z[idx]), lo[idx])
        z_new = z[idx] - f / np.maximum(t_pdf_1d(z[idx], nu), 1e-300)
        bad = ~np.isfinite(z_new) | (z_new < lo[idx]) | (z_new > hi[idx])
        z_new = np.where(bad, 0.5 * (lo[idx] + hi[idx]), z_new)
        live = (np.abs(f) >= 1e-14) & (z_new != z[idx])
        z[idx[live]] = z_new[live]
        idx = idx[live]
        if idx.size == 0:
            break
    return float(z[0]) if scalar else z


def inv_gamma_logpdf(v, a: float, b: float):
    """log IG(v; shape a, scale b) = a ln b - ln Gamma(a) - (a+1) ln v - b/v."""
    v = np.asarray(v, float)
    if a <= 0 or b <= 0 or np.any(v <= 0):
        raise ValueError("inverse gamma arguments must be positive")
    out = a * np.log(b) - gammaln(a) - (a + 1.0) * np.log(v) - b / v
    return float(out) if np.ndim(out) == 0 else out
