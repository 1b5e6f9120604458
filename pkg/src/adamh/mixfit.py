"""Mixture-of-normals fitting from chain iterates.

Clustering uses k-harmonic means (squared-distance form), which tolerates
the duplicated points that Metropolis rejections leave in a chain history.
A Jarque-Bera gate decides whether a univariate marginal gets a single
normal or a small mixture.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, ndtr, ndtri

from .dists import LOG_2PI, CovMatrix, mvn_sample

JB_CRITICAL_5PCT = 5.991  # chi-square(2) upper 5% point

_COV_FLOOR = 1e-8


@dataclass
class MixtureOfNormals:
    """Finite mixture of Gaussians; weights sum to one, all covariances PD."""

    weights: np.ndarray
    means: np.ndarray  # (k, d)
    covs: list[CovMatrix]
    _scaled_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, float)
        self.means = np.atleast_2d(np.asarray(self.means, float))
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        if np.any(self.weights < 1e-8):
            raise ValueError("weights below floor")
        if len(self.covs) != len(self.weights) or self.means.shape[0] != len(self.weights):
            raise ValueError("component count mismatch")

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def logpdf(self, x):
        x = np.asarray(x, float)
        scalar = x.ndim <= 1
        pts = np.atleast_2d(x)
        comp = np.empty((pts.shape[0], self.n_components))
        for c, cov in enumerate(self.covs):
            w = cov.whiten(pts - self.means[c])
            comp[:, c] = -0.5 * (self.dim * LOG_2PI + cov.logdet()
                                 + np.sum(w * w, axis=1))
        out = logsumexp(comp + np.log(self.weights), axis=1)
        return float(out[0]) if scalar else out

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if size is None:
            c = rng.choice(self.n_components, p=self.weights)
            return mvn_sample(self.means[c], self.covs[c], rng)
        cs = rng.choice(self.n_components, size=size, p=self.weights)
        out = np.empty((size, self.dim))
        for c in range(self.n_components):
            idx = np.flatnonzero(cs == c)
            if idx.size:
                out[idx] = mvn_sample(self.means[c], self.covs[c], rng, size=idx.size)
        return out

    def scaled_covs(self, factor: float) -> "MixtureOfNormals":
        """Same weights/means, covariances multiplied by ``factor``."""
        key = float(factor)
        if key not in self._scaled_cache:
            self._scaled_cache[key] = MixtureOfNormals(
                weights=self.weights.copy(), means=self.means.copy(),
                covs=[c.scaled(factor) for c in self.covs])
        return self._scaled_cache[key]

    # univariate helpers (marginal models for the copula)
    def cdf(self, x):
        if self.dim != 1:
            raise ValueError("cdf defined for univariate mixtures only")
        x = np.asarray(x, float)
        sds = np.array([np.sqrt(c.entries[0, 0]) for c in self.covs])
        z = (x[..., None] - self.means[:, 0]) / sds
        out = np.sum(self.weights * ndtr(z), axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    def pdf(self, x):
        if self.dim != 1:
            raise ValueError("pdf defined for univariate mixtures only")
        x = np.asarray(x, float)
        var = np.array([c.entries[0, 0] for c in self.covs])
        z2 = (x[..., None] - self.means[:, 0]) ** 2 / var
        dens = np.exp(-0.5 * z2) / np.sqrt(2.0 * np.pi * var)
        out = np.sum(self.weights * dens, axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def overall_cov(self) -> np.ndarray:
        mu = self.mean()
        out = np.zeros((self.dim, self.dim))
        for c in range(self.n_components):
            dm = self.means[c] - mu
            out += self.weights[c] * (self.covs[c].entries + np.outer(dm, dm))
        return out


def jarque_bera_gate(samples) -> tuple[float, bool]:
    """JB = n/6 (S^2 + (K-3)^2/4); normal iff below the chi-square(2) 5% point."""
    x = np.asarray(samples, float).ravel()
    n = x.size
    if n < 8:
        raise ValueError("need at least 8 samples")
    xc = x - x.mean()
    m2 = np.mean(xc ** 2)
    if m2 <= 0:
        return 0.0, True
    s = np.mean(xc ** 3) / m2 ** 1.5
    k = np.mean(xc ** 4) / m2 ** 2
    jb = n / 6.0 * (s ** 2 + 0.25 * (k - 3.0) ** 2)
    return float(jb), bool(jb < JB_CRITICAL_5PCT)


def khm_objective(points: np.ndarray, centers: np.ndarray) -> float:
    d2 = _sq_dists(points, centers)
    return float(np.sum(centers.shape[0] / np.sum(1.0 / d2, axis=1)))


def _sq_dists(points, centers):
    diff = points[:, None, :] - centers[None, :, :]
    return np.maximum(np.sum(diff * diff, axis=2), 1e-12)


def khm_cluster(points, k: int, rng: np.random.Generator,
                max_iter: int = 100, tol: float = 1e-8):
    """k-harmonic-means clustering (power 2) via weighted recentering.

    Returns the final centers and the soft membership matrix. Initial
    centers are k distinct points drawn without replacement, so results
    are deterministic under a seeded generator.
    """
    pts = np.asarray(points, float)
    if pts.ndim == 1:
        pts = pts[:, None]
    uniq = np.unique(pts, axis=0)
    if k > uniq.shape[0]:
        raise ValueError("k exceeds number of distinct points")
    centers = uniq[rng.choice(uniq.shape[0], size=k, replace=False)].copy()

    u = np.full((pts.shape[0], k), 1.0 / k)
    for _ in range(max_iter):
        d2 = _sq_dists(pts, centers)
        q = 1.0 / d2                      # d^-2
        q2 = q * q                        # d^-4
        u = q2 / np.sum(q2, axis=1, keepdims=True)
        coef = q2 / np.sum(q, axis=1, keepdims=True) ** 2
        mass = coef.sum(axis=0)
        new_centers = centers.copy()
        ok = mass > 0
        new_centers[ok] = (coef.T @ pts)[ok] / mass[ok, None]
        move = np.max(np.abs(new_centers - centers))
        centers = new_centers
        if move < tol:
            break
    return centers, u


def nc_schedule(accepted: int, dim: int) -> int:
    """Component count for the adapted mixture term, keyed on accepted/dim."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    ratio = accepted / dim
    if ratio < 40:
        return 1
    if ratio < 100:
        return 2
    if ratio < 200:
        return 3
    return 4


def _weighted_component(pts, w):
    mass = w.sum()
    mu = (w @ pts) / mass
    diff = pts - mu
    cov = (diff * w[:, None]).T @ diff / mass
    cov = 0.5 * (cov + cov.T) + _COV_FLOOR * np.eye(pts.shape[1])
    return mu, CovMatrix.from_entries(cov)


def fit_mixture(points, nc: int, rng: np.random.Generator) -> MixtureOfNormals:
    """Fit an nc-component mixture by KHM memberships + weighted moments.

    Components whose weight falls below max(1e-3, 2 dim / n) are dropped
    and the remaining weights renormalized; covariances carry a 1e-8
    diagonal floor so rejection-duplicate clusters stay PD.
    """
    pts = np.asarray(points, float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n, d = pts.shape
    if n < 2:
        raise ValueError("need at least two points to fit a mixture")
    nc = max(1, min(nc, np.unique(pts, axis=0).shape[0]))

    if nc == 1:
        mu, cov = _weighted_component(pts, np.ones(n))
        return MixtureOfNormals(weights=np.array([1.0]), means=mu[None, :], covs=[cov])

    _, u = khm_cluster(pts, nc, rng)
    floor = max(1e-3, 2.0 * d / n)
    weights, means, covs = [], [], []
    wts = u.mean(axis=0)
    keep = np.flatnonzero(wts >= floor)
    if keep.size == 0:
        keep = np.array([int(np.argmax(wts))])
    for c in keep:
        mu, cov = _weighted_component(pts, u[:, c])
        weights.append(wts[c])
        means.append(mu)
        covs.append(cov)
    weights = np.asarray(weights)
    weights = weights / weights.sum()
    return MixtureOfNormals(weights=weights, means=np.asarray(means), covs=covs)


def fit_marginal(samples, rng: np.random.Generator) -> MixtureOfNormals:
    """Univariate marginal fit with the normality gate.

    A single normal when Jarque-Bera does not reject; otherwise the
    smallest mixture (2..4 components) whose PIT residuals pass the gate,
    capped at four components.
    """
    x = np.asarray(samples, float).ravel()
    if x.size < 8:
        raise ValueError("need at least 8 samples")
    if np.ptp(x) == 0.0:
        cov = CovMatrix.from_entries([[_COV_FLOOR]])
        return MixtureOfNormals(weights=np.array([1.0]),
                                means=np.array([[x[0]]]), covs=[cov])
    _, is_normal = jarque_bera_gate(x)
    if is_normal:
        var = max(float(np.var(x, ddof=1)), _COV_FLOOR)
        return MixtureOfNormals(weights=np.array([1.0]),
                                means=np.array([[x.mean()]]),
                                covs=[CovMatrix.from_entries([[var]])])
    for k in range(2, 5):
        fit = fit_mixture(x[:, None], k, rng)
        u = np.clip(fit.cdf(x), 1e-12, 1.0 - 1e-12)
        _, ok = jarque_bera_gate(ndtri(u))
        if ok or k == 4:
            return fit
    raise AssertionError("unreachable")
