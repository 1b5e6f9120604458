import numpy as np
import pytest
from scipy import stats
from scipy.special import expit, log_ndtr, roots_hermite

from adamh.dists import inv_gamma_logpdf
from adamh.targets import (BimodalTarget, Dataset, GaussianTarget,
                           ImportanceState, LogisticTarget, PriorSpec,
                           ProbitReTarget, QuantileTarget,
                           bimodal_target_logpdf, initial_importance_state,
                           log_prior, logistic_loglik, probit_re_loglik_hat,
                           quantile_loglik, refresh_importance, rho_delta)


def small_data(rng, n=40, d=3):
    x = np.column_stack([np.ones(n), rng.standard_normal((n, d - 1))])
    y = (rng.random(n) < 0.5).astype(float)
    return Dataset(design=x, response=y)


class TestDataset:
    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            Dataset(design=np.ones((3, 2)), response=np.ones(4))

    def test_group_indices_contiguous(self):
        with pytest.raises(ValueError):
            Dataset(design=np.ones((4, 1)), response=np.ones(4),
                    group_index=[1, 2, 4, 4])
        ds = Dataset(design=np.ones((4, 1)), response=np.ones(4),
                     group_index=[1, 1, 2, 2])
        assert ds.n_groups == 2

    def test_shapes(self):
        ds = Dataset(design=np.ones((5, 3)), response=np.zeros(5))
        assert ds.n_obs == 5 and ds.n_features == 3 and ds.n_groups == 0


class TestPriorSpec:
    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            PriorSpec(kind="cauchy")

    def test_tau_ordering(self):
        with pytest.raises(ValueError):
            PriorSpec(kind="mixture_normals", tau_s2=10.0, tau_l2=1.0)

    def test_hyper_count(self):
        assert PriorSpec(kind="normal").n_hyper == 0
        assert PriorSpec(kind="double_exponential").n_hyper == 1
        assert PriorSpec(kind="mixture_normals").n_hyper == 1


class TestLogPrior:
    def test_normal_prior_term_by_term(self):
        spec = PriorSpec(kind="normal")
        beta = np.array([2.0, -1.0, 0.5])
        expected = (stats.norm(0, 1e3).logpdf(beta[0])
                    + stats.norm(0, 1e3).logpdf(beta[1])
                    + stats.norm(0, 1e3).logpdf(beta[2]))
        assert log_prior(beta, spec) == pytest.approx(expected, abs=1e-10)

    def test_double_exponential_term_by_term(self):
        spec = PriorSpec(kind="double_exponential")
        theta = np.array([0.3, 1.0, -2.0, 0.7])  # [log tau, intercept, b1, b2]
        tau = np.exp(0.3)
        expected = (stats.norm(0, 1e3).logpdf(1.0)
                    + stats.laplace(scale=tau).logpdf(-2.0)
                    + stats.laplace(scale=tau).logpdf(0.7)
                    + inv_gamma_logpdf(tau, 0.01, 0.01) + 0.3)
        assert log_prior(theta, spec) == pytest.approx(expected, abs=1e-10)

    def test_mixture_prior_term_by_term(self):
        spec = PriorSpec(kind="mixture_normals", tau_s2=0.01, tau_l2=1e4)
        theta = np.array([0.5, 0.0, 1.2])  # [logit omega, intercept, b1]
        omega = expit(0.5)
        slab = (omega * stats.norm(0, 0.1).pdf(1.2)
                + (1 - omega) * stats.norm(0, 100.0).pdf(1.2))
        expected = (stats.norm(0, 1e3).logpdf(0.0) + np.log(slab)
                    + np.log(omega) + np.log1p(-omega))
        assert log_prior(theta, spec) == pytest.approx(expected, abs=1e-10)

    def test_scale_jacobian_normalizes(self):
        # the IG prior on a positive scale expressed through its log must
        # still integrate to one over the log-scale axis
        spec = PriorSpec(kind="normal", ig_shape=2.0, ig_scale=3.0)
        grid = np.linspace(-15, 15, 40001)
        base = log_prior(np.array([0.0]), spec)  # intercept-only share
        vals = np.array([log_prior(np.array([t, 0.0]), spec,
                                   scale_kind="sigma") for t in grid])
        dens = np.exp(vals - base)
        assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-3)


class TestLogistic:
    def test_matches_naive_loop(self):
        rng = np.random.default_rng(0)
        data = small_data(rng)
        beta = rng.standard_normal(3)
        naive = 0.0
        for i in range(data.n_obs):
            p = 1.0 / (1.0 + np.exp(-data.design[i] @ beta))
            naive += (np.log(p) if data.response[i] == 1 else np.log1p(-p))
        assert logistic_loglik(beta, data) == pytest.approx(naive, abs=1e-10)

    def test_target_combines_prior(self):
        rng = np.random.default_rng(1)
        data = small_data(rng)
        prior = PriorSpec(kind="normal")
        t = LogisticTarget(data=data, prior=prior)
        beta = rng.standard_normal(3)
        assert t.logpdf(beta) == pytest.approx(
            logistic_loglik(beta, data) + log_prior(beta, prior), abs=1e-12)
        assert t.dim == 3 and t.names == ["beta0", "beta1", "beta2"]


class TestQuantile:
    def test_rho_delta_values(self):
        assert rho_delta(1.0, 0.5) == 0.5
        assert rho_delta(-1.0, 0.5) == 0.5
        assert rho_delta(1.0, 0.1) == pytest.approx(0.1)
        assert rho_delta(-1.0, 0.1) == pytest.approx(0.9)
        with pytest.raises(ValueError):
            rho_delta(1.0, 0.0)

    def test_loglik_matches_naive(self):
        rng = np.random.default_rng(2)
        n, delta, log_sigma = 25, 0.3, 0.4
        x = rng.standard_normal((n, 2))
        y = rng.standard_normal(n)
        data = Dataset(design=x, response=y)
        beta = np.array([0.5, -1.0])
        sigma = np.exp(log_sigma)
        naive = n * np.log(delta * (1 - delta)) - n * log_sigma
        for i in range(n):
            u = (y[i] - x[i] @ beta) / sigma
            naive -= delta * u if u >= 0 else (delta - 1) * u
        assert quantile_loglik(beta, log_sigma, data, delta) == pytest.approx(
            naive, abs=1e-12)

    def test_asymmetric_laplace_normalizes(self):
        # exp(loglik) for one observation is the asymmetric Laplace density
        delta, sigma = 0.2, 1.5
        data = Dataset(design=np.array([[0.0]]), response=np.array([0.0]))
        ys = np.linspace(-60, 60, 100001)
        dens = [np.exp(quantile_loglik(np.zeros(1), np.log(sigma),
                                       Dataset(design=np.array([[0.0]]),
                                               response=np.array([y])), delta))
                for y in ys]
        assert np.trapezoid(dens, ys) == pytest.approx(1.0, abs=1e-3)


def gauss_hermite_group_loglik(y, x_rows, beta, sigma_mu2, nodes=64):
    """Marginal probit group likelihood by Gauss-Hermite quadrature."""
    t, w = roots_hermite(nodes)
    mu = np.sqrt(2.0 * sigma_mu2) * t
    eta = mu[:, None] + x_rows @ beta
    sign = 2.0 * y - 1.0
    ll = np.sum(log_ndtr(sign * eta), axis=1)
    return np.log(np.sum(w * np.exp(ll)) / np.sqrt(np.pi))


class TestProbitRe:
    def make_group(self, seed=0, j=4):
        rng = np.random.default_rng(seed)
        x = np.column_stack([np.ones(j), rng.standard_normal((j, 1))])
        y = (rng.random(j) < 0.5).astype(float)
        return Dataset(design=x, response=y, group_index=np.ones(j, int))

    def test_importance_matches_quadrature(self):
        data = self.make_group()
        beta = np.array([0.3, -0.6])
        sigma_mu2 = 1.2
        st = ImportanceState(mean=np.zeros(1), var=np.array([1.5 / 4.0]),
                             kappa=4.0, m_draws=10_000)
        est = probit_re_loglik_hat(beta, np.log(sigma_mu2), data, st,
                                   np.random.default_rng(3))
        oracle = gauss_hermite_group_loglik(data.response, data.design, beta,
                                            sigma_mu2)
        assert est == pytest.approx(oracle, rel=0.01)

    def test_initial_state_is_unit_normal_scaled(self):
        st = initial_importance_state(3)
        # effective density is N(0, 1.5)
        assert np.allclose(st.kappa * st.var, 1.5)
        assert np.allclose(st.mean, 0.0)
        assert st.m_draws == 100 and st.refresh_interval == 100

    def test_state_validation(self):
        with pytest.raises(ValueError):
            ImportanceState(mean=np.zeros(1), var=np.array([0.0]))
        with pytest.raises(ValueError):
            ImportanceState(mean=np.zeros(1), var=np.ones(1), kappa=0.5)

    def test_refresh_moves_toward_posterior(self):
        rng = np.random.default_rng(4)
        j = 30
        x = np.column_stack([np.ones(j)])
        y = np.ones(j)  # all successes pull mu_i upward
        data = Dataset(design=x, response=y, group_index=np.ones(j, int))
        st = initial_importance_state(1, m_draws=5000)
        new = refresh_importance([(np.zeros(1), 0.0)], data, st, rng)
        assert new.mean[0] > 0.5
        assert new.var[0] >= 1e-6
        assert new.kappa == st.kappa

    def test_target_requires_groups(self):
        rng = np.random.default_rng(5)
        with pytest.raises(ValueError):
            ProbitReTarget(data=small_data(rng), prior=PriorSpec(kind="normal"))

    def test_target_requires_rng(self):
        data = self.make_group()
        t = ProbitReTarget(data=data, prior=PriorSpec(kind="normal"))
        with pytest.raises(ValueError):
            t.logpdf(np.zeros(t.dim))

    def test_target_layout(self):
        data = self.make_group()
        t = ProbitReTarget(data=data, prior=PriorSpec(kind="normal"))
        assert t.dim == 3
        assert t.names == ["log_sigma_mu2", "beta0", "beta1"]
        assert t.stochastic


class TestBimodal:
    def test_symmetry(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            x = rng.standard_normal(5) * 3
            assert bimodal_target_logpdf(x) == pytest.approx(
                bimodal_target_logpdf(-x), abs=1e-12)

    def test_univariate_normalization(self):
        xs = np.linspace(-20, 20, 100001)
        dens = [np.exp(bimodal_target_logpdf(np.array([x]))) for x in xs]
        assert np.trapezoid(dens, xs) == pytest.approx(1.0, abs=1e-6)

    def test_matches_mixture_density(self):
        x = np.array([1.0, -2.0])
        expected = np.log(
            0.5 * stats.multivariate_normal(mean=[-3, -3]).pdf(x)
            + 0.5 * stats.multivariate_normal(mean=[3, 3]).pdf(x))
        assert bimodal_target_logpdf(x) == pytest.approx(expected, abs=1e-10)

    def test_target_object(self):
        t = BimodalTarget(dim=3, mode=2.0)
        assert np.allclose(t.start(), -2.0)
        assert t.logpdf(t.start()) == pytest.approx(
            bimodal_target_logpdf(np.full(3, -2.0), 2.0))


class TestGaussianTarget:
    def test_accepts_plain_arrays(self):
        t = GaussianTarget(np.zeros(2), np.eye(2))
        assert t.logpdf(np.zeros(2)) == pytest.approx(-np.log(2 * np.pi))
