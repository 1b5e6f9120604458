import numpy as np
import pytest

from adamh.copula import TCopulaModel
from adamh.dists import CovMatrix, MvtParams, identity_cov
from adamh.mixfit import MixtureOfNormals, fit_mixture
from adamh.proposals import (WEIGHTS_BEFORE_G3, WEIGHTS_WITH_G3, ImhMnState,
                             ImhTctState, antithetic_mate, imh_mn_adapt,
                             imh_mn_logpdf, imh_mn_propose,
                             imh_mn_stage_transition, imh_tct_logpdf,
                             imh_tct_propose, make_rw_state, make_tct_state,
                             rw_accept_ratio, rw_propose, rw_weights,
                             update_running_moments)
from adamh.targets import GaussianTarget


def normal_marginal(mu=0.0, var=1.0):
    return MixtureOfNormals(weights=np.array([1.0]),
                            means=np.array([[mu]]),
                            covs=[CovMatrix.from_entries([[var]])])


def quad_2d(logpdf, lim=20.0, n=401):
    g = np.linspace(-lim, lim, n)
    xx, yy = np.meshgrid(g, g)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    h = g[1] - g[0]
    return float(np.sum(np.exp(logpdf(pts))) * h * h)


class TestRandomWalk:
    def test_scale_constants(self):
        st = make_rw_state(5, three_component=True)
        assert st.kappa1 == pytest.approx(0.1 ** 2 / 5)
        assert st.kappa2 == pytest.approx(2.38 ** 2 / 5)
        assert st.kappa3 == 25.0
        assert st.n0 == 1000  # 200 per dimension by default

    def test_kappa3_override(self):
        st = make_rw_state(5, three_component=True, kappa3=16.0)
        assert st.kappa3 == 16.0

    def test_weights_initial_phase(self):
        st = make_rw_state(2, three_component=True, n0=50)
        assert np.array_equal(rw_weights(st, 10), [1.0])

    def test_weights_after_n0(self):
        st2 = make_rw_state(2, three_component=False, n0=5)
        st3 = make_rw_state(2, three_component=True, n0=5)
        for st in (st2, st3):
            for x in np.random.default_rng(0).standard_normal((3, 2)):
                update_running_moments(st, x)
        assert np.allclose(rw_weights(st2, 6), [0.05, 0.95])
        assert np.allclose(rw_weights(st3, 6), [0.05, 0.90, 0.05])
        assert rw_weights(st2, 6).sum() == pytest.approx(1.0)
        assert rw_weights(st3, 6).sum() == pytest.approx(1.0)

    def test_streaming_matches_batch(self):
        rng = np.random.default_rng(1)
        xs = rng.standard_normal((500, 3)) * np.array([1.0, 2.0, 0.5]) + 3.0
        st = make_rw_state(3, three_component=False)
        for x in xs:
            update_running_moments(st, x)
        assert np.allclose(st.mean, xs.mean(axis=0), atol=1e-10)
        assert np.allclose(st.running_cov(), np.cov(xs, rowvar=False),
                           atol=1e-10)

    def test_running_cov_needs_two(self):
        st = make_rw_state(2, three_component=False)
        update_running_moments(st, np.zeros(2))
        with pytest.raises(ValueError):
            st.running_cov()

    def test_propose_moves_from_current_point(self):
        st = make_rw_state(2, three_component=False, n0=10)
        rng = np.random.default_rng(2)
        x = np.array([5.0, -5.0])
        zs = np.array([rw_propose(x, st, 1, rng) for _ in range(500)])
        # initial phase: steps are N(0, 0.005 I)
        assert np.allclose(zs.mean(axis=0), x, atol=0.02)
        assert np.allclose(zs.std(axis=0), np.sqrt(0.1 ** 2 / 2), atol=0.01)

    def test_accept_ratio_symmetric_form(self):
        target = GaussianTarget(np.zeros(2), np.eye(2))
        x, z = np.zeros(2), np.array([1.0, 1.0])
        downhill = rw_accept_ratio(x, z, target)
        assert downhill == pytest.approx(np.exp(target.logpdf(z)
                                                - target.logpdf(x)))
        assert rw_accept_ratio(z, x, target) == 1.0


class TestImhMn:
    def make_state(self, with_g3=False):
        g1 = MixtureOfNormals(weights=np.array([1.0]),
                              means=np.zeros((1, 2)),
                              covs=[CovMatrix.from_entries(np.eye(2))])
        st = ImhMnState(stage=1, g1=g1)
        if with_g3:
            st.g3 = MixtureOfNormals(weights=np.array([1.0]),
                                     means=np.ones((1, 2)),
                                     covs=[CovMatrix.from_entries(np.eye(2))])
        return st

    def test_weight_vectors(self):
        assert np.allclose(WEIGHTS_BEFORE_G3, [0.8, 0.2])
        assert np.allclose(WEIGHTS_WITH_G3, [0.15, 0.05, 0.7, 0.1])
        assert WEIGHTS_BEFORE_G3.sum() == pytest.approx(1.0)
        assert WEIGHTS_WITH_G3.sum() == pytest.approx(1.0)

    def test_terms_before_g3(self):
        st = self.make_state()
        terms = st.terms()
        assert len(terms) == 2
        assert terms[0][0] == 0.8 and terms[1][0] == 0.2
        assert np.allclose(terms[1][1].covs[0].entries, 10.0 * np.eye(2))

    def test_terms_with_g3(self):
        st = self.make_state(with_g3=True)
        terms = st.terms()
        assert [w for w, _ in terms] == [0.15, 0.05, 0.7, 0.1]
        assert np.allclose(terms[3][1].covs[0].entries, 20.0 * np.eye(2))

    def test_logpdf_normalizes(self):
        for with_g3 in (False, True):
            st = self.make_state(with_g3)
            total = quad_2d(lambda p: imh_mn_logpdf(p, st))
            assert total == pytest.approx(1.0, abs=1e-2)

    def test_propose_mean(self):
        st = self.make_state(with_g3=True)
        rng = np.random.default_rng(3)
        zs = np.array([imh_mn_propose(st, rng) for _ in range(4000)])
        # 0.8 of the mass sits on g3/g4 centered at 1
        assert np.allclose(zs.mean(axis=0), 0.8 * np.ones(2), atol=0.15)

    def test_adapt_sets_g3(self):
        st = self.make_state()
        rng = np.random.default_rng(4)
        history = rng.standard_normal((300, 2)) + 5.0
        assert imh_mn_adapt(st, history, accepted_count=10, rng=rng)
        assert st.g3 is not None
        assert np.allclose(st.g3.means[0], [5, 5], atol=0.3)

    def test_adapt_failure_keeps_previous(self):
        st = self.make_state(with_g3=True)
        old = st.g3
        ok = imh_mn_adapt(st, np.zeros((0, 2)), 10, np.random.default_rng(0))
        assert not ok and st.g3 is old

    def test_stage_transition_promotes_g3(self):
        st = self.make_state(with_g3=True)
        g3 = st.g3
        imh_mn_stage_transition(st)
        assert st.stage == 2 and st.g1 is g3


class TestImhTct:
    def make_state(self, antithetic=False):
        cop = TCopulaModel(marginals=[normal_marginal(), normal_marginal()],
                           corr=CovMatrix.from_entries(
                               [[1.0, 0.3], [0.3, 1.0]]), dof=1000.0)
        mvt = MvtParams(location=np.zeros(2), scale=identity_cov(2), dof=5.0)
        return ImhTctState(copula=cop, mvt=mvt, antithetic=antithetic)

    def test_mvt_dof_pinned(self):
        cop = self.make_state().copula
        with pytest.raises(ValueError):
            ImhTctState(copula=cop,
                        mvt=MvtParams(np.zeros(2), identity_cov(2), 4.0))

    def test_logpdf_mixture_lower_bound(self):
        from adamh.dists import mvt_logpdf
        st = self.make_state()
        rng = np.random.default_rng(5)
        for _ in range(30):
            x = rng.standard_normal(2) * 4
            assert imh_tct_logpdf(x, st) >= np.log(0.3) + mvt_logpdf(x, st.mvt)

    def test_logpdf_normalizes(self):
        st = self.make_state()
        assert quad_2d(lambda p: imh_tct_logpdf(p, st),
                       lim=40, n=1601) == pytest.approx(1.0, abs=1e-2)

    def test_mate_copula_is_negation(self):
        st = self.make_state()
        v = np.array([1.0, -2.0])
        assert np.allclose(antithetic_mate(v, "copula", st), -v)

    def test_mate_mvt_reflects_through_mean(self):
        st = self.make_state()
        v = np.array([1.0, -2.0])
        assert np.allclose(antithetic_mate(v, "mvt", st), -v)  # mu = 0
        st.mvt = MvtParams(np.array([2.0, 2.0]), identity_cov(2), 5.0)
        assert np.allclose(antithetic_mate(v, "mvt", st),
                           2.0 * st.mvt.location - v)

    def test_mate_rejects_unknown_component(self):
        with pytest.raises(ValueError):
            antithetic_mate(np.zeros(2), "gaussian", self.make_state())

    def test_plain_proposals_are_fresh(self):
        st = self.make_state(antithetic=False)
        rng = np.random.default_rng(6)
        x = np.zeros(2)
        for _ in range(10):
            z, logq = imh_tct_propose(x, st, rng)
            assert logq is not None
            assert logq == pytest.approx(imh_tct_logpdf(z, st))

    def test_antithetic_alternates_with_mates(self):
        st = self.make_state(antithetic=True)
        rng = np.random.default_rng(7)
        x = np.array([0.7, -0.4])
        z1, logq1 = imh_tct_propose(x, st, rng)
        assert logq1 is not None            # fresh draw
        z2, logq2 = imh_tct_propose(x, st, rng)
        assert logq2 is None                # deterministic mate of the state
        # mate is an involution of the current point under either component
        assert (np.allclose(z2, -x)
                or np.allclose(z2, 2.0 * st.mvt.location - x))
        z3, logq3 = imh_tct_propose(x, st, rng)
        assert logq3 is not None            # back to a fresh draw

    def test_make_tct_state_from_history(self):
        rng = np.random.default_rng(8)
        pts = rng.standard_normal((400, 2)) @ np.diag([1.0, 2.0]) + 1.0
        st = make_tct_state(pts, rng)
        assert st.mvt.dof == 5.0
        assert np.allclose(st.mvt.location, pts.mean(axis=0), atol=1e-10)
        assert st.copula.dim == 2
