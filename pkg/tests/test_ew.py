"""The EW engine: schedules, lazy/greedy updates, mixability gaps and the regret decomposition."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from ewkit.domains import ConvexDomain
from ewkit.errors import IncompatibleLossError, ScheduleError, ScheduleExhaustedError
from ewkit.ew import (
    LearnerState,
    Schedule,
    ew_update,
    lemma1_bound,
    mixability_gap,
    posterior_mean,
    posterior_mixability_gap,
)
from ewkit.experts import kt_predict
from ewkit.expfam import BetaState, DiscreteAtoms, GaussianState, PoissonProductState
from ewkit.losses import ExpConcaveLogLoss, LinearLoss, LogLoss, QuadraticLoss
from ewkit.models import Flavor, Support


class TestSchedule:
    def test_constant(self):
        s = Schedule.constant(0.5)
        assert s.eta(1) == 0.5
        assert s.eta(10_000) == 0.5
        assert s.is_constant

    def test_decreasing(self):
        s = Schedule.decreasing(1.0, 4)
        assert s.eta(4) == pytest.approx(0.5)
        assert not s.is_constant

    def test_increasing_rates_are_rejected(self):
        with pytest.raises(ScheduleError):
            Schedule.sequence([0.1, 0.2])

    def test_nonpositive_rates_are_rejected(self):
        with pytest.raises(ScheduleError):
            Schedule.constant(0.0)

    def test_exhausted(self):
        s = Schedule.sequence([0.3, 0.2])
        with pytest.raises(ScheduleExhaustedError):
            s.eta(3)
        with pytest.raises(ScheduleError):
            s.eta(0)


class TestGaussianEW:
    def test_lazy_posterior_matches_quadrature(self):
        rng = np.random.default_rng(42)
        eta = 0.3
        domain = ConvexDomain.all_space(1)
        state = LearnerState.start(GaussianState.isotropic([0.0], 1.0), Schedule.constant(eta), domain, Flavor.LAZY)
        gs = rng.normal(size=5)
        for g in gs:
            state = ew_update(state, LinearLoss.of([g]), domain)

        def density(w):
            return math.exp(-0.5 * w * w - eta * gs.sum() * w)

        Z, _ = integrate.quad(density, -20.0, 20.0, epsabs=1e-13)
        m, _ = integrate.quad(lambda w: w * density(w), -20.0, 20.0, epsabs=1e-13)
        assert posterior_mean(state)[0] == pytest.approx(m / Z, abs=1e-9)

    def test_lazy_and_greedy_agree_without_projection(self):
        rng = np.random.default_rng(42)
        domain = ConvexDomain.all_space(3)
        prior = GaussianState.isotropic(np.zeros(3), 2.0)
        lazy = LearnerState.start(prior, Schedule.constant(0.2), domain, Flavor.LAZY)
        greedy = LearnerState.start(prior, Schedule.constant(0.2), domain, Flavor.GREEDY)
        for _ in range(50):
            loss = LinearLoss(rng.normal(size=3))
            lazy = ew_update(lazy, loss, domain)
            greedy = ew_update(greedy, loss, domain)
        np.testing.assert_allclose(posterior_mean(lazy), posterior_mean(greedy), atol=1e-12)

    def test_only_eta_times_sigma2_matters(self):
        rng = np.random.default_rng(42)
        domain = ConvexDomain.ball(2, 1.0)
        c = 4.0
        a = LearnerState.start(GaussianState.isotropic(np.zeros(2), 1.0), Schedule.constant(0.1), domain)
        b = LearnerState.start(GaussianState.isotropic(np.zeros(2), 1.0 / c), Schedule.constant(0.1 * c), domain)
        for _ in range(100):
            loss = LinearLoss(rng.normal(size=2))
            a = ew_update(a, loss, domain)
            b = ew_update(b, loss, domain)
            np.testing.assert_allclose(posterior_mean(a), posterior_mean(b), atol=1e-10)

    def test_quadratic_tilt_updates_precision(self):
        domain = ConvexDomain.all_space(2)
        state = LearnerState.start(GaussianState.isotropic(np.zeros(2), 1.0), Schedule.constant(1.0), domain)
        state = ew_update(state, QuadraticLoss.of([1.0, 0.0], np.eye(2)), domain)
        np.testing.assert_allclose(state.posterior.covariance, 0.5 * np.eye(2))
        np.testing.assert_allclose(posterior_mean(state), [-0.5, 0.0])


class TestOtherFamilies:
    def test_kt_as_lazy_beta_ew(self):
        rng = np.random.default_rng(42)
        domain = ConvexDomain.interval(0.0, 1.0)
        state = LearnerState.start(BetaState(0.5, 0.5, Support.UNIT), Schedule.constant(1.0), domain, Flavor.LAZY)
        ones = 0
        for t in range(1, 200):
            assert posterior_mean(state)[0] == pytest.approx(kt_predict(ones, t), abs=1e-12)
            x = float(rng.random() < 0.3)
            ones += int(x)
            state = ew_update(state, LogLoss(x, Support.UNIT), domain)

    def test_poisson_tilt(self):
        domain = ConvexDomain.all_space(2)
        state = LearnerState.start(PoissonProductState.from_rates([1.0, 2.0]), Schedule.constant(0.5), domain)
        state = ew_update(state, LinearLoss.of([2.0, -2.0]), domain)
        np.testing.assert_allclose(posterior_mean(state), [math.exp(-1.0), 2.0 * math.e])

    def test_discrete_tilt_is_exponentiated_gradient(self):
        domain = ConvexDomain.l1_ball(1)
        state = LearnerState.start(DiscreteAtoms.plus_minus_basis(1), Schedule.constant(1.0), domain)
        state = ew_update(state, LinearLoss.of([math.log(2.0)]), domain)
        np.testing.assert_allclose(state.posterior.weights, [0.2, 0.8])

    def test_incompatible_pair(self):
        domain = ConvexDomain.all_space(1)
        state = LearnerState.start(PoissonProductState.from_rates([1.0]), Schedule.constant(1.0), domain)
        with pytest.raises(IncompatibleLossError):
            ew_update(state, LogLoss(1.0), domain)


class TestMixabilityGap:
    def test_gaussian_linear_closed_form(self):
        post = GaussianState.from_covariance([0.1, 0.2], [[2.0, 0.5], [0.5, 1.0]])
        g = np.array([1.0, -3.0])
        assert posterior_mixability_gap(post, LinearLoss(g), 0.4) == pytest.approx(0.2 * g @ post.covariance @ g)

    def test_gaussian_quadratic_matches_quadrature(self):
        post = GaussianState.isotropic([0.3], 0.7)
        loss = QuadraticLoss.of([0.5], [[2.0]], [0.1])
        eta = 0.8
        dist = stats.norm(0.3, math.sqrt(0.7))
        mgf, _ = integrate.quad(lambda w: dist.pdf(w) * math.exp(-eta * loss.value([w])), -15, 15, epsabs=1e-14)
        expected = loss.value([0.3]) + math.log(mgf) / eta
        assert posterior_mixability_gap(post, loss, eta) == pytest.approx(expected, abs=1e-9)

    def test_gaussian_exp_concave_uses_quadrature(self):
        post = GaussianState.isotropic([0.0], 0.01)
        loss = ExpConcaveLogLoss(np.array([0.5]))
        eta = 1.0
        dist = stats.norm(0.0, 0.1)
        mgf, _ = integrate.quad(lambda w: dist.pdf(w) * (1.0 + 0.5 * w), -0.8, 0.8, epsabs=1e-13)
        expected = math.log(mgf)
        assert posterior_mixability_gap(post, loss, eta) == pytest.approx(expected, abs=1e-7)

    def test_poisson_matches_pmf_sum(self):
        lam, g, eta = 2.0, 0.7, 0.5
        post = PoissonProductState.from_rates([lam])
        k = np.arange(0, 120)
        mgf = float(np.sum(stats.poisson.pmf(k, lam) * np.exp(-eta * g * k)))
        expected = g * lam + math.log(mgf) / eta
        assert posterior_mixability_gap(post, LinearLoss.of([g]), eta) == pytest.approx(expected, abs=1e-12)

    def test_linear_gaps_are_nonnegative(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            post = DiscreteAtoms.normalized(rng.normal(size=(6, 2)), rng.random(6) + 0.01)
            gap = posterior_mixability_gap(post, LinearLoss(rng.normal(size=2)), float(rng.uniform(0.01, 2.0)))
            assert gap >= -1e-12

    def test_log_loss_is_mixable_at_eta_one(self):
        state = LearnerState.start(
            BetaState(1.5, 2.5, Support.UNIT), Schedule.constant(1.0), ConvexDomain.interval(0.0, 1.0), Flavor.LAZY
        )
        assert mixability_gap(state, LogLoss(1.0, Support.UNIT), 1.0) == 0.0
        assert mixability_gap(state, LogLoss(0.0, Support.UNIT), 1.0) == 0.0


class TestRegretDecomposition:
    def test_bound_values(self):
        assert lemma1_bound(2.0, [0.1, 0.2], Schedule.constant(0.5)) == pytest.approx(4.3)
        greedy = lemma1_bound(2.0, [0.1, 0.2], Schedule.sequence([1.0, 0.5]), 3.0, Flavor.GREEDY)
        assert greedy == pytest.approx(2.0 + 3.0 + 0.3)
        assert lemma1_bound(5.0, [], Schedule.constant(1.0)) == 0.0

    @pytest.mark.parametrize("flavor", list(Flavor))
    def test_gaussian_run_respects_the_bound(self, flavor):
        rng = np.random.default_rng(42)
        d, eta, sigma2 = 3, 0.05, 1.0
        domain = ConvexDomain.ball(d, 1.0)
        state = LearnerState.start(GaussianState.isotropic(np.zeros(d), sigma2), Schedule.constant(eta), domain, flavor)
        gaps, grad_sum, learner_loss = [], np.zeros(d), 0.0
        for _ in range(300):
            g = rng.normal(size=d) + np.array([0.5, 0.0, 0.0])
            w = posterior_mean(state)
            loss = LinearLoss(g)
            gaps.append(mixability_gap(state, loss, eta))
            learner_loss += loss.value(w)
            grad_sum += g
            state = ew_update(state, loss, domain)
            u = domain.linear_minimizer(grad_sum)
            kl_prior = float(u @ u) / (2.0 * sigma2)
            assert learner_loss - u @ grad_sum <= lemma1_bound(kl_prior, gaps, state.schedule, kl_prior, flavor) + 1e-9
