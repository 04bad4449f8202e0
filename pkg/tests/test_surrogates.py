"""First-order methods as EW: GD, EG±, mirror descent, strongly convex GD and ONS."""

import math

import numpy as np
import pytest

from ewkit.domains import ConvexDomain
from ewkit.errors import ConfigError, MirrorMapError, NumericError
from ewkit.ew import LearnerState, Schedule, ew_update, posterior_mean
from ewkit.expfam import DiscreteAtoms, GaussianState, gaussian_pair, poisson_pair
from ewkit.losses import ExpConcaveLogLoss, LinearLoss, QuadraticLoss
from ewkit.models import Flavor
from ewkit.suites import (
    check_egpm_equivalence,
    check_gd_equivalence,
    check_md_equivalence,
    check_ons_recursion,
    check_quadratic_reduction,
    check_scaling_redundancy,
)
from ewkit.surrogates import (
    QuadEWState,
    egpm_predict,
    egpm_step,
    egpm_tuned_eta,
    gd_step,
    md_step,
    ons_beta,
    ons_curvature,
    quad_ew_step,
    strongly_convex_gd_step,
    strongly_convex_rate,
)


class TestGradientDescent:
    def test_unconstrained_step(self):
        w = gd_step([0.0, 0.0], [1.0, 2.0], 0.1, ConvexDomain.all_space(2))
        np.testing.assert_allclose(w, [-0.1, -0.2])

    def test_zero_gradient_keeps_the_point(self):
        w = np.array([0.3, -0.1])
        np.testing.assert_array_equal(gd_step(w, np.zeros(2), 0.5, ConvexDomain.ball(2)), w)

    def test_projection_onto_ball(self):
        np.testing.assert_allclose(gd_step([2.0, 0.0], [0.0, 0.0], 1.0, ConvexDomain.ball(2)), [1.0, 0.0])

    def test_lazy_uses_the_gradient_sum(self):
        w1 = np.zeros(2)
        w = gd_step(w1, [1.0, 0.0], 0.1, ConvexDomain.all_space(2), Flavor.LAZY, anchor_sum=[2.0, 1.0])
        np.testing.assert_allclose(w, [-0.3, -0.1])

    def test_equivalent_to_gaussian_ew(self):
        ok, detail = check_gd_equivalence(rounds=100, seeds=3)
        assert ok, detail


class TestExponentiatedGradient:
    def test_single_step(self):
        wplus, wminus = egpm_step([1.0], [1.0], [math.log(2.0)], 1.0)
        assert wplus[0] == pytest.approx(0.2)
        assert wminus[0] == pytest.approx(0.8)
        assert egpm_predict(wplus, wminus)[0] == pytest.approx(-0.6)

    def test_weights_stay_normalized(self):
        rng = np.random.default_rng(42)
        wp, wm = np.full(4, 0.125), np.full(4, 0.125)
        for _ in range(100):
            wp, wm = egpm_step(wp, wm, rng.uniform(-1, 1, 4), 0.3)
        assert wp.sum() + wm.sum() == pytest.approx(1.0, abs=1e-12)

    def test_negative_weights_are_rejected(self):
        with pytest.raises(NumericError):
            egpm_step([-0.1], [1.1], [0.0], 1.0)

    def test_tuned_eta(self):
        assert egpm_tuned_eta(2, 100, 1.0) == pytest.approx(math.sqrt(2.0 * math.log(4.0) / 100.0))

    def test_equivalent_to_discrete_ew(self):
        ok, detail = check_egpm_equivalence(rounds=100, seeds=3)
        assert ok, detail

    def test_ew_prediction_matches(self):
        domain = ConvexDomain.l1_ball(1)
        state = LearnerState.start(DiscreteAtoms.plus_minus_basis(1), Schedule.constant(1.0), domain)
        state = ew_update(state, LinearLoss.of([math.log(2.0)]), domain)
        assert posterior_mean(state)[0] == pytest.approx(-0.6)


class TestMirrorDescent:
    def test_poisson_step(self):
        w = md_step([1.0], [1.0], 1.0, poisson_pair(), ConvexDomain.all_space(1))
        assert w[0] == pytest.approx(math.exp(-1.0))

    def test_gaussian_pair_is_gradient_descent(self):
        rng = np.random.default_rng(42)
        domain = ConvexDomain.ball(3, 1.0)
        w = np.zeros(3)
        for _ in range(50):
            g = rng.normal(size=3)
            np.testing.assert_allclose(
                md_step(w, g, 0.2, gaussian_pair(1.0), domain), gd_step(w, g, 0.2, domain), atol=1e-14
            )
            w = gd_step(w, g, 0.2, domain)

    def test_simplex_projection_is_normalization(self):
        w = md_step([0.5, 0.5], [0.0, math.log(3.0)], 1.0, poisson_pair(), ConvexDomain.simplex(2))
        np.testing.assert_allclose(w, [0.75, 0.25])

    def test_mirror_map_outside_its_domain(self):
        with pytest.raises(MirrorMapError):
            md_step([0.0, 1.0], [1.0, 1.0], 0.1, poisson_pair(), ConvexDomain.all_space(2))

    def test_equivalent_to_ew(self):
        ok, detail = check_md_equivalence(rounds=100, seeds=3)
        assert ok, detail


class TestQuadraticRecursion:
    def test_single_step(self):
        state = QuadEWState.start(np.zeros(2), 1.0, 1.0)
        state = quad_ew_step(state, QuadraticLoss.of([1.0, 0.0], np.eye(2)), ConvexDomain.all_space(2))
        np.testing.assert_allclose(state.covariance, 0.5 * np.eye(2))
        np.testing.assert_allclose(state.raw_mean, [-0.5, 0.0])
        np.testing.assert_allclose(state.mean, [-0.5, 0.0])

    def test_matches_gaussian_ew(self):
        """Same answer as tilting a Gaussian prior by the quadratic surrogate."""
        rng = np.random.default_rng(42)
        d = 3
        domain = ConvexDomain.all_space(d)
        state = QuadEWState.start(np.zeros(d), 1.0, 0.5)
        ew = LearnerState.start(GaussianState.isotropic(np.zeros(d), 1.0), Schedule.constant(0.5), domain)
        for _ in range(20):
            v = rng.normal(size=d)
            loss = QuadraticLoss.of(rng.normal(size=d), np.outer(v, v), state.mean, rank_one=v)
            state = quad_ew_step(state, loss, domain)
            ew = ew_update(ew, loss, domain)
            np.testing.assert_allclose(state.mean, posterior_mean(ew), atol=1e-9)
            np.testing.assert_allclose(state.covariance, ew.posterior.covariance, atol=1e-9)

    def test_lazy_flavor_projects_the_unconstrained_chain(self):
        rng = np.random.default_rng(7)
        ball = ConvexDomain.ball(2, 0.3)
        lazy = QuadEWState.start(np.zeros(2), 1.0, 1.0, Flavor.LAZY)
        greedy = QuadEWState.start(np.zeros(2), 1.0, 1.0, Flavor.GREEDY)
        free = QuadEWState.start(np.zeros(2), 1.0, 1.0, Flavor.LAZY)
        gap = 0.0
        for _ in range(20):
            v = 0.5 * rng.normal(size=2)
            loss = QuadraticLoss.of(rng.normal(size=2), np.outer(v, v), rank_one=v)
            lazy = quad_ew_step(lazy, loss, ball)
            greedy = quad_ew_step(greedy, loss, ball)
            free = quad_ew_step(free, loss, ConvexDomain.all_space(2))
            np.testing.assert_allclose(lazy.raw_mean, free.mean, atol=1e-12)
            np.testing.assert_allclose(lazy.mean, ball.project_mahalanobis(lazy.raw_mean, lazy.precision), atol=1e-12)
            assert np.linalg.norm(lazy.mean) <= 0.3 + 1e-9
            gap = max(gap, float(np.max(np.abs(lazy.mean - greedy.mean))))
        assert gap > 1e-6

    def test_decreasing_schedule_is_rejected(self):
        with pytest.raises(ConfigError):
            QuadEWState.from_schedule(np.zeros(2), 1.0, Schedule.decreasing(1.0, 10))

    def test_zero_curvature_reduces_to_gd(self):
        ok, detail = check_quadratic_reduction(rounds=100, seeds=3)
        assert ok, detail

    def test_gd_and_ons_depend_only_on_eta_times_sigma2(self):
        ok, detail = check_scaling_redundancy(rounds=100, seeds=2)
        assert ok, detail


class TestStronglyConvex:
    def test_rate(self):
        assert strongly_convex_rate(1.0, 1.0, 1) == pytest.approx(0.5)
        assert strongly_convex_rate(1e12, 2.0, 10) == pytest.approx(1.0 / 20.0)

    def test_isotropic_surrogates_give_the_rate(self):
        rng = np.random.default_rng(42)
        d, alpha, eta, sigma2 = 3, 0.7, 2.0, 0.5
        domain = ConvexDomain.ball(d, 1.0)
        state = QuadEWState.start(np.zeros(d), sigma2, eta)
        w = np.zeros(d)
        for t in range(1, 101):
            g = rng.normal(size=d)
            state = quad_ew_step(state, QuadraticLoss.isotropic(g, alpha, state.mean), domain)
            w = strongly_convex_gd_step(w, g, eta * sigma2, alpha, t, domain)
            np.testing.assert_allclose(state.mean, w, atol=1e-10)


class TestOnlineNewtonStep:
    def test_beta(self):
        assert ons_beta(1.0, 1.0, 1.0) == pytest.approx(1.0 / 8.0)
        assert ons_beta(0.01, 1.0, 1.0) == pytest.approx(0.005)

    def test_curvature_is_rank_one(self):
        g = np.array([1.0, 2.0])
        loss = ons_curvature(g, 1.0, 1.0, 1.0)
        np.testing.assert_allclose(loss.M, np.outer(g, g) / 8.0)
        np.testing.assert_allclose(np.outer(loss.rank_one, loss.rank_one), loss.M)

    def test_invalid_constants(self):
        with pytest.raises(ConfigError):
            ons_curvature([1.0], 0.0, 1.0, 1.0)

    def test_sherman_morrison_tracks_the_inverse(self):
        ok, detail = check_ons_recursion(rounds=300, seeds=3)
        assert ok, detail

    def test_surrogate_lies_below_the_loss(self):
        """f(u) − f(w) >= ⟨g, u − w⟩ + β/2 ⟨g, u − w⟩² for exp-concave losses."""
        rng = np.random.default_rng(42)
        domain = ConvexDomain.ball(3, 1.0)
        G, B = 1.0, 2.0
        for _ in range(200):
            x = rng.normal(size=3)
            x *= 0.5 * rng.random() / np.linalg.norm(x)
            f = ExpConcaveLogLoss(x)
            w, u = domain.sample(rng, 2)
            surrogate = ons_curvature(f.gradient(w), 1.0, G, B, anchor=w)
            assert surrogate.value(u) <= f.value(u) - f.value(w) + 1e-12


class TestLinearization:
    def test_linearized_regret_dominates(self):
        rng = np.random.default_rng(42)
        domain = ConvexDomain.ball(2, 1.0)
        for _ in range(200):
            w, u = domain.sample(rng, 2)
            v = rng.normal(size=2)
            losses = [
                QuadraticLoss.of(rng.normal(size=2), np.eye(2) + np.outer(v, v), rng.normal(size=2)),
                ExpConcaveLogLoss(0.5 * v / max(1.0, np.linalg.norm(v))),
            ]
            for f in losses:
                assert f.value(w) - f.value(u) <= f.gradient(w) @ (w - u) + 1e-12
