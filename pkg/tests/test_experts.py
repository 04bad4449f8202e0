"""KT, iProd, Squint and Coin Betting."""

import math

import numpy as np
import pytest
from scipy import stats

from ewkit.bounds import coinbetting_bound, coinbetting_bound_general
from ewkit.config import build_config
from ewkit.errors import ConfigError, LossBoundError, NumericError
from ewkit.experts import (
    CoinBettingState,
    EtaGridPosterior,
    ExpertRound,
    coinbetting_eta,
    coinbetting_step,
    coinbetting_weights,
    eta_grid,
    iprod_update,
    iprod_weights,
    kt_predict,
    mix_loss,
    squint_update,
)
from ewkit.losses import ExpertRegretLoss
from ewkit.suites import compare_squint_coinbetting


class TestKT:
    def test_values(self):
        assert kt_predict(0, 1) == 0.5
        assert kt_predict(1, 2) == 0.75
        assert kt_predict(0, 3) == pytest.approx(1.0 / 6.0)

    def test_matches_beta_posterior_mean(self):
        assert kt_predict(1, 2) == pytest.approx(stats.beta(1.5, 0.5).mean())
        assert kt_predict(3, 10) == pytest.approx(stats.beta(3.5, 6.5).mean())

    def test_invalid_counts(self):
        with pytest.raises(ConfigError):
            kt_predict(3, 3)
        with pytest.raises(ConfigError):
            kt_predict(0, 0)


class TestExpertRound:
    def test_regrets(self):
        rnd = ExpertRound(np.array([0.0, 1.0]), np.array([0.25, 0.75]))
        assert rnd.learner_loss == pytest.approx(0.75)
        np.testing.assert_allclose(rnd.regrets, [0.75, -0.25])

    def test_loss_bounds(self):
        with pytest.raises(LossBoundError):
            ExpertRound(np.array([0.0, 1.5]), np.array([0.5, 0.5]))

    def test_weights_on_simplex(self):
        with pytest.raises(NumericError):
            ExpertRound(np.array([0.0, 1.0]), np.array([0.5, 0.6]))


class TestEtaGrid:
    def test_grid(self):
        grid = eta_grid(100)
        np.testing.assert_allclose(grid, [1 / 32, 1 / 16, 1 / 8, 1 / 4, 1 / 2])
        assert eta_grid(1).tolist() == [0.5]

    def test_priors(self):
        post = EtaGridPosterior.start(100, 3)
        ratio = post.eta_prior * post.grid
        np.testing.assert_allclose(ratio, ratio[0])
        assert post.eta_prior.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(post.eta_prior[0], 16 / 31)
        np.testing.assert_allclose(post.expert_prior, np.full(3, 1 / 3))
        flat = EtaGridPosterior.start(100, 3, eta_prior="log-uniform")
        np.testing.assert_allclose(flat.eta_prior, np.full(5, 0.2))
        with pytest.raises(ConfigError):
            EtaGridPosterior.start(100, 3, eta_prior="flat")

    def test_config_defaults_to_inverse_prior(self):
        assert build_config({"algorithm": "squint", "d": "3"}).eta_prior == "inverse"
        assert build_config({"algorithm": "iprod", "d": "3", "eta_prior": "log-uniform"}).eta_prior == "log-uniform"

    def test_grid_keeps_point_count_below_root_t(self):
        for T in (100, 1000, 10_000):
            grid = eta_grid(T)
            assert grid.shape[0] == 1 + math.ceil(math.log2(math.sqrt(T)))
            assert grid[0] == pytest.approx(2.0 ** -grid.shape[0])
            assert 1 / (4 * math.sqrt(T)) < grid[0] <= 1 / (2 * math.sqrt(T))
            assert grid[-1] == 0.5

    def test_prod_factors_need_small_eta(self):
        with pytest.raises(LossBoundError):
            ExpertRegretLoss(np.array([-1.0])).prod_log_factors([1.0])


class TestIProd:
    def test_potential_stays_one(self):
        rng = np.random.default_rng(42)
        post = EtaGridPosterior.start(1000, 4)
        for _ in range(500):
            w = iprod_weights(post)
            r = ExpertRound(rng.random(4), w).regrets
            post = iprod_update(post, r)
            assert post.log_potential == pytest.approx(0.0, abs=1e-10)

    def test_weights_are_on_simplex(self):
        post = EtaGridPosterior.start(100, 5)
        w = iprod_weights(post)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(w, np.full(5, 0.2))

    def test_mix_loss_is_zero_for_prod(self):
        """The prod surrogate is mixable with mix loss −ln E[1 + ηr] = 0 at iProd's weights."""
        rng = np.random.default_rng(3)
        post = EtaGridPosterior.start(100, 3)
        for _ in range(20):
            r = ExpertRound(rng.random(3), iprod_weights(post)).regrets
            factors = ExpertRegretLoss(r).prod_log_factors(post.grid)
            assert mix_loss(post, factors) == pytest.approx(0.0, abs=1e-12)
            post = iprod_update(post, r)


class TestSquint:
    def test_potential_never_exceeds_one(self):
        rng = np.random.default_rng(42)
        post = EtaGridPosterior.start(1000, 4)
        for _ in range(500):
            r = ExpertRound(rng.random(4), iprod_weights(post)).regrets
            post = squint_update(post, r)
            assert post.log_potential <= 1e-10

    def test_squint_factor_below_prod_factor(self):
        x = np.linspace(-0.5, 0.5, 2001)
        assert np.all(x - x**2 <= np.log1p(x) + 1e-15)

    def test_comparison_with_coinbetting_is_reported_not_failed(self):
        passed, detail, worse = compare_squint_coinbetting(seeds=3, d=4, T=200)
        assert passed
        assert 0 <= worse <= 3
        assert "of 3 seeds" in detail


class TestCoinBetting:
    def test_eta(self):
        np.testing.assert_allclose(coinbetting_eta([2.0, -1.0], 3, 1.0), [0.5, 0.0])
        with pytest.raises(ConfigError):
            coinbetting_eta([0.0], 0, 1.0)

    def test_first_round_falls_back_to_prior(self):
        state = CoinBettingState.start(100, 3)
        np.testing.assert_allclose(coinbetting_weights(state), np.full(3, 1 / 3))

    def test_wealth_recursion(self):
        """p̂_{t+1} = p̂_t + ŵ_t r_t, with wealth starting at the prior."""
        rng = np.random.default_rng(42)
        d, T = 4, 300
        state = CoinBettingState.start(T, d)
        wealth = state.prior.copy()
        for _ in range(T):
            w_hat = state.unnormalized_weights()
            g = rng.random(d)
            weights, state = coinbetting_step(state, g)
            wealth = wealth + w_hat * ExpertRound(g, weights).regrets
            np.testing.assert_allclose(state.wealth, wealth, atol=1e-10)
            assert np.all(state.wealth > 0)

    def test_regret_within_bound(self):
        rng = np.random.default_rng(7)
        d, T = 5, 400
        state = CoinBettingState.start(T, d)
        regrets = np.zeros(d)
        for _ in range(T):
            g = rng.random(d)
            g[0] *= 0.7
            weights, state = coinbetting_step(state, g)
            regrets += ExpertRound(g, weights).regrets
        assert regrets.max() <= coinbetting_bound(T, math.log(d))

    def test_headline_bound_value(self):
        assert coinbetting_bound(100, math.log(2.0)) == pytest.approx(33.29, abs=0.01)

    def test_general_bound_below_headline(self):
        for T in (10, 100, 1000, 10_000):
            a = T / 4 + 0.5
            assert coinbetting_bound_general(T, a, math.log(10)) <= coinbetting_bound(T, math.log(10))
