"""Prediction with expert advice: KT, iProd, Squint and Coin Betting.

Each algorithm runs EW on a surrogate task over (η, expert) pairs and maps
its posterior back to weights on the simplex.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, LossBoundError, NumericError
from .losses import ExpertRegretLoss

SIMPLEX_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ExpertRound:
    """Losses g ∈ [0,1]^d, the weights played and the resulting regrets."""

    losses: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        if np.any(self.losses < 0) or np.any(self.losses > 1):
            raise LossBoundError("expert losses must lie in [0, 1]")
        if np.any(self.weights < -SIMPLEX_TOL) or abs(self.weights.sum() - 1.0) > SIMPLEX_TOL:
            raise NumericError("expert weights are not on the simplex")

    @property
    def learner_loss(self) -> float:
        return float(self.weights @ self.losses)

    @property
    def regrets(self) -> np.ndarray:
        return self.learner_loss - self.losses


def kt_predict(ones_count: int, t: int) -> float:
    """Krichevsky-Trofimov forecast (ones + ½)/t for round t."""
    if t < 1 or not 0 <= ones_count <= t - 1:
        raise ConfigError(f"need 0 <= ones_count <= t - 1, got ones_count={ones_count}, t={t}")
    return (ones_count + 0.5) / t


# -- η-grid posteriors (iProd, Squint) -----------------------------------------


def eta_grid(T: int) -> np.ndarray:
    """η_k = 2^{-k}, k = 1..1+⌈log₂√T⌉, ascending.

    The point count is kept fixed, so η_min = 2^{-K} lands in (1/(4√T), 1/(2√T)]
    rather than at or above 1/√T.
    """
    K = 1 + max(0, math.ceil(math.log2(math.sqrt(max(T, 1)))))
    return np.sort(2.0 ** -np.arange(1, K + 1))


@dataclass(frozen=True, eq=False)
class EtaGridPosterior:
    """Joint posterior over (η, i), kept in log space.

    `log_potential` is the log of the unnormalized mass Σ P₁(η, i) Π exp(−ℓ̃_s),
    i.e. ln Φ_t.
    """

    grid: np.ndarray
    log_weights: np.ndarray
    log_prior: np.ndarray
    log_potential: float = 0.0

    def __post_init__(self) -> None:
        if np.any(np.diff(self.grid) <= 0) or self.grid[0] <= 0 or self.grid[-1] > 0.5:
            raise ConfigError("η grid must be ascending inside (0, 1/2]")
        if self.log_weights.shape != (self.grid.shape[0], self.log_weights.shape[1]):
            raise ConfigError("joint weights must have one row per grid η")
        if abs(math.exp(float(logsumexp(self.log_weights))) - 1.0) > SIMPLEX_TOL:
            raise NumericError("joint (η, i) weights are not normalized")

    @classmethod
    def start(cls, T: int, d: int, prior=None, eta_prior: str = "inverse") -> EtaGridPosterior:
        grid = eta_grid(T)
        if eta_prior == "log-uniform":
            gamma = np.full(grid.shape[0], 1.0 / grid.shape[0])
        elif eta_prior == "inverse":
            gamma = (1.0 / grid) / np.sum(1.0 / grid)
        else:
            raise ConfigError(f"unknown η prior {eta_prior!r}")
        pi = np.full(d, 1.0 / d) if prior is None else np.asarray(prior, dtype=float)
        with np.errstate(divide="ignore"):
            log_joint = np.log(gamma)[:, None] + np.log(pi)[None, :]
        return cls(grid, log_joint, log_joint.copy())

    @property
    def d(self) -> int:
        return self.log_weights.shape[1]

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def eta_prior(self) -> np.ndarray:
        return np.exp(logsumexp(self.log_prior, axis=1))

    @property
    def expert_prior(self) -> np.ndarray:
        return np.exp(logsumexp(self.log_prior, axis=0))

    @property
    def potential(self) -> float:
        return math.exp(self.log_potential)

    def prior_mass(self, lo: float, hi: float) -> float:
        """γ([lo, hi]) under the grid prior on η."""
        inside = (self.grid >= lo * (1 - 1e-12)) & (self.grid <= hi * (1 + 1e-12))
        return float(self.eta_prior[inside].sum())


def iprod_weights(posterior: EtaGridPosterior) -> np.ndarray:
    """E_P[η e_i] / E_P[η]."""
    tilted = posterior.grid @ posterior.weights
    total = float(tilted.sum())
    if not total > 0:
        raise NumericError("E[η] = 0 under the joint posterior")
    return tilted / total


def _reweigh(posterior: EtaGridPosterior, log_factors: np.ndarray) -> EtaGridPosterior:
    with np.errstate(divide="ignore"):
        unnorm = posterior.log_weights + log_factors
    log_mass = float(logsumexp(unnorm))
    return replace(posterior, log_weights=unnorm - log_mass, log_potential=posterior.log_potential + log_mass)


def iprod_update(posterior: EtaGridPosterior, r) -> EtaGridPosterior:
    """Multiply each (η, i) weight by 1 + η r(i) and renormalize."""
    return _reweigh(posterior, ExpertRegretLoss(np.asarray(r, dtype=float)).prod_log_factors(posterior.grid))


def squint_update(posterior: EtaGridPosterior, r) -> EtaGridPosterior:
    """Multiply each (η, i) weight by exp(η r(i) − η² r(i)²) and renormalize."""
    return _reweigh(posterior, ExpertRegretLoss(np.asarray(r, dtype=float)).squint_log_factors(posterior.grid))


def mix_loss(posterior: EtaGridPosterior, log_factors: np.ndarray) -> float:
    """−ln E_P[exp(−ℓ̃)] for a round with surrogate losses −log_factors."""
    return -float(logsumexp(posterior.log_weights + log_factors))


# -- Coin Betting ----------------------------------------------------------------


def coinbetting_eta(R_prev, t: int, a: float):
    """max{R_{t−1}/(t − 1 + 2a), 0}: the clipped mean of lazy EW with a Beta(a, a) prior."""
    if t < 1 or a < 0.5:
        raise ConfigError(f"need t >= 1 and a >= 1/2, got t={t}, a={a}")
    return np.maximum(np.asarray(R_prev, dtype=float) / (t - 1 + 2.0 * a), 0.0)


def coinbetting_shape(T: int) -> float:
    return T / 4.0 + 0.5


@dataclass(frozen=True, eq=False)
class CoinBettingState:
    """Wealth p̂_t(i), regret sums R_{t−1}(i), Beta shape a and prior π."""

    prior: np.ndarray
    wealth: np.ndarray
    regret_sum: np.ndarray
    a: float
    t: int = 1
    clip_regrets: bool = False

    @classmethod
    def start(cls, T: int, d: int, prior=None, clip_regrets: bool = False) -> CoinBettingState:
        pi = np.full(d, 1.0 / d) if prior is None else np.asarray(prior, dtype=float)
        return cls(pi, pi.copy(), np.zeros(d), coinbetting_shape(T), 1, clip_regrets)

    def bets(self) -> np.ndarray:
        return coinbetting_eta(self.regret_sum, self.t, self.a)

    def unnormalized_weights(self) -> np.ndarray:
        return self.wealth * self.bets()


def coinbetting_weights(state: CoinBettingState) -> np.ndarray:
    w_hat = state.unnormalized_weights()
    total = float(w_hat.sum())
    return w_hat / total if total > 0 else state.prior.copy()


def coinbetting_step(state: CoinBettingState, g) -> tuple[np.ndarray, CoinBettingState]:
    """Play normalized ŵ_t = p̂_t η_t (or π when nothing is bet), then update wealth."""
    g = np.asarray(g, dtype=float)
    w_hat = state.unnormalized_weights()
    weights = coinbetting_weights(state)
    r = ExpertRound(g, weights).regrets
    if state.clip_regrets:
        r = np.where(state.regret_sum < 0, np.maximum(r, 0.0), r)
    new = replace(
        state,
        wealth=state.wealth + w_hat * r,
        regret_sum=state.regret_sum + r,
        t=state.t + 1,
    )
    return weights, new
