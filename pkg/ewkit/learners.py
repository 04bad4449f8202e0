"""One predict/update/bound interface over every algorithm id.

The harness only ever talks to these adapters: it asks for an action, hands
back the adversary's loss, and asks for the bound that should dominate the
regret against the current best comparator.
"""
from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .adversaries import Constants
from .bandit import BanditLearner, tuned_parameters
from .bounds import (
    bandit_running_bound,
    coinbetting_bound_general,
    egpm_bound,
    gaussian_quadratic_bound,
    gd_greedy_bound,
    gd_lazy_bound,
    iprod_bound,
    kt_bound,
    ons_bound,
    strongly_convex_bound,
)
from .domains import ConvexDomain
from .errors import ConfigError
from .ew import LearnerState, Schedule, ew_update, lemma1_bound, mixability_gap, posterior_mean, posterior_mixability_gap
from .experts import (
    CoinBettingState,
    EtaGridPosterior,
    ExpertRound,
    coinbetting_step,
    coinbetting_weights,
    iprod_update,
    iprod_weights,
    mix_loss,
    squint_update,
)
from .expfam import BetaState, DiscreteAtoms, GaussianState, PoissonProductState, unnormalized_relative_entropy
from .losses import ExpertRegretLoss, LinearLoss, QuadraticLoss
from .models import AlgorithmId, DomainKind, ExperimentConfig, Flavor, Support
from .surrogates import QuadEWState, egpm_tuned_eta, ons_beta, ons_curvature, quad_ew_step

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepRecord:
    loss: float
    mix_gap: float = math.nan


class Learner(ABC):
    algorithm: AlgorithmId
    stochastic = False

    @abstractmethod
    def predict(self) -> np.ndarray: ...

    @abstractmethod
    def update(self, loss, w: np.ndarray) -> StepRecord: ...

    @abstractmethod
    def bound(self, comparator, t: int) -> float: ...

    def flags(self) -> list[str]:
        return []

    def finish(self) -> None:
        """Post-run diagnostics; raises if the run cannot be trusted."""


# -- EW-engine learners ------------------------------------------------------------


class EWLearner(Learner):
    """Runs the EW engine directly; `surrogate` turns a true loss into what EW sees."""

    def __init__(self, state: LearnerState, domain: ConvexDomain) -> None:
        self.state = state
        self.domain = domain
        self.gaps: list[float] = []

    def predict(self) -> np.ndarray:
        return posterior_mean(self.state)

    def surrogate(self, loss, w):
        return LinearLoss(loss.gradient(w))

    def gap_eta(self) -> float:
        t = self.state.round
        schedule = self.state.schedule
        if self.state.flavor is Flavor.LAZY:
            return schedule.eta(max(t - 1, 1))
        return schedule.eta(t)

    def update(self, loss, w) -> StepRecord:
        surrogate = self.surrogate(loss, w)
        gap = mixability_gap(self.state, surrogate, self.gap_eta())
        self.observe(surrogate)
        self.state = ew_update(self.state, surrogate, self.domain)
        self.gaps.append(gap)
        return StepRecord(loss.value(w), gap)

    def observe(self, surrogate) -> None:
        pass


class KTLearner(EWLearner):
    algorithm = AlgorithmId.KT

    def __init__(self, domain: ConvexDomain, flavor: Flavor = Flavor.LAZY) -> None:
        prior = BetaState(0.5, 0.5, Support.UNIT)
        super().__init__(LearnerState.start(prior, Schedule.constant(1.0), domain, flavor), domain)

    def surrogate(self, loss, w):
        return loss

    def bound(self, comparator, t: int) -> float:
        return kt_bound(t)


class GDLearner(EWLearner):
    """GD as EW with prior N(w₁, σ²I) on linearized losses."""

    algorithm = AlgorithmId.GD

    def __init__(self, domain: ConvexDomain, schedule: Schedule, sigma2: float, flavor: Flavor) -> None:
        self.w1 = domain.center()
        self.sigma2 = sigma2
        prior = GaussianState.isotropic(self.w1, sigma2)
        super().__init__(LearnerState.start(prior, schedule, domain, flavor), domain)
        self.sum_eta_g2 = 0.0
        self.history: list[np.ndarray] = []

    def update(self, loss, w) -> StepRecord:
        self.history.append(np.asarray(w, dtype=float).copy())
        return super().update(loss, w)

    def observe(self, surrogate) -> None:
        self.sum_eta_g2 += self.gap_eta() * float(surrogate.g @ surrogate.g)

    def bound(self, comparator, t: int) -> float:
        u = comparator.point
        eta_T = self.state.schedule.eta(t)
        if self.state.flavor is Flavor.LAZY:
            return gd_lazy_bound(float(np.sum((u - self.w1) ** 2)), self.sigma2, eta_T, self.sum_eta_g2)
        W = np.asarray(self.history)
        max_dist2 = float(np.max(np.sum((W - u) ** 2, axis=1)))
        return gd_greedy_bound(max_dist2, self.sigma2, eta_T, self.sum_eta_g2)


class EGPMLearner(EWLearner):
    """EG± as EW with a uniform prior on ±M e_i."""

    algorithm = AlgorithmId.EGPM

    def __init__(self, d: int, schedule: Schedule, G: float, M: float, flavor: Flavor) -> None:
        domain = ConvexDomain.l1_ball(d, M)
        prior = DiscreteAtoms.plus_minus_basis(d, M)
        super().__init__(LearnerState.start(prior, schedule, domain, flavor), domain)
        self.d, self.G, self.M = d, G, M

    def bound(self, comparator, t: int) -> float:
        schedule = self.state.schedule
        if schedule.is_constant:
            return egpm_bound(t, self.d, self.G, self.M, eta=schedule.first)
        return lemma1_bound(math.log(2 * self.d), self.gaps, schedule, math.log(2 * self.d), self.state.flavor)


class MDPoissonLearner(EWLearner):
    """Mirror descent with the unnormalized relative entropy, as EW over Poisson products."""

    algorithm = AlgorithmId.MD_POISSON

    def __init__(self, domain: ConvexDomain, schedule: Schedule, flavor: Flavor) -> None:
        self.rates1 = domain.center()
        prior = PoissonProductState.from_rates(self.rates1)
        super().__init__(LearnerState.start(prior, schedule, domain, flavor), domain)
        self.posteriors: list[np.ndarray] = []

    def update(self, loss, w) -> StepRecord:
        record = super().update(loss, w)
        self.posteriors.append(self.state.posterior.rates.copy())
        return record

    def bound(self, comparator, t: int) -> float:
        u = comparator.point
        kl_prior = unnormalized_relative_entropy(u, self.rates1)
        kl_max = 0.0
        if self.state.flavor is Flavor.GREEDY and not self.state.schedule.is_constant:
            kl_max = max(unnormalized_relative_entropy(u, lam) for lam in self.posteriors[: max(t - 1, 0)] or [self.rates1])
        return lemma1_bound(kl_prior, self.gaps, self.state.schedule, kl_max, self.state.flavor)


# -- quadratic-surrogate learners ---------------------------------------------------------


class QuadraticLearner(Learner):
    """EW with a Gaussian prior on quadratic surrogates, via the closed-form recursion."""

    def __init__(self, domain: ConvexDomain, eta: float, sigma2: float, flavor: Flavor) -> None:
        self.domain = domain
        self.sigma2 = sigma2
        self.w1 = domain.center()
        self.state = QuadEWState.start(self.w1, sigma2, eta, flavor)
        self.sum_g_cov_g = 0.0
        # bound on ‖u − w₁‖ over the domain
        self.radius = domain.max_norm() if not np.any(self.w1) else domain.diameter()

    @property
    def eta(self) -> float:
        return self.state.eta

    def predict(self) -> np.ndarray:
        return self.state.mean.copy()

    @abstractmethod
    def surrogate(self, loss, w) -> QuadraticLoss: ...

    def update(self, loss, w) -> StepRecord:
        surrogate = self.surrogate(loss, w)
        current = GaussianState(self.state.mean, self.state.covariance, self.state.precision)
        gap = posterior_mixability_gap(current, surrogate, self.eta)
        self.state = quad_ew_step(self.state, surrogate, self.domain)
        self.sum_g_cov_g += float(surrogate.g @ self.state.covariance @ surrogate.g)
        return StepRecord(loss.value(w), gap)


class QuadEWLearner(QuadraticLearner):
    """Exact curvature: the surrogate is the quadratic loss itself, re-centred at w_t."""

    algorithm = AlgorithmId.QUAD_EW

    def surrogate(self, loss, w) -> QuadraticLoss:
        return QuadraticLoss.of(loss.gradient(w), loss.M, w)

    def bound(self, comparator, t: int) -> float:
        u = comparator.point
        return gaussian_quadratic_bound(self.eta, float(np.sum((self.w1 - u) ** 2)) / self.sigma2, self.sum_g_cov_g)


class StronglyConvexLearner(QuadraticLearner):
    algorithm = AlgorithmId.STRONGLY_CONVEX

    def __init__(self, domain, eta, sigma2, flavor, constants: Constants) -> None:
        super().__init__(domain, eta, sigma2, flavor)
        self.constants = constants

    def surrogate(self, loss, w) -> QuadraticLoss:
        return QuadraticLoss.isotropic(loss.gradient(w), self.constants.alpha, w)

    def bound(self, comparator, t: int) -> float:
        c = self.constants
        return strongly_convex_bound(t, c.G, self.radius, c.alpha, self.eta * self.sigma2)


class ONSLearner(QuadraticLearner):
    algorithm = AlgorithmId.ONS

    def __init__(self, domain, eta, sigma2, flavor, constants: Constants) -> None:
        super().__init__(domain, eta, sigma2, flavor)
        self.constants = constants
        self.beta = ons_beta(constants.alpha, constants.G, constants.B)

    def surrogate(self, loss, w) -> QuadraticLoss:
        c = self.constants
        return ons_curvature(loss.gradient(w), c.alpha, c.G, c.B, anchor=w)

    def bound(self, comparator, t: int) -> float:
        c = self.constants
        return ons_bound(t, self.domain.dim, c.G, self.radius, self.beta, self.eta * self.sigma2)


# -- experts ----------------------------------------------------------------------------


class ExpertsLearner(Learner):
    def __init__(self, d: int) -> None:
        self.d = d
        self.regrets = np.zeros(d)
        self.variances = np.zeros(d)
        self.rounds = 0

    def record(self, g, w) -> ExpertRound:
        rnd = ExpertRound(np.asarray(g, dtype=float), np.asarray(w, dtype=float))
        r = rnd.regrets
        self.regrets += r
        self.variances += r * r
        self.rounds += 1
        return rnd

    @property
    def prior(self) -> np.ndarray:
        return np.full(self.d, 1.0 / self.d)

    def mixture_bound(self, indices) -> tuple[float, float]:
        """Expected regret and bound under the uniform comparator on `indices`."""
        idx = np.asarray(indices)
        q = np.full(idx.shape[0], 1.0 / idx.shape[0])
        kl = float(np.sum(q * np.log(q / self.prior[idx])))
        regret = float(q @ self.regrets[idx])
        return regret, self.bound_for(float(q @ self.variances[idx]), kl, self.rounds)

    def kl_point(self, i: int) -> float:
        return -math.log(self.prior[i])

    @abstractmethod
    def bound_for(self, variance: float, kl: float, t: int) -> float: ...

    def bound(self, comparator, t: int) -> float:
        i = comparator.best
        return self.bound_for(float(self.variances[i]), self.kl_point(i), t)


class GridExpertsLearner(ExpertsLearner):
    """iProd (prod surrogate) or Squint (quadratic-in-η surrogate) on an η grid."""

    def __init__(self, algorithm: AlgorithmId, d: int, T: int, eta_prior: str) -> None:
        super().__init__(d)
        self.algorithm = algorithm
        self.posterior = EtaGridPosterior.start(T, d, eta_prior=eta_prior)
        self.potentials: list[float] = []

    def predict(self) -> np.ndarray:
        return iprod_weights(self.posterior)

    def update(self, loss, w) -> StepRecord:
        rnd = self.record(loss.g, w)
        surrogate = ExpertRegretLoss(rnd.regrets)
        if self.algorithm is AlgorithmId.IPROD:
            factors = surrogate.prod_log_factors(self.posterior.grid)
        else:
            factors = surrogate.squint_log_factors(self.posterior.grid)
        m = mix_loss(self.posterior, factors)
        step = iprod_update if self.algorithm is AlgorithmId.IPROD else squint_update
        self.posterior = step(self.posterior, rnd.regrets)
        self.potentials.append(self.posterior.potential)
        return StepRecord(rnd.learner_loss, m)

    def bound_for(self, variance: float, kl: float, t: int) -> float:
        return iprod_bound(variance, kl, self.posterior.grid, self.posterior.eta_prior)


class CoinBettingLearner(ExpertsLearner):
    algorithm = AlgorithmId.COIN_BETTING

    def __init__(self, d: int, T: int, clip_regrets: bool) -> None:
        super().__init__(d)
        self.state = CoinBettingState.start(T, d, clip_regrets=clip_regrets)

    def predict(self) -> np.ndarray:
        return coinbetting_weights(self.state)

    def update(self, loss, w) -> StepRecord:
        weights, self.state = coinbetting_step(self.state, loss.g)
        rnd = self.record(loss.g, weights)
        return StepRecord(rnd.learner_loss)

    def bound_for(self, variance: float, kl: float, t: int) -> float:
        return coinbetting_bound_general(t, self.state.a, kl)


# -- bandit -----------------------------------------------------------------------------


class BanditEWLearner(Learner):
    algorithm = AlgorithmId.BANDIT
    stochastic = True

    def __init__(self, domain: ConvexDomain, T: int, config: ExperimentConfig, rng: np.random.Generator) -> None:
        d = domain.dim
        self.T = T
        self.nu = float(d) if config.nu is None else float(config.nu)
        if config.eta is not None:
            eta = float(config.eta)
            gamma = min(eta * d, 0.5)
        else:
            eta, gamma = tuned_parameters(d, T, self.nu)
        self.eta, self.gamma = eta, gamma
        self.tolerance = config.sampler_flag_tolerance
        self.inner = BanditLearner(domain, eta, gamma, rng, config.n_samples, config.moment_method)

    def predict(self) -> np.ndarray:
        return self.inner.act()

    def update(self, loss, w) -> StepRecord:
        observed = loss.value(w)
        self.inner.observe(observed)
        return StepRecord(observed)

    def bound(self, comparator, t: int) -> float:
        return bandit_running_bound(t, self.T, self.inner.domain.dim, self.eta, self.gamma, self.nu)

    def flags(self) -> list[str]:
        out = []
        post = self.inner.posterior
        if post.flags:
            out.append(f"sampler drift in {post.flags}/{post.draws} rounds")
        if self.inner.boundedness_violations:
            out.append(f"η|⟨w, g̃⟩| > 1.05 in {self.inner.boundedness_violations} rounds")
        return out

    def finish(self) -> None:
        self.inner.posterior.check_flags(self.tolerance)


# -- construction ---------------------------------------------------------------------

EXPERT_ALGORITHMS = (AlgorithmId.IPROD, AlgorithmId.SQUINT, AlgorithmId.COIN_BETTING)
QUADRATIC_ALGORITHMS = (AlgorithmId.QUAD_EW, AlgorithmId.STRONGLY_CONVEX, AlgorithmId.ONS)


def algorithm_domain(config: ExperimentConfig) -> ConvexDomain:
    """The action set the learner, adversary and comparator all share."""
    algo = config.algorithm
    d = config.adversary.d
    spec = config.domain
    if algo is AlgorithmId.KT:
        return ConvexDomain.interval(0.0, 1.0)
    if algo is AlgorithmId.EGPM:
        M = 1.0 if config.adversary.M is None else float(config.adversary.M)
        return ConvexDomain.l1_ball(d, M)
    if algo in EXPERT_ALGORITHMS:
        return ConvexDomain.simplex(d)
    if algo is AlgorithmId.MD_POISSON:
        if spec.kind is DomainKind.SIMPLEX:
            return ConvexDomain.simplex(d)
        # rates must stay positive: [r/20, r]^d
        return ConvexDomain.box(np.full(d, spec.radius / 20.0), np.full(d, spec.radius))
    return ConvexDomain.from_spec(spec, d)


def make_schedule(config: ExperimentConfig, default_eta: float, T: int) -> Schedule:
    eta = default_eta if config.eta is None else float(config.eta)
    if config.schedule == "sqrt":
        return Schedule.decreasing(eta, T)
    if config.schedule in ("constant", "tuned"):
        return Schedule.constant(eta)
    raise ConfigError(f"unknown schedule {config.schedule!r}")


def make_learner(
    config: ExperimentConfig,
    domain: ConvexDomain,
    constants: Constants,
    rng: np.random.Generator,
) -> Learner:
    algo = config.algorithm
    T = config.adversary.T
    d = domain.dim
    c = constants
    flavor = config.flavor

    if algo in QUADRATIC_ALGORITHMS and config.schedule == "sqrt":
        raise ConfigError(f"{algo.value} needs a constant learning rate")
    if algo in (AlgorithmId.GD, AlgorithmId.MD_POISSON, *QUADRATIC_ALGORITHMS, AlgorithmId.BANDIT):
        if domain.kind is DomainKind.ALL:
            raise ConfigError(f"{algo.value} needs a bounded domain")

    if algo is AlgorithmId.KT:
        return KTLearner(domain, flavor)
    if algo is AlgorithmId.GD:
        # only ησ² matters: the tuned GD step is D/(G√T)
        if config.schedule == "sqrt":
            schedule = make_schedule(config, c.D / (config.sigma2 * c.G), T)
        else:
            schedule = make_schedule(config, c.D / (config.sigma2 * c.G * math.sqrt(T)), T)
        return GDLearner(domain, schedule, config.sigma2, flavor)
    if algo is AlgorithmId.EGPM:
        base = egpm_tuned_eta(d, 1 if config.schedule == "sqrt" else T, c.G, c.M)
        return EGPMLearner(d, make_schedule(config, base, T), c.G, c.M, flavor)
    if algo is AlgorithmId.MD_POISSON:
        base = 1.0 / (c.G * c.D * (1.0 if config.schedule == "sqrt" else math.sqrt(T)))
        return MDPoissonLearner(domain, make_schedule(config, base, T), flavor)
    if algo in QUADRATIC_ALGORITHMS:
        eta = 1.0 if config.eta is None else float(config.eta)
        if algo is AlgorithmId.QUAD_EW:
            return QuadEWLearner(domain, eta, config.sigma2, flavor)
        if algo is AlgorithmId.STRONGLY_CONVEX:
            return StronglyConvexLearner(domain, eta, config.sigma2, flavor, c)
        return ONSLearner(domain, eta, config.sigma2, flavor, c)
    if algo in (AlgorithmId.IPROD, AlgorithmId.SQUINT):
        return GridExpertsLearner(algo, d, T, config.eta_prior)
    if algo is AlgorithmId.COIN_BETTING:
        return CoinBettingLearner(d, T, config.clip_regrets)
    if algo is AlgorithmId.BANDIT:
        return BanditEWLearner(domain, T, config, rng)
    raise ConfigError(f"unknown algorithm {algo}")
