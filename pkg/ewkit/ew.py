"""Lazy and greedy Exponential Weights over exponential-family posteriors.

Greedy EW tilts the current posterior by exp(−η_t f_t); lazy EW tilts the
prior by exp(−η_t Σ_{s≤t} f_s). Both then project the posterior mean onto the
domain. For conjugate loss/family pairs the tilt is closed form, so lazy EW
only keeps the accumulated natural-parameter shift of past losses.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import integrate, linalg
from scipy.special import betaln, logsumexp

from .domains import ConvexDomain
from .errors import IncompatibleLossError, ScheduleError, ScheduleExhaustedError
from .expfam import (
    BetaState,
    DiscreteAtoms,
    ExpFamilyPosterior,
    GaussianState,
    PoissonProductState,
    mean_of,
    project_mean,
)
from .losses import LinearLoss, LogLoss, QuadraticLoss, SurrogateLoss
from .models import Flavor, ScheduleKind

logger = logging.getLogger(__name__)

QUADRATURE_TOL = 1e-8


@dataclass(frozen=True)
class Schedule:
    """Learning rates η_1 ≥ η_2 ≥ … > 0.

    A constant schedule without a horizon never runs out.
    """

    kind: ScheduleKind
    values: tuple[float, ...]
    horizon: int | None = None

    def __post_init__(self) -> None:
        if not self.values:
            raise ScheduleError("schedule has no learning rates")
        for v in self.values:
            if not (v > 0 and math.isfinite(v)):
                raise ScheduleError(f"learning rates must be positive and finite, got {v}")
        for a, b in zip(self.values, self.values[1:]):
            if b > a:
                raise ScheduleError(f"learning rates must be nonincreasing ({a} then {b})")

    @classmethod
    def constant(cls, eta: float, horizon: int | None = None) -> Schedule:
        return cls(ScheduleKind.CONSTANT, (float(eta),), horizon)

    @classmethod
    def sequence(cls, values: Sequence[float]) -> Schedule:
        vals = tuple(float(v) for v in values)
        return cls(ScheduleKind.SEQUENCE, vals, len(vals))

    @classmethod
    def decreasing(cls, eta: float, T: int) -> Schedule:
        """η_t = η/√t."""
        return cls.sequence([eta / math.sqrt(t) for t in range(1, T + 1)])

    @property
    def first(self) -> float:
        return self.values[0]

    def eta(self, t: int) -> float:
        if t < 1:
            raise ScheduleError(f"rounds are numbered from 1, got {t}")
        if self.horizon is not None and t > self.horizon:
            raise ScheduleExhaustedError(f"schedule covers {self.horizon} rounds, asked for round {t}")
        if self.kind is ScheduleKind.CONSTANT:
            return self.values[0]
        return self.values[t - 1]

    @property
    def is_constant(self) -> bool:
        return self.kind is ScheduleKind.CONSTANT or len(set(self.values)) == 1


@dataclass(frozen=True, eq=False)
class NaturalShift:
    """Running sums of past losses, in whatever form the family tilts by.

    Gaussian: Σ b_s and Σ M_s of ½wᵀM_sw + ⟨b_s, w⟩. Poisson: Σ g_s.
    Discrete: Σ f_s at every atom. Beta: Σ x_s and Σ (1 − x_s).
    """

    linear: np.ndarray | None = None
    quadratic: np.ndarray | None = None
    counts: tuple[float, float] | None = None

    @classmethod
    def zero_for(cls, prior: ExpFamilyPosterior) -> NaturalShift:
        if isinstance(prior, GaussianState):
            d = prior.dim
            return cls(linear=np.zeros(d), quadratic=np.zeros((d, d)))
        if isinstance(prior, PoissonProductState):
            return cls(linear=np.zeros(prior.dim))
        if isinstance(prior, DiscreteAtoms):
            return cls(linear=np.zeros(prior.atoms.shape[0]))
        return cls(counts=(0.0, 0.0))

    def add(self, loss: SurrogateLoss, prior: ExpFamilyPosterior) -> NaturalShift:
        if isinstance(prior, GaussianState):
            if isinstance(loss, LinearLoss):
                return replace(self, linear=self.linear + loss.g)
            if isinstance(loss, QuadraticLoss):
                return replace(self, linear=self.linear + loss.linear_coefficient, quadratic=self.quadratic + loss.M)
        elif isinstance(prior, PoissonProductState):
            if isinstance(loss, LinearLoss):
                return replace(self, linear=self.linear + loss.g)
        elif isinstance(prior, DiscreteAtoms):
            return replace(self, linear=self.linear + _atom_losses(prior, loss))
        elif isinstance(prior, BetaState):
            if isinstance(loss, LogLoss):
                a, b = self.counts
                return replace(self, counts=(a + loss.outcome, b + 1.0 - loss.outcome))
        raise _incompatible(loss, prior)


@dataclass(frozen=True)
class LearnerState:
    """One EW instance: prior, projected posterior P_t and raw posterior P̃_t."""

    prior: ExpFamilyPosterior
    posterior: ExpFamilyPosterior
    raw_posterior: ExpFamilyPosterior
    schedule: Schedule
    flavor: Flavor
    shift: NaturalShift
    round: int = 1

    @classmethod
    def start(
        cls,
        prior: ExpFamilyPosterior,
        schedule: Schedule,
        domain: ConvexDomain,
        flavor: Flavor = Flavor.GREEDY,
    ) -> LearnerState:
        return cls(
            prior=prior,
            posterior=project_mean(prior, domain),
            raw_posterior=prior,
            schedule=schedule,
            flavor=flavor,
            shift=NaturalShift.zero_for(prior),
        )


def ew_update(state: LearnerState, loss: SurrogateLoss, domain: ConvexDomain) -> LearnerState:
    eta = state.schedule.eta(state.round)
    if state.flavor is Flavor.GREEDY:
        raw = tilt(state.posterior, NaturalShift.zero_for(state.posterior).add(loss, state.posterior), eta)
        shift = state.shift
    else:
        shift = state.shift.add(loss, state.prior)
        raw = tilt(state.prior, shift, eta)
    return replace(
        state,
        posterior=project_mean(raw, domain),
        raw_posterior=raw,
        shift=shift,
        round=state.round + 1,
    )


def tilt(state: ExpFamilyPosterior, shift: NaturalShift, eta: float) -> ExpFamilyPosterior:
    """The member of the family with density ∝ exp(−η · accumulated loss) dP."""
    if isinstance(state, GaussianState):
        if not np.any(shift.quadratic):
            return state.with_mean(state.mean - eta * (state.covariance @ shift.linear))
        precision = state.precision + eta * shift.quadratic
        h = state.natural_linear - eta * shift.linear
        tilted = GaussianState.from_precision(np.zeros(state.dim), precision)
        return tilted.with_mean(linalg.solve(tilted.precision, h, assume_a="pos"))
    if isinstance(state, PoissonProductState):
        return PoissonProductState(state.rates * np.exp(-eta * shift.linear))
    if isinstance(state, DiscreteAtoms):
        with np.errstate(divide="ignore"):
            logw = np.log(state.weights) - eta * shift.linear
        return DiscreteAtoms(state.atoms, np.exp(logw - logsumexp(logw)))
    if isinstance(state, BetaState):
        ones, zeros = shift.counts
        return BetaState(state.shape_a + eta * ones, state.shape_b + eta * zeros, state.support)
    raise IncompatibleLossError(f"unsupported family {type(state).__name__}")


def posterior_mean(state: LearnerState) -> np.ndarray:
    return mean_of(state.posterior)


def mixability_gap(state: LearnerState, loss: SurrogateLoss, eta: float) -> float:
    """f(w_t) + (1/η) ln E_{P_t}[exp(−η f(w))] at the posterior mean w_t."""
    return posterior_mixability_gap(state.posterior, loss, eta)


def posterior_mixability_gap(post: ExpFamilyPosterior, loss: SurrogateLoss, eta: float) -> float:
    w = mean_of(post)
    if isinstance(post, GaussianState):
        if isinstance(loss, LinearLoss):
            return 0.5 * eta * float(loss.g @ post.covariance @ loss.g)
        if isinstance(loss, QuadraticLoss):
            return loss.value(w) + _gaussian_quadratic_log_mgf(post, loss, eta) / eta
    elif isinstance(post, PoissonProductState):
        if isinstance(loss, LinearLoss):
            lam = post.rates
            return float(loss.g @ lam + np.sum(lam * np.expm1(-eta * loss.g)) / eta)
    elif isinstance(post, DiscreteAtoms):
        values = _atom_losses(post, loss)
        with np.errstate(divide="ignore"):
            log_mgf = logsumexp(-eta * values, b=post.weights)
        return loss.value(w) + float(log_mgf) / eta
    elif isinstance(post, BetaState) and isinstance(loss, LogLoss):
        x = loss.outcome
        if eta == 1.0 and x in (0.0, 1.0):
            return 0.0
        log_mgf = betaln(post.shape_a + eta * x, post.shape_b + eta * (1.0 - x)) - betaln(post.shape_a, post.shape_b)
        return loss.value(w) + float(log_mgf) / eta

    if isinstance(post, GaussianState) and post.dim <= 2 and hasattr(loss, "value"):
        logger.debug("mixability gap by quadrature for %s", type(loss).__name__)
        return loss.value(w) + _gaussian_log_mgf_quadrature(post, loss, eta) / eta
    raise _incompatible(loss, post)


def lemma1_bound(
    kl_prior: float,
    gaps: Sequence[float],
    schedule: Schedule,
    kl_max_intermediate: float = 0.0,
    flavor: Flavor = Flavor.LAZY,
) -> float:
    """Regret bound of EW in terms of prior KL and summed mixability gaps.

    lazy:   kl/η_T + Σ gaps
    greedy: kl/η_1 + (1/η_T − 1/η_1)·max_t kl(Q‖P_t) + Σ gaps
    """
    T = len(gaps)
    if T == 0:
        return 0.0
    eta_1 = schedule.eta(1)
    eta_T = schedule.eta(T)
    total_gap = math.fsum(gaps)
    if flavor is Flavor.LAZY:
        return kl_prior / eta_T + total_gap
    extra = (1.0 / eta_T - 1.0 / eta_1) * kl_max_intermediate if eta_T != eta_1 else 0.0
    return kl_prior / eta_1 + extra + total_gap


# -- helpers -------------------------------------------------------------------


def _atom_losses(post: DiscreteAtoms, loss: SurrogateLoss) -> np.ndarray:
    if isinstance(loss, LinearLoss):
        return post.atoms @ loss.g
    if not hasattr(loss, "value"):
        raise _incompatible(loss, post)
    return np.array([loss.value(a) for a in post.atoms])


def _gaussian_quadratic_log_mgf(post: GaussianState, loss: QuadraticLoss, eta: float) -> float:
    """ln E_{N(μ,Σ)}[exp(−η(½wᵀMw + ⟨b, w⟩ + c))]."""
    P = post.precision
    P_new = P + eta * loss.M
    h_new = post.natural_linear - eta * loss.linear_coefficient
    _, logdet_p = np.linalg.slogdet(P)
    _, logdet_new = np.linalg.slogdet(P_new)
    quad_new = float(h_new @ linalg.solve(P_new, h_new, assume_a="pos"))
    quad_old = float(post.mean @ P @ post.mean)
    return 0.5 * (logdet_p - logdet_new) + 0.5 * quad_new - 0.5 * quad_old - eta * loss.constant


def _gaussian_log_mgf_quadrature(post: GaussianState, loss, eta: float) -> float:
    sd = np.sqrt(np.diag(post.covariance))
    lo = post.mean - 8.0 * sd
    hi = post.mean + 8.0 * sd
    _, logdet = np.linalg.slogdet(post.covariance)
    d = post.dim
    log_norm = -0.5 * (d * math.log(2.0 * math.pi) + logdet)

    def integrand(*w):
        x = np.array(w[::-1] if d == 2 else w, dtype=float)
        z = x - post.mean
        f = loss.value(x)
        if not math.isfinite(f):
            return 0.0
        return math.exp(log_norm - 0.5 * float(z @ post.precision @ z) - eta * f)

    if d == 1:
        value, _ = integrate.quad(integrand, lo[0], hi[0], epsabs=QUADRATURE_TOL, epsrel=QUADRATURE_TOL, limit=200)
    else:
        value, _ = integrate.dblquad(integrand, lo[0], hi[0], lo[1], hi[1], epsabs=QUADRATURE_TOL, epsrel=QUADRATURE_TOL)
    return math.log(value)


def _incompatible(loss, post) -> IncompatibleLossError:
    return IncompatibleLossError(f"{type(loss).__name__} is not supported with {type(post).__name__}")
