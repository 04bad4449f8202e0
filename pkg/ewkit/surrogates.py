"""Reference implementations of the first-order methods that EW reproduces.

GD, EG±, mirror descent / FTRL and the Gaussian quadratic-surrogate
recursion (which covers strongly convex GD and ONS) are written here in their
usual textbook form, independent of the EW engine, so the two can be checked
against each other.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg

from .domains import ConvexDomain
from .errors import ConfigError, MirrorMapError, NumericError
from .expfam import BregmanPair
from .losses import QuadraticLoss
from .models import DomainKind, Flavor

logger = logging.getLogger(__name__)

REINVERT_EVERY = 256


def gd_step(
    w,
    g,
    eta: float,
    domain: ConvexDomain,
    flavor: Flavor = Flavor.GREEDY,
    anchor_sum=None,
) -> np.ndarray:
    """One step of projected gradient descent.

    Greedy: project(w − ηg). Lazy: `w` is the starting point w₁ and
    `anchor_sum` the sum of earlier gradients; returns project(w₁ − η Σ_{s≤t} g_s).
    """
    w = np.asarray(w, dtype=float)
    g = np.asarray(g, dtype=float)
    if flavor is Flavor.LAZY:
        total = g if anchor_sum is None else np.asarray(anchor_sum, dtype=float) + g
        return domain.project(w - eta * total)
    return domain.project(w - eta * g)


def egpm_step(wplus, wminus, g, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """EG± multiplicative update with joint normalization over both halves."""
    wplus = np.asarray(wplus, dtype=float)
    wminus = np.asarray(wminus, dtype=float)
    if np.any(wplus < 0) or np.any(wminus < 0):
        raise NumericError("EG± weights must be nonnegative")
    g = np.asarray(g, dtype=float)
    up = wplus * np.exp(-eta * g)
    down = wminus * np.exp(eta * g)
    total = up.sum() + down.sum()
    if not total > 0:
        raise NumericError("all EG± weights are zero")
    return up / total, down / total


def egpm_predict(wplus, wminus, scale: float = 1.0) -> np.ndarray:
    return scale * (np.asarray(wplus, dtype=float) - np.asarray(wminus, dtype=float))


def egpm_tuned_eta(d: int, T: int, G: float, M: float = 1.0) -> float:
    """η = √(2 ln(2d) / (T M² G²))."""
    return math.sqrt(2.0 * math.log(2 * d) / (T * M * M * G * G))


def md_step(
    w,
    g,
    eta: float,
    bregman: BregmanPair,
    domain: ConvexDomain,
    flavor: Flavor = Flavor.GREEDY,
    grad_sum=None,
) -> np.ndarray:
    """Mirror descent (greedy) or FTRL (lazy) with Bregman projection.

    Greedy: w̃ = ∇F(∇F*(w) − ηg). Lazy: `w` is w₁ and `grad_sum` the earlier
    gradients; w̃ = ∇F(∇F*(w₁) − η Σ_{s≤t} g_s).
    """
    w = np.asarray(w, dtype=float)
    g = np.asarray(g, dtype=float)
    theta = bregman.grad_F_star(w)
    if not np.all(np.isfinite(theta)):
        raise MirrorMapError(f"{bregman.name} mirror map is not invertible at {w}")
    total = g if flavor is Flavor.GREEDY or grad_sum is None else np.asarray(grad_sum, dtype=float) + g
    w_tilde = bregman.grad_F(theta - eta * total)
    if not np.all(np.isfinite(w_tilde)):
        raise MirrorMapError(f"{bregman.name} mirror step overflowed")
    if domain.kind is DomainKind.ALL:
        return w_tilde
    if bregman.project is None:
        raise MirrorMapError(f"{bregman.name} has no Bregman projection onto {domain.kind.value}")
    return bregman.project(w_tilde, domain)


@dataclass(frozen=True, eq=False)
class QuadEWState:
    """Mean, raw mean and Gaussian precision/covariance of EW on quadratic surrogates."""

    mean: np.ndarray
    raw_mean: np.ndarray
    precision: np.ndarray
    covariance: np.ndarray
    eta: float
    flavor: Flavor = Flavor.GREEDY
    rounds: int = 0

    def __post_init__(self) -> None:
        if not self.eta > 0:
            raise ConfigError(f"learning rate must be positive, got {self.eta}")

    @classmethod
    def start(cls, w1, sigma2: float, eta: float, flavor: Flavor = Flavor.GREEDY) -> QuadEWState:
        w1 = np.atleast_1d(np.asarray(w1, dtype=float)).copy()
        d = w1.shape[0]
        return cls(w1, w1.copy(), np.eye(d) / sigma2, sigma2 * np.eye(d), float(eta), flavor)

    @classmethod
    def from_schedule(cls, w1, sigma2: float, schedule, flavor: Flavor = Flavor.GREEDY) -> QuadEWState:
        if not schedule.is_constant:
            raise ConfigError("quadratic-surrogate EW needs a constant learning rate")
        return cls.start(w1, sigma2, schedule.first, flavor)


def quad_ew_step(state: QuadEWState, loss: QuadraticLoss, domain: ConvexDomain) -> QuadEWState:
    """Σ⁻¹ ← Σ⁻¹ + ηM; w̃ ← (w or w̃) − ηΣg; w ← Mahalanobis projection of w̃."""
    eta = state.eta
    precision = state.precision + eta * loss.M
    precision = 0.5 * (precision + precision.T)
    rounds = state.rounds + 1
    if loss.rank_one is not None and rounds % REINVERT_EVERY != 0:
        u = math.sqrt(eta) * loss.rank_one
        su = state.covariance @ u
        covariance = state.covariance - np.outer(su, su) / (1.0 + float(u @ su))
    elif np.any(loss.M):
        if loss.rank_one is not None:
            logger.debug("re-inverting precision at round %d", rounds)
        try:
            covariance = linalg.inv(precision)
        except linalg.LinAlgError as e:
            raise NumericError("precision update lost positive definiteness") from e
    else:
        covariance = state.covariance
    covariance = 0.5 * (covariance + covariance.T)

    base = state.mean if state.flavor is Flavor.GREEDY else state.raw_mean
    raw = base - eta * (covariance @ loss.g)
    mean = domain.project_mahalanobis(raw, precision)
    return replace(state, mean=mean, raw_mean=raw, precision=precision, covariance=covariance, rounds=rounds)


def ons_curvature(g, alpha: float, G: float, B: float, anchor=None) -> QuadraticLoss:
    """Quadratic surrogate with rank-one curvature β g gᵀ, β = ½ min{1/(4GB), α}."""
    if not (alpha > 0 and G > 0 and B > 0):
        raise ConfigError("ONS needs positive alpha, G and B")
    beta = ons_beta(alpha, G, B)
    g = np.atleast_1d(np.asarray(g, dtype=float))
    return QuadraticLoss.of(g, beta * np.outer(g, g), anchor, rank_one=math.sqrt(beta) * g)


def ons_beta(alpha: float, G: float, B: float) -> float:
    return 0.5 * min(1.0 / (4.0 * G * B), alpha)


def strongly_convex_rate(eta_sigma2: float, alpha: float, t: int) -> float:
    """Effective GD rate 1/(1/(ησ²) + αt) of EW on αI-curvature surrogates."""
    return 1.0 / (1.0 / eta_sigma2 + alpha * t)


def strongly_convex_gd_step(w, g, eta_sigma2: float, alpha: float, t: int, domain: ConvexDomain) -> np.ndarray:
    return domain.project(np.asarray(w, dtype=float) - strongly_convex_rate(eta_sigma2, alpha, t) * np.asarray(g))
