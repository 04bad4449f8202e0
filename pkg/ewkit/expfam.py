"""Exponential-family posteriors, their divergences and mean projections.

Four families are supported: multivariate Gaussians, products of independent
Poissons, Beta distributions (on [0, 1] or mapped to [-1, 1]) and discrete
distributions on a fixed set of atoms. Each is an immutable record; updates
return new instances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import linalg
from scipy.special import betaln, digamma, kl_div, rel_entr

from .domains import ConvexDomain
from .errors import DomainError, NumericError
from .models import DomainKind, Support

MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class GaussianState:
    mean: np.ndarray
    covariance: np.ndarray
    precision: np.ndarray

    def __post_init__(self) -> None:
        d = self.mean.shape[0]
        if self.mean.ndim != 1 or d < 1:
            raise NumericError("Gaussian mean must be a non-empty vector")
        for name, m in (("covariance", self.covariance), ("precision", self.precision)):
            if m.shape != (d, d):
                raise NumericError(f"{name} has shape {m.shape}, expected {(d, d)}")
            if not np.all(np.isfinite(m)):
                raise NumericError(f"{name} has non-finite entries")
        if np.max(np.abs(self.covariance - self.covariance.T)) > 1e-12 * max(1.0, np.max(np.abs(self.covariance))):
            raise NumericError("covariance is not symmetric")
        cond = np.linalg.cond(self.precision)
        if not cond <= MAX_CONDITION:
            raise NumericError(f"degenerate covariance: condition number {cond:.3g} > {MAX_CONDITION:.0e}")
        try:
            np.linalg.cholesky(self.precision)
        except np.linalg.LinAlgError as e:
            raise NumericError("precision is not positive definite") from e
        if np.max(np.abs(self.precision @ self.covariance - np.eye(d))) > 1e-9:
            raise NumericError("precision and covariance are not inverse to each other")

    @classmethod
    def from_covariance(cls, mean, covariance) -> GaussianState:
        mean = np.array(mean, dtype=float).reshape(-1)
        cov = np.array(covariance, dtype=float)
        cov = 0.5 * (cov + cov.T)
        try:
            prec = linalg.inv(cov)
        except linalg.LinAlgError as e:
            raise NumericError("singular covariance") from e
        return cls(mean, cov, 0.5 * (prec + prec.T))

    @classmethod
    def from_precision(cls, mean, precision) -> GaussianState:
        mean = np.array(mean, dtype=float).reshape(-1)
        prec = np.array(precision, dtype=float)
        prec = 0.5 * (prec + prec.T)
        try:
            cov = linalg.inv(prec)
        except linalg.LinAlgError as e:
            raise NumericError("singular precision") from e
        return cls(mean, 0.5 * (cov + cov.T), prec)

    @classmethod
    def isotropic(cls, mean, sigma2: float) -> GaussianState:
        mean = np.array(mean, dtype=float).reshape(-1)
        d = mean.shape[0]
        return cls(mean, sigma2 * np.eye(d), np.eye(d) / sigma2)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def natural_linear(self) -> np.ndarray:
        """The natural parameter Σ⁻¹μ paired with the statistic w."""
        return self.precision @ self.mean

    def with_mean(self, mean) -> GaussianState:
        return GaussianState(np.array(mean, dtype=float), self.covariance, self.precision)


@dataclass(frozen=True, eq=False)
class PoissonProductState:
    rates: np.ndarray

    def __post_init__(self) -> None:
        if self.rates.ndim != 1 or not np.all(self.rates > 0) or not np.all(np.isfinite(self.rates)):
            raise NumericError("Poisson rates must be a vector of positive finite reals")

    @classmethod
    def from_rates(cls, rates) -> PoissonProductState:
        return cls(np.array(rates, dtype=float).reshape(-1))

    @property
    def dim(self) -> int:
        return self.rates.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.rates

    @property
    def natural(self) -> np.ndarray:
        return np.log(self.rates)


@dataclass(frozen=True)
class BetaState:
    """Beta(a, b) on [0, 1], or on [-1, 1] through η = 2z − 1."""

    shape_a: float
    shape_b: float
    support: Support = Support.SYMMETRIC

    def __post_init__(self) -> None:
        if not (self.shape_a > 0 and self.shape_b > 0):
            raise NumericError(f"Beta shapes must be positive, got a={self.shape_a}, b={self.shape_b}")

    @property
    def dim(self) -> int:
        return 1

    @property
    def unit_mean(self) -> float:
        return self.shape_a / (self.shape_a + self.shape_b)

    @property
    def mean(self) -> float:
        m = self.unit_mean
        return 2.0 * m - 1.0 if self.support is Support.SYMMETRIC else m

    @property
    def concentration(self) -> float:
        return self.shape_a + self.shape_b


@dataclass(frozen=True, eq=False)
class DiscreteAtoms:
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        if self.atoms.ndim != 2 or self.weights.shape != (self.atoms.shape[0],):
            raise NumericError("atoms must be (n, d) with one weight per atom")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise NumericError("atom weights must be nonnegative and finite")
        total = self.weights.sum()
        if total <= 0:
            raise NumericError("all atom weights are zero")
        if np.max(np.abs(self.weights - self.weights / total)) >= 1e-12:
            raise NumericError("atom weights do not sum to 1")
        if len(np.unique(self.atoms, axis=0)) != self.atoms.shape[0]:
            raise NumericError("atoms are not distinct")

    @classmethod
    def normalized(cls, atoms, weights) -> DiscreteAtoms:
        atoms = np.array(atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        weights = np.array(weights, dtype=float)
        total = weights.sum()
        if not total > 0:
            raise NumericError("all atom weights are zero")
        return cls(atoms, weights / total)

    @classmethod
    def plus_minus_basis(cls, d: int, scale: float = 1.0, with_negations: bool = True) -> DiscreteAtoms:
        """Uniform prior on ±scale·e_i (EG±), or on scale·e_i only (EG)."""
        basis = scale * np.eye(d)
        atoms = np.vstack([basis, -basis]) if with_negations else basis
        return cls.normalized(atoms, np.ones(atoms.shape[0]))

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms


ExpFamilyPosterior = Union[GaussianState, PoissonProductState, BetaState, DiscreteAtoms]


def mean_of(state: ExpFamilyPosterior) -> np.ndarray:
    return np.atleast_1d(np.asarray(state.mean, dtype=float)).copy()


# -- Bregman pairs -------------------------------------------------------------


@dataclass(frozen=True)
class BregmanPair:
    """A cumulant F with its conjugate F* and both gradient maps.

    `project` is the Bregman projection of a mean onto a domain under B_{F*};
    pairs without one only support unconstrained mirror steps.
    """

    name: str
    F: Callable[[np.ndarray], float]
    F_star: Callable[[np.ndarray], float]
    grad_F: Callable[[np.ndarray], np.ndarray]
    grad_F_star: Callable[[np.ndarray], np.ndarray]
    project: Callable[[np.ndarray, ConvexDomain], np.ndarray] | None = field(default=None, compare=False)

    def divergence_natural(self, theta1, theta2) -> float:
        """B_F(θ1 ‖ θ2)."""
        return bregman_divergence(self.F, self.grad_F, theta1, theta2)

    def divergence_mean(self, mu1, mu2) -> float:
        """B_{F*}(μ1 ‖ μ2)."""
        return bregman_divergence(self.F_star, self.grad_F_star, mu1, mu2)


def bregman_divergence(fn, grad, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(fn(x) - fn(y) - grad(y) @ (x - y))


def gaussian_pair(sigma2: float = 1.0) -> BregmanPair:
    """Cumulant of the carrier N(0, σ²I): F(θ) = σ²‖θ‖²/2, F*(μ) = ‖μ‖²/(2σ²)."""
    return BregmanPair(
        name="gaussian",
        F=lambda th: 0.5 * sigma2 * float(th @ th),
        F_star=lambda mu: 0.5 * float(mu @ mu) / sigma2,
        grad_F=lambda th: sigma2 * np.asarray(th, dtype=float),
        grad_F_star=lambda mu: np.asarray(mu, dtype=float) / sigma2,
        project=lambda mu, domain: domain.project(mu),
    )


def poisson_pair() -> BregmanPair:
    """F(θ) = Σ e^θ with F*(μ) = Σ μ(ln μ − 1): unnormalized relative entropy."""

    def grad_f_star(mu):
        mu = np.asarray(mu, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(mu)

    return BregmanPair(
        name="poisson",
        F=lambda th: float(np.exp(th).sum()),
        F_star=lambda mu: float(np.sum(mu * (np.log(mu) - 1.0))),
        grad_F=lambda th: np.exp(np.asarray(th, dtype=float)),
        grad_F_star=grad_f_star,
        project=lambda mu, domain: project_relative_entropy(mu, domain),
    )


def project_relative_entropy(w, domain: ConvexDomain) -> np.ndarray:
    """argmin_{u ∈ W} Σ u ln(u/w) − u + w for positive w."""
    w = np.asarray(w, dtype=float)
    if domain.kind is DomainKind.ALL:
        return w.copy()
    if domain.is_box:
        if np.any(domain.lower <= 0):
            raise DomainError("relative-entropy projection needs a box inside the positive orthant")
        return np.clip(w, domain.lower, domain.upper)
    if domain.kind is DomainKind.SIMPLEX:
        return w / w.sum()
    if domain.kind is DomainKind.L1_BALL:
        total = float(w.sum())
        return w.copy() if total <= domain.radius else w * (domain.radius / total)
    raise DomainError(f"relative-entropy projection onto {domain.kind.value} is not supported")


# -- divergences ---------------------------------------------------------------


def kl_gaussian(q: GaussianState, p: GaussianState) -> float:
    if q.dim != p.dim:
        raise DomainError(f"dimension mismatch: {q.dim} vs {p.dim}")
    d = q.dim
    _, logdet_q = np.linalg.slogdet(q.covariance)
    _, logdet_p = np.linalg.slogdet(p.covariance)
    diff = q.mean - p.mean
    trace = float(np.sum(p.precision * q.covariance))
    return 0.5 * (logdet_p - logdet_q + trace + float(diff @ p.precision @ diff) - d)


def kl_bernoulli(x: float, y: float) -> float:
    """kl(Ber(x) ‖ Ber(y)); +inf when y is 0 or 1 and x differs."""
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise DomainError(f"Bernoulli parameters must lie in [0, 1], got x={x}, y={y}")
    return float(rel_entr(x, y) + rel_entr(1.0 - x, 1.0 - y))


def unnormalized_relative_entropy(w, u) -> float:
    w = np.asarray(w, dtype=float)
    u = np.asarray(u, dtype=float)
    if w.shape != u.shape:
        raise DomainError(f"shape mismatch: {w.shape} vs {u.shape}")
    if np.any(w <= 0) or np.any(u <= 0):
        raise DomainError("unnormalized relative entropy needs positive entries")
    return float(np.sum(kl_div(w, u)))


def kl_poisson_product(q: PoissonProductState, p: PoissonProductState) -> float:
    if q.dim != p.dim:
        raise DomainError(f"dimension mismatch: {q.dim} vs {p.dim}")
    return float(np.sum(q.rates * np.log(q.rates / p.rates) - q.rates + p.rates))


def kl_beta(q: BetaState, p: BetaState) -> float:
    if q.support is not p.support:
        raise DomainError("Beta states on different supports")
    a1, b1, a2, b2 = q.shape_a, q.shape_b, p.shape_a, p.shape_b
    return float(
        betaln(a2, b2)
        - betaln(a1, b1)
        + (a1 - a2) * digamma(a1)
        + (b1 - b2) * digamma(b1)
        + (a2 - a1 + b2 - b1) * digamma(a1 + b1)
    )


def kl_discrete(q: DiscreteAtoms, p: DiscreteAtoms) -> float:
    if q.atoms.shape != p.atoms.shape or not np.array_equal(q.atoms, p.atoms):
        raise DomainError("discrete states on different atoms")
    return float(np.sum(rel_entr(q.weights, p.weights)))


def kl(q: ExpFamilyPosterior, p: ExpFamilyPosterior) -> float:
    if isinstance(q, GaussianState) and isinstance(p, GaussianState):
        return kl_gaussian(q, p)
    if isinstance(q, PoissonProductState) and isinstance(p, PoissonProductState):
        return kl_poisson_product(q, p)
    if isinstance(q, BetaState) and isinstance(p, BetaState):
        return kl_beta(q, p)
    if isinstance(q, DiscreteAtoms) and isinstance(p, DiscreteAtoms):
        return kl_discrete(q, p)
    raise DomainError(f"no KL between {type(q).__name__} and {type(p).__name__}")


# -- projection of means ---------------------------------------------------------


def project_mean(state: ExpFamilyPosterior, domain: ConvexDomain) -> ExpFamilyPosterior:
    """The same-family member closest in KL whose mean lies in the domain.

    Gaussians keep their covariance and move their mean by a Mahalanobis
    projection. Beta states keep their concentration a + b and have their mean
    clipped into an interval.
    """
    if isinstance(state, GaussianState):
        if domain.kind is DomainKind.ALL:
            return state
        return state.with_mean(domain.project_mahalanobis(state.mean, state.precision))

    if isinstance(state, PoissonProductState):
        rates = project_relative_entropy(state.rates, domain)
        return state if np.array_equal(rates, state.rates) else PoissonProductState(rates)

    if isinstance(state, BetaState):
        if domain.kind is DomainKind.ALL:
            return state
        if not domain.is_box or domain.dim != 1:
            raise DomainError("Beta means can only be projected onto intervals")
        m = state.mean
        clipped = min(max(m, float(domain.lower[0])), float(domain.upper[0]))
        if clipped == m:
            return state
        unit = 0.5 * (clipped + 1.0) if state.support is Support.SYMMETRIC else clipped
        a = state.concentration * unit
        b = state.concentration - a
        if a <= 0 or b <= 0:
            raise DomainError(f"projected Beta mean {clipped} lies on the edge of the support")
        return BetaState(a, b, state.support)

    if isinstance(state, DiscreteAtoms):
        if domain.kind is DomainKind.ALL or domain.contains(state.mean, tol=1e-12):
            return state
        raise DomainError("discrete-atom posteriors are only supported when their mean stays in the domain")

    raise DomainError(f"unsupported family {type(state).__name__}")


def is_infinite(value: float) -> bool:
    return math.isinf(value) and value > 0
