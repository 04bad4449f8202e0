"""EW for online linear optimization with bandit feedback.

The posterior over a ball or centered box has density ∝ exp(⟨w, θ⟩) with
θ = −η Σ g̃_s. Actions are drawn from the mixture (1 − γ)P_t + γR, where R
is John's exploration, and the loss vector is estimated without bias from the
single observed loss.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg

from .domains import ConvexDomain
from .errors import (
    ConfigError,
    DomainError,
    InsufficientExplorationError,
    LossBoundError,
    NumericError,
    SamplerDiagnosticError,
)
from .models import DomainKind

logger = logging.getLogger(__name__)

EIGEN_FLOOR = 1e-10
STEPS_PER_SAMPLE = 50
BURN_IN_STEPS = 200
REBURN_RELATIVE_CHANGE = 0.1
DRIFT_STANDARD_ERRORS = 3.0
LOSS_TOL = 1e-12


# -- exploration -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExplorationSpec:
    """John's exploration: uniform on the sphere of a ball, or on the vertices of a box."""

    kind: str  # sphere | vertices
    dim: int
    scale: float  # ball radius D or box half-width c
    H: np.ndarray

    @property
    def second_moment(self) -> np.ndarray:
        return self.H / self.dim

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "sphere":
            z = rng.standard_normal((n, self.dim))
            return self.scale * z / np.linalg.norm(z, axis=1, keepdims=True)
        return self.scale * rng.choice((-1.0, 1.0), size=(n, self.dim))


def john_exploration(domain: ConvexDomain) -> ExplorationSpec:
    d = domain.dim
    if domain.kind is DomainKind.BALL:
        D = domain.radius
        return ExplorationSpec("sphere", d, D, D * D * np.eye(d))
    if domain.is_box and np.allclose(domain.lower, -domain.upper) and np.allclose(domain.upper, domain.upper[0]):
        c = float(domain.upper[0])
        return ExplorationSpec("vertices", d, c, d * c * c * np.eye(d))
    raise DomainError("bandit EW supports the L2 ball and centered cubes only")


# -- posterior and its sampler -------------------------------------------------------


@dataclass
class BanditPosterior:
    """Log-linear posterior on a ball or cube, with an ensemble of hit-and-run chains.

    Chains warm-start from the previous round; a fresh burn-in runs when θ has
    moved by more than 10% since the last one.
    """

    domain: ConvexDomain
    theta: np.ndarray
    n_chains: int = 4096
    chains: np.ndarray | None = None
    burn_theta: np.ndarray | None = None
    flags: int = 0
    draws: int = 0

    @classmethod
    def start(cls, domain: ConvexDomain, n_chains: int = 4096) -> BanditPosterior:
        john_exploration(domain)
        return cls(domain, np.zeros(domain.dim), n_chains)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def update(self, g_tilde, eta: float) -> None:
        self.theta = self.theta - eta * np.asarray(g_tilde, dtype=float)

    def samples(self, rng: np.random.Generator) -> np.ndarray:
        """Advance every chain and return the ensemble, shape (n_chains, d)."""
        d = self.dim
        if self.chains is None:
            self.chains = np.tile(self.domain.center(), (self.n_chains, 1))
            self._burn(rng)
        elif self._needs_burn_in():
            self._burn(rng)
        half = hit_and_run(self.chains, self.theta, self.domain, STEPS_PER_SAMPLE * d // 2, rng)
        self.chains = hit_and_run(half, self.theta, self.domain, STEPS_PER_SAMPLE * d - STEPS_PER_SAMPLE * d // 2, rng)
        self._check_drift(half)
        return self.chains

    def _needs_burn_in(self) -> bool:
        ref = self.burn_theta
        change = float(np.linalg.norm(self.theta - ref))
        scale = float(np.linalg.norm(ref))
        return change > REBURN_RELATIVE_CHANGE * scale if scale > 0 else change > 0

    def _burn(self, rng: np.random.Generator) -> None:
        self.chains = hit_and_run(self.chains, self.theta, self.domain, BURN_IN_STEPS * self.dim, rng)
        self.burn_theta = self.theta.copy()

    def _check_drift(self, mid: np.ndarray) -> None:
        self.draws += 1
        end = self.chains
        n = end.shape[0]
        if n < 2:
            return
        # standard error of the difference of the two ensemble means
        se = np.sqrt((mid.var(axis=0, ddof=1) + end.var(axis=0, ddof=1)) / n)
        drift = np.abs(end.mean(axis=0) - mid.mean(axis=0))
        if np.any(drift >= DRIFT_STANDARD_ERRORS * np.maximum(se, 1e-15)):
            self.flags += 1
            logger.debug("hit-and-run drift %s exceeds %.0f standard errors", drift, DRIFT_STANDARD_ERRORS)

    @property
    def flag_rate(self) -> float:
        return self.flags / self.draws if self.draws else 0.0

    def check_flags(self, tolerance: float) -> None:
        if self.draws and self.flag_rate > tolerance:
            raise SamplerDiagnosticError(
                f"sampler diagnostics failed in {self.flags}/{self.draws} rounds (tolerance {tolerance:.0%})"
            )


def hit_and_run(points, theta, domain: ConvexDomain, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Hit-and-run for density ∝ exp(⟨w, θ⟩) on a ball or box, run on every row of `points`."""
    x = np.array(points, dtype=float)
    n, d = x.shape
    for _ in range(steps):
        u = rng.standard_normal((n, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        lo, hi = _chord(x, u, domain)
        length = np.maximum(hi - lo, 0.0)
        s = lo + truncated_exponential(u @ theta, length, rng.random(n))
        x = x + s[:, None] * u
    return x


def truncated_exponential(rate, length, uniform) -> np.ndarray:
    """Inverse-CDF draw from density ∝ exp(rate · s) on [0, length]."""
    rate = np.asarray(rate, dtype=float)
    length = np.asarray(length, dtype=float)
    U = np.asarray(uniform, dtype=float)
    cl = rate * length
    out = U * length
    pos = cl > 1e-12
    neg = cl < -1e-12
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.where(pos, length + np.log1p(-(1.0 - U) * (-np.expm1(-cl))) / rate, out)
        out = np.where(neg, np.log1p(U * np.expm1(cl)) / rate, out)
    return np.clip(out, 0.0, length)


def _chord(x: np.ndarray, u: np.ndarray, domain: ConvexDomain) -> tuple[np.ndarray, np.ndarray]:
    if domain.kind is DomainKind.BALL:
        b = np.einsum("ij,ij->i", x, u)
        c = np.einsum("ij,ij->i", x, x) - domain.radius**2
        root = np.sqrt(np.maximum(b * b - c, 0.0))
        return -b - root, -b + root
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (domain.lower - x) / u
        t2 = (domain.upper - x) / u
    t_lo = np.where(u == 0, -np.inf, np.minimum(t1, t2))
    t_hi = np.where(u == 0, np.inf, np.maximum(t1, t2))
    return t_lo.max(axis=1), t_hi.min(axis=1)


# -- exact moments -------------------------------------------------------------------


def exact_moments(domain: ConvexDomain, theta) -> tuple[np.ndarray, np.ndarray]:
    """Mean and E[wwᵀ] of the log-linear density on a ball or centered cube."""
    theta = np.asarray(theta, dtype=float)
    if domain.kind is DomainKind.BALL:
        return _ball_moments(domain.radius, theta)
    spec = john_exploration(domain)
    return _box_moments(spec.scale, theta)


def _box_moments(c: float, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = c * theta
    small = np.abs(z) < 1e-4
    with np.errstate(divide="ignore", invalid="ignore"):
        mean = np.where(small, c * (z / 3.0 - z**3 / 45.0), c * (1.0 / np.tanh(z) - 1.0 / z))
        sq = np.where(small, c * c / 3.0 + 2.0 * c**4 * theta**2 / 45.0, c * c - 2.0 * mean / theta)
    S = np.outer(mean, mean)
    np.fill_diagonal(S, sq)
    return mean, S


def _ball_moments(D: float, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = theta.shape[0]
    r = float(np.linalg.norm(theta))
    if r == 0.0:
        return np.zeros(d), D * D / (d + 2) * np.eye(d)
    direction = theta / r
    k = 0.5 * (d - 1)

    def weight(s: float) -> float:
        return math.exp(r * (s - D)) * max(D * D - s * s, 0.0) ** k

    def moment(fn) -> float:
        val, _ = integrate.quad(
            lambda s: fn(s) * weight(s), -D, D, points=[D - min(2.0 * D, 10.0 / r)], limit=200, epsabs=0.0, epsrel=1e-12
        )
        return val

    Z = moment(lambda s: 1.0)
    m1 = moment(lambda s: s) / Z
    m2 = moment(lambda s: s * s) / Z
    outer = np.outer(direction, direction)
    S = m2 * outer + (D * D - m2) / (d + 1) * (np.eye(d) - outer)
    return m1 * direction, S


# -- per-round operations ---------------------------------------------------------------


def sample_action(
    posterior: BanditPosterior,
    exploration: ExplorationSpec,
    gamma: float,
    rng: np.random.Generator,
    samples: np.ndarray | None = None,
) -> np.ndarray:
    """Draw w_t ∼ (1 − γ)P_t + γR."""
    if not 0.0 < gamma <= 1.0:
        raise ConfigError(f"exploration weight must lie in (0, 1], got {gamma}")
    if rng.random() < gamma:
        return exploration.sample(rng, 1)[0]
    pool = posterior.samples(rng) if samples is None else samples
    return pool[int(rng.integers(pool.shape[0]))].copy()


def second_moment(
    posterior: BanditPosterior,
    exploration: ExplorationSpec,
    gamma: float,
    n_samples: int,
    rng: np.random.Generator,
    method: str = "monte-carlo",
    samples: np.ndarray | None = None,
) -> np.ndarray:
    """E_{Q_t}[wwᵀ] = (1 − γ)E_{P_t}[wwᵀ] + γH/d, floored and checked for exploration."""
    if method == "exact":
        _, S_post = exact_moments(posterior.domain, posterior.theta)
    else:
        if n_samples < 1000:
            raise ConfigError(f"need at least 1000 posterior samples, got {n_samples}")
        X = posterior.samples(rng) if samples is None else samples
        X = X[:n_samples]
        S_post = X.T @ X / X.shape[0]
    S = (1.0 - gamma) * S_post + gamma * exploration.second_moment
    S = 0.5 * (S + S.T)
    evals, evecs = np.linalg.eigh(S)
    floor = 0.5 * (gamma / exploration.dim) * float(np.linalg.eigvalsh(exploration.H)[0])
    if evals[0] < floor:
        raise InsufficientExplorationError(
            f"second moment has eigenvalue {evals[0]:.3g} below (γ/2d)λ_min(H) = {floor:.3g}"
        )
    evals = np.maximum(evals, EIGEN_FLOOR)
    return (evecs * evals) @ evecs.T


def estimate_loss_vector(w_t, observed: float, S) -> np.ndarray:
    """g̃ = observed · S⁻¹ w_t."""
    if abs(observed) > 1.0 + LOSS_TOL:
        raise LossBoundError(f"observed loss {observed} outside [-1, 1]")
    try:
        x = linalg.solve(np.asarray(S, dtype=float), np.asarray(w_t, dtype=float), assume_a="pos")
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericError("singular second-moment matrix") from e
    return observed * x


def tuned_parameters(d: int, T: int, nu: float | None = None) -> tuple[float, float]:
    """η = √(ν ln T/(3dT)) with ν = d by default; γ = ηd capped at ½."""
    if T < 2:
        raise ConfigError("bandit tuning needs T >= 2")
    nu = float(d) if nu is None else float(nu)
    eta = math.sqrt(nu * math.log(T) / (3.0 * d * T))
    gamma = eta * d
    if gamma >= 1.0:
        raise ConfigError(f"γ = ηd = {gamma:.3g} >= 1; horizon T={T} is too short for d={d}")
    return eta, min(gamma, 0.5)


@dataclass
class BanditRound:
    action: np.ndarray
    observed: float
    g_tilde: np.ndarray
    max_scaled_estimate: float


class BanditLearner:
    """Sampling-based EW with John's exploration on one seeded stream."""

    def __init__(
        self,
        domain: ConvexDomain,
        eta: float,
        gamma: float,
        rng: np.random.Generator,
        n_samples: int = 4096,
        moment_method: str = "monte-carlo",
    ) -> None:
        self.domain = domain
        self.eta = eta
        self.gamma = gamma
        self.rng = rng
        self.n_samples = n_samples
        self.moment_method = moment_method
        self.exploration = john_exploration(domain)
        chains = n_samples if moment_method == "monte-carlo" else min(n_samples, 64)
        self.posterior = BanditPosterior.start(domain, chains)
        self.boundedness_violations = 0

        self._pending: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def act(self) -> np.ndarray:
        """Draw this round's action; the matching `observe` must follow."""
        pool = self.posterior.samples(self.rng)
        S = second_moment(
            self.posterior, self.exploration, self.gamma, self.n_samples, self.rng, self.moment_method, samples=pool
        )
        w = sample_action(self.posterior, self.exploration, self.gamma, self.rng, samples=pool)
        self._pending = (w, S, pool)
        return w

    def observe(self, observed: float) -> BanditRound:
        if self._pending is None:
            raise NumericError("observe() called before act()")
        w, S, pool = self._pending
        self._pending = None
        g_tilde = estimate_loss_vector(w, observed, S)
        scaled = self.eta * float(np.max(np.abs(pool @ g_tilde)))
        if scaled > 1.05:
            self.boundedness_violations += 1
            logger.debug("η|⟨w, g̃⟩| = %.3f exceeds 1", scaled)
        self.posterior.update(g_tilde, self.eta)
        return BanditRound(w, float(observed), g_tilde, scaled)
