"""Seeded synthetic adversaries.

Every adversary declares the constants of its loss class (gradient bound G,
comparator radius D, diameter B, curvature α, EG scale M) and checks each
emitted loss against them.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .domains import ConvexDomain
from .errors import ConfigError, ConstantViolationError
from .losses import ExpConcaveLogLoss, LinearLoss, LogLoss, QuadraticLoss
from .models import AdversaryKind, AdversarySpec, DomainKind, Support

logger = logging.getLogger(__name__)

CONSTANT_TOL = 1e-9
QUADRATIC_JITTER = 0.5


@dataclass(frozen=True)
class Constants:
    G: float
    D: float
    B: float
    alpha: float
    M: float
    norm_ord: float = 2.0


def resolve_constants(spec: AdversarySpec, domain: ConvexDomain, norm_ord: float = 2.0) -> Constants:
    """Fill in undeclared constants from the domain and check declared ones."""
    D_dom = domain.max_norm() if domain.kind is not DomainKind.ALL else math.inf
    D = D_dom if spec.D is None else float(spec.D)
    if D < D_dom - CONSTANT_TOL:
        raise ConfigError(f"declared D = {D} is smaller than the domain radius {D_dom}")
    B = domain.diameter() if spec.B is None else float(spec.B)
    if domain.kind is not DomainKind.ALL and B < domain.diameter() - CONSTANT_TOL:
        raise ConfigError(f"declared B = {B} is smaller than the domain diameter {domain.diameter()}")
    alpha = 1.0 if spec.alpha is None else float(spec.alpha)
    M = 1.0 if spec.M is None else float(spec.M)

    kind = spec.kind
    if spec.G is not None:
        G = float(spec.G)
    elif kind is AdversaryKind.STRONGLY_CONVEX_QUADRATIC:
        G = (alpha + QUADRATIC_JITTER) * B
    elif kind is AdversaryKind.EXP_CONCAVE_LOG:
        G = 1.0 / D
    elif kind is AdversaryKind.BANDIT_LINEAR:
        G = 1.0 / _bandit_scale(domain)
    else:
        G = 1.0
    for name, value in (("G", G), ("alpha", alpha), ("M", M)):
        if not value > 0:
            raise ConfigError(f"constant {name} must be positive, got {value}")
    return Constants(G=G, D=D, B=B, alpha=alpha, M=M, norm_ord=norm_ord)


def _bandit_scale(domain: ConvexDomain) -> float:
    if domain.kind is DomainKind.BALL:
        return domain.radius
    if domain.is_box:
        return float(np.max(domain.upper))
    raise ConfigError("bandit adversaries need a ball or cube domain")


class Adversary:
    """Emits one loss per round, possibly reacting to the learner's point."""

    def __init__(self, spec: AdversarySpec, domain: ConvexDomain, constants: Constants, rng: np.random.Generator):
        self.spec = spec
        self.kind = spec.kind
        self.domain = domain
        self.constants = constants
        self.rng = rng
        self.d = domain.dim
        d = self.d
        # per-run structure: a bias direction, a better expert, a Bernoulli rate
        v = rng.standard_normal(d)
        self.bias = v / np.linalg.norm(v)
        self.best_expert = int(rng.integers(d))
        self.p = float(rng.uniform(0.1, 0.9))
        if self.kind is AdversaryKind.EXP_CONCAVE_LOG:
            self.rho = constants.G / (1.0 + constants.G * constants.D)

    def next_loss(self, w, t: int):
        w = np.asarray(w, dtype=float)
        kind = self.kind
        if kind is AdversaryKind.ZERO:
            loss = LinearLoss(np.zeros(self.d))
        elif kind is AdversaryKind.IID_LINEAR:
            loss = LinearLoss(self.constants.G * (0.3 * self.bias_in_ball() + 0.7 * self._uniform_in_ball()))
        elif kind is AdversaryKind.ADAPTIVE_LINEAR:
            loss = LinearLoss(self._aimed_at(w))
        elif kind is AdversaryKind.STRONGLY_CONVEX_QUADRATIC:
            loss = self._quadratic()
        elif kind is AdversaryKind.EXP_CONCAVE_LOG:
            loss = self._exp_concave()
        elif kind is AdversaryKind.LOG_LOSS_BERNOULLI:
            loss = LogLoss(float(self.rng.random() < self.p), Support.UNIT)
        elif kind is AdversaryKind.EXPERTS_BOUNDED:
            g = self.rng.random(self.d)
            g[self.best_expert] *= 0.8
            loss = LinearLoss(g)
        elif kind is AdversaryKind.EXPERTS_LOW_VARIANCE:
            base = self.rng.uniform(0.2, 0.8)
            g = np.clip(base + 0.05 * self.rng.standard_normal(self.d), 0.0, 1.0)
            g[self.best_expert] = max(base - 0.02, 0.0)
            loss = LinearLoss(g)
        elif kind is AdversaryKind.BANDIT_LINEAR:
            loss = LinearLoss(self._bandit_vector())
        else:
            raise ConfigError(f"unknown adversary {kind}")
        self.validate(loss, w)
        return loss

    # -- loss makers ---------------------------------------------------------------

    def bias_in_ball(self) -> np.ndarray:
        if self.constants.norm_ord == np.inf:
            return np.sign(self.bias)
        return self.bias

    def _uniform_in_ball(self) -> np.ndarray:
        d = self.d
        if self.constants.norm_ord == np.inf:
            return self.rng.uniform(-1.0, 1.0, d)
        z = self.rng.standard_normal(d)
        return z / np.linalg.norm(z) * self.rng.random() ** (1.0 / d)

    def _aimed_at(self, w: np.ndarray) -> np.ndarray:
        G = self.constants.G
        if not np.any(w):
            return G * self.bias_in_ball()
        if self.constants.norm_ord == np.inf:
            return G * np.sign(w)
        return G * w / np.linalg.norm(w)

    def _quadratic(self) -> QuadraticLoss:
        d = self.d
        v = self.rng.standard_normal(d)
        v *= math.sqrt(QUADRATIC_JITTER) / max(np.linalg.norm(v), 1.0)
        A = self.constants.alpha * np.eye(d) + np.outer(v, v)
        z = self.domain.sample(self.rng, 1)[0] if self.domain.kind is not DomainKind.ALL else self.rng.standard_normal(d)
        return QuadraticLoss.of(np.zeros(d), A, z)

    def _exp_concave(self) -> ExpConcaveLogLoss:
        z = 0.5 * self.bias + 0.5 * self._unit_ball_point()
        return ExpConcaveLogLoss(self.rho * z)

    def _unit_ball_point(self) -> np.ndarray:
        z = self.rng.standard_normal(self.d)
        return z / np.linalg.norm(z) * self.rng.random() ** (1.0 / self.d)

    def _bandit_vector(self) -> np.ndarray:
        noise = self._unit_ball_point() if self.domain.kind is DomainKind.BALL else self._l1_point()
        direction = self.bias if self.domain.kind is DomainKind.BALL else self.bias / np.abs(self.bias).sum()
        return self.constants.G * (0.6 * direction + 0.4 * noise)

    def _l1_point(self) -> np.ndarray:
        e = self.rng.exponential(size=self.d + 1)
        return self.rng.choice((-1.0, 1.0), size=self.d) * e[: self.d] / e.sum()

    # -- validation ----------------------------------------------------------------

    def validate(self, loss, w: np.ndarray) -> None:
        c = self.constants
        kind = self.kind
        slack = 1.0 + CONSTANT_TOL
        if kind in (AdversaryKind.EXPERTS_BOUNDED, AdversaryKind.EXPERTS_LOW_VARIANCE):
            if np.any(loss.g < 0) or np.any(loss.g > 1):
                raise ConstantViolationError("expert losses left [0, 1]")
        elif kind is AdversaryKind.BANDIT_LINEAR:
            ord_ = 2 if self.domain.kind is DomainKind.BALL else 1
            if np.linalg.norm(loss.g, ord_) > c.G * slack:
                raise ConstantViolationError(f"bandit loss vector exceeds ‖g‖ <= {c.G}")
        elif isinstance(loss, LinearLoss):
            if np.linalg.norm(loss.g, c.norm_ord) > c.G * slack:
                raise ConstantViolationError(f"gradient norm {np.linalg.norm(loss.g, c.norm_ord):.6g} exceeds G = {c.G}")
        elif isinstance(loss, (QuadraticLoss, ExpConcaveLogLoss)):
            g = loss.gradient(w)
            if np.linalg.norm(g) > c.G * slack:
                raise ConstantViolationError(f"gradient norm {np.linalg.norm(g):.6g} at the played point exceeds G = {c.G}")
