"""Best fixed action in hindsight, tracked round by round.

Closed-form minimizers are used wherever they exist: linear losses over the
domain, sums of quadratics, the empirical frequency for log loss, the best
expert. Other losses fall back to a candidate grid, polished with SLSQP on
request.
"""
from __future__ import annotations

import logging

import numpy as np
from scipy import linalg, optimize
from scipy.special import xlogy

from .domains import ConvexDomain
from .errors import IncompatibleLossError
from .losses import ExpConcaveLogLoss, LinearLoss, LogLoss, QuadraticLoss
from .models import DomainKind

logger = logging.getLogger(__name__)


class LinearComparator:
    """argmin_u ⟨u, Σ g_s⟩ over the domain."""

    def __init__(self, domain: ConvexDomain) -> None:
        self.domain = domain
        self.grad_sum = np.zeros(domain.dim)

    def update(self, loss: LinearLoss) -> None:
        self.grad_sum = self.grad_sum + loss.g

    @property
    def point(self) -> np.ndarray:
        return self.domain.linear_minimizer(self.grad_sum)

    @property
    def cum_loss(self) -> float:
        return float(self.point @ self.grad_sum)


class ExpertComparator(LinearComparator):
    """Best expert, plus the uniform mixture of the two best."""

    @property
    def best(self) -> int:
        return int(np.argmin(self.grad_sum))

    @property
    def cum_loss(self) -> float:
        return float(self.grad_sum.min())

    def top_two(self) -> np.ndarray:
        return np.argsort(self.grad_sum, kind="stable")[:2]


class QuadraticComparator:
    """Minimizer of Σ ½(u − z_s)ᵀA_s(u − z_s) + ⟨u − a_s, g_s⟩ over the domain."""

    def __init__(self, domain: ConvexDomain) -> None:
        d = domain.dim
        self.domain = domain
        self.quad = np.zeros((d, d))
        self.lin = np.zeros(d)
        self.const = 0.0

    def update(self, loss: QuadraticLoss) -> None:
        self.quad = self.quad + loss.M
        self.lin = self.lin + loss.linear_coefficient
        self.const += loss.constant

    @property
    def point(self) -> np.ndarray:
        free = linalg.solve(self.quad, -self.lin, assume_a="pos")
        return self.domain.project_mahalanobis(free, self.quad)

    @property
    def cum_loss(self) -> float:
        u = self.point
        return float(0.5 * u @ self.quad @ u + self.lin @ u + self.const)


class LogLossComparator:
    """Empirical frequency of ones; the exact minimizer of cumulative log loss."""

    def __init__(self) -> None:
        self.ones = 0.0
        self.t = 0

    def update(self, loss: LogLoss) -> None:
        self.ones += loss.outcome
        self.t += 1

    @property
    def point(self) -> np.ndarray:
        return np.array([self.ones / self.t if self.t else 0.5])

    @property
    def cum_loss(self) -> float:
        if self.t == 0:
            return 0.0
        p = self.ones / self.t
        zeros = self.t - self.ones
        return float(-xlogy(self.ones, p) - xlogy(zeros, 1.0 - p))


class GridComparator:
    """Cumulative loss at every candidate point; the best candidate wins."""

    def __init__(self, domain: ConvexDomain, candidates: np.ndarray) -> None:
        self.domain = domain
        self.candidates = np.asarray(candidates, dtype=float)
        self.totals = np.zeros(self.candidates.shape[0])
        self.history: list[ExpConcaveLogLoss] = []

    def update(self, loss) -> None:
        if isinstance(loss, ExpConcaveLogLoss):
            m = 1.0 + self.candidates @ loss.x
            with np.errstate(divide="ignore", invalid="ignore"):
                self.totals = self.totals + np.where(m > 0, -np.log(np.where(m > 0, m, 1.0)), np.inf)
        else:
            self.totals = self.totals + np.array([loss.value(c) for c in self.candidates])
        self.history.append(loss)

    @property
    def point(self) -> np.ndarray:
        return self.candidates[int(np.argmin(self.totals))]

    @property
    def cum_loss(self) -> float:
        return float(self.totals.min())

    def polished(self) -> tuple[np.ndarray, float]:
        """Refine the best candidate by SLSQP; returns the better of the two."""
        start = self.point
        best = self.cum_loss

        def total(u):
            return float(sum(f.value(u) for f in self.history))

        def grad(u):
            return np.sum([f.gradient(u) for f in self.history], axis=0)

        constraints = []
        if self.domain.kind is DomainKind.BALL:
            r2 = self.domain.radius**2
            constraints.append({"type": "ineq", "fun": lambda u: r2 - u @ u, "jac": lambda u: -2.0 * u})
        bounds = list(zip(self.domain.lower, self.domain.upper)) if self.domain.is_box else None
        try:
            res = optimize.minimize(total, start, jac=grad, method="SLSQP", bounds=bounds, constraints=constraints)
        except (ValueError, ArithmeticError) as e:
            logger.debug("comparator polish failed: %s", e)
            return start, best
        u = self.domain.project(res.x)
        value = total(u)
        if np.isfinite(value) and value < best:
            return u, value
        return start, best


def make_comparator(sample_loss, domain: ConvexDomain, grid_size: int, rng: np.random.Generator, experts: bool = False):
    if isinstance(sample_loss, LinearLoss):
        return ExpertComparator(domain) if experts else LinearComparator(domain)
    if isinstance(sample_loss, QuadraticLoss):
        return QuadraticComparator(domain)
    if isinstance(sample_loss, LogLoss):
        return LogLossComparator()
    if isinstance(sample_loss, ExpConcaveLogLoss):
        return GridComparator(domain, domain.comparator_grid(grid_size, rng))
    raise IncompatibleLossError(f"no comparator for {type(sample_loss).__name__}")
