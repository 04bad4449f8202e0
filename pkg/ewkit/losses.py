"""Per-round loss descriptors.

Surrogates fed to EW (linear, quadratic, log, expert-regret) and the true
losses some adversaries emit share one small interface: ``value(w)`` and,
where it exists, ``gradient(w)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Union

import numpy as np
from scipy.special import xlogy

from .errors import LossBoundError, NumericError
from .models import Support

PSD_TOL = 1e-10


class Loss(Protocol):
    def value(self, w) -> float: ...


@dataclass(frozen=True, eq=False)
class LinearLoss:
    """ℓ(w) = ⟨w, g⟩."""

    g: np.ndarray

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.g)):
            raise NumericError("linear loss has non-finite entries")

    @classmethod
    def of(cls, g) -> LinearLoss:
        return cls(np.atleast_1d(np.asarray(g, dtype=float)).copy())

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    def value(self, w) -> float:
        return float(self.g @ np.asarray(w, dtype=float))

    def gradient(self, w) -> np.ndarray:
        return self.g


@dataclass(frozen=True, eq=False)
class QuadraticLoss:
    """ℓ(w) = ⟨w − a, g⟩ + ½(w − a)ᵀM(w − a) around the anchor a.

    `rank_one` holds v when M = v vᵀ so precision updates can use
    Sherman-Morrison instead of a fresh inverse.
    """

    g: np.ndarray
    M: np.ndarray
    anchor: np.ndarray
    rank_one: np.ndarray | None = None

    def __post_init__(self) -> None:
        d = self.g.shape[0]
        if self.M.shape != (d, d) or self.anchor.shape != (d,):
            raise NumericError("quadratic loss parts have inconsistent shapes")
        if np.max(np.abs(self.M - self.M.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(self.M))):
            raise NumericError("curvature matrix is not symmetric")
        lam_min = float(np.linalg.eigvalsh(self.M)[0])
        if lam_min < -PSD_TOL:
            raise NumericError(f"curvature matrix is not PSD (smallest eigenvalue {lam_min:.3g})")

    @classmethod
    def of(cls, g, M, anchor=None, rank_one=None) -> QuadraticLoss:
        g = np.atleast_1d(np.asarray(g, dtype=float)).copy()
        M = np.atleast_2d(np.asarray(M, dtype=float))
        M = 0.5 * (M + M.T)
        anchor = np.zeros_like(g) if anchor is None else np.atleast_1d(np.asarray(anchor, dtype=float)).copy()
        v = None if rank_one is None else np.atleast_1d(np.asarray(rank_one, dtype=float)).copy()
        return cls(g, M, anchor, v)

    @classmethod
    def isotropic(cls, g, alpha: float, anchor) -> QuadraticLoss:
        g = np.atleast_1d(np.asarray(g, dtype=float))
        return cls.of(g, alpha * np.eye(g.shape[0]), anchor)

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    @property
    def linear_coefficient(self) -> np.ndarray:
        """b in the expanded form ½wᵀMw + ⟨b, w⟩ + c."""
        return self.g - self.M @ self.anchor

    @property
    def constant(self) -> float:
        a = self.anchor
        return float(-a @ self.g + 0.5 * a @ self.M @ a)

    def value(self, w) -> float:
        z = np.asarray(w, dtype=float) - self.anchor
        return float(z @ self.g + 0.5 * z @ self.M @ z)

    def gradient(self, w) -> np.ndarray:
        return self.g + self.M @ (np.asarray(w, dtype=float) - self.anchor)


@dataclass(frozen=True)
class LogLoss:
    """Log loss of a probability forecast for an outcome x ∈ [0, 1].

    The forecast w lives on the Beta support: w itself on [0, 1], or
    (1 + w)/2 on [−1, 1].
    """

    outcome: float
    support: Support = Support.UNIT

    def __post_init__(self) -> None:
        if not 0.0 <= self.outcome <= 1.0:
            raise LossBoundError(f"log-loss outcome {self.outcome} outside [0, 1]")

    def probability(self, w) -> float:
        w = float(np.asarray(w, dtype=float).reshape(-1)[0])
        return 0.5 * (1.0 + w) if self.support is Support.SYMMETRIC else w

    def value(self, w) -> float:
        p = self.probability(w)
        x = self.outcome
        return float(-xlogy(x, p) - xlogy(1.0 - x, 1.0 - p))


@dataclass(frozen=True, eq=False)
class ExpConcaveLogLoss:
    """f(w) = −ln(1 + ⟨w, x⟩); 1-exp-concave wherever 1 + ⟨w, x⟩ > 0."""

    x: np.ndarray

    def value(self, w) -> float:
        m = 1.0 + float(self.x @ np.asarray(w, dtype=float))
        if m <= 0:
            return float("inf")
        return -float(np.log(m))

    def gradient(self, w) -> np.ndarray:
        m = 1.0 + float(self.x @ np.asarray(w, dtype=float))
        if m <= 0:
            raise LossBoundError("log argument is nonpositive")
        return -self.x / m


@dataclass(frozen=True, eq=False)
class ExpertRegretLoss:
    """Instantaneous regrets r(i) = ⟨w, g⟩ − g_i on the (η, i) product space."""

    r: np.ndarray

    @classmethod
    def from_round(cls, weights, losses) -> ExpertRegretLoss:
        weights = np.asarray(weights, dtype=float)
        losses = np.asarray(losses, dtype=float)
        return cls(float(weights @ losses) - losses)

    def prod_log_factors(self, etas) -> np.ndarray:
        """ln(1 + η r(i)) for every grid η (rows) and expert (columns)."""
        x = np.outer(etas, self.r)
        if np.any(1.0 + x <= 0):
            raise LossBoundError("1 + η r ≤ 0; grid η must not exceed 1/2")
        return np.log1p(x)

    def squint_log_factors(self, etas) -> np.ndarray:
        x = np.outer(etas, self.r)
        return x - x**2


SurrogateLoss = Union[LinearLoss, QuadraticLoss, LogLoss, ExpertRegretLoss]
