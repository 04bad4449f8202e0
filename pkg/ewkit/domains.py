from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from .errors import DomainError, NumericError
from .models import DomainKind, DomainSpec

logger = logging.getLogger(__name__)

PROJECTION_TOL = 1e-10
_MAX_SWEEPS = 10_000


@dataclass(frozen=True, eq=False)
class ConvexDomain:
    """The action set W.

    Balls and L1 balls are centered at the origin. Boxes and intervals carry
    explicit bounds; an interval is a one-dimensional box.
    """

    kind: DomainKind
    dim: int
    radius: float = math.inf
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise DomainError(f"domain dimension must be >= 1, got {self.dim}")
        if self.kind in (DomainKind.BALL, DomainKind.L1_BALL) and not (0 < self.radius < math.inf):
            raise DomainError(f"{self.kind.value} needs a finite positive radius, got {self.radius}")
        if self.kind in (DomainKind.BOX, DomainKind.INTERVAL):
            if self.lower is None or self.upper is None:
                raise DomainError("box domains need lower and upper bounds")
            if self.lower.shape != (self.dim,) or self.upper.shape != (self.dim,):
                raise DomainError("box bounds must have shape (dim,)")
            if np.any(self.lower > self.upper):
                raise DomainError("empty box: lower > upper")
        if self.kind is DomainKind.INTERVAL and self.dim != 1:
            raise DomainError("intervals are one-dimensional")

    # -- constructors -------------------------------------------------------

    @classmethod
    def all_space(cls, dim: int) -> ConvexDomain:
        return cls(DomainKind.ALL, dim)

    @classmethod
    def ball(cls, dim: int, radius: float = 1.0) -> ConvexDomain:
        return cls(DomainKind.BALL, dim, radius=float(radius))

    @classmethod
    def l1_ball(cls, dim: int, radius: float = 1.0) -> ConvexDomain:
        return cls(DomainKind.L1_BALL, dim, radius=float(radius))

    @classmethod
    def box(cls, lower, upper) -> ConvexDomain:
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        return cls(DomainKind.BOX, lo.shape[0], lower=lo, upper=hi)

    @classmethod
    def centered_box(cls, dim: int, half_width: float = 1.0) -> ConvexDomain:
        c = float(half_width)
        return cls.box(np.full(dim, -c), np.full(dim, c))

    @classmethod
    def simplex(cls, dim: int) -> ConvexDomain:
        return cls(DomainKind.SIMPLEX, dim)

    @classmethod
    def interval(cls, lo: float, hi: float) -> ConvexDomain:
        return cls(DomainKind.INTERVAL, 1, lower=np.array([float(lo)]), upper=np.array([float(hi)]))

    @classmethod
    def from_spec(cls, spec: DomainSpec, dim: int) -> ConvexDomain:
        if spec.kind is DomainKind.ALL:
            return cls.all_space(dim)
        if spec.kind is DomainKind.BALL:
            return cls.ball(dim, spec.radius)
        if spec.kind is DomainKind.L1_BALL:
            return cls.l1_ball(dim, spec.radius)
        if spec.kind is DomainKind.BOX:
            return cls.centered_box(dim, spec.radius)
        if spec.kind is DomainKind.SIMPLEX:
            return cls.simplex(dim)
        if spec.kind is DomainKind.INTERVAL:
            return cls.interval(0.0, spec.radius)
        raise DomainError(f"unsupported domain kind: {spec.kind}")

    # -- geometry -----------------------------------------------------------

    @property
    def is_box(self) -> bool:
        return self.kind in (DomainKind.BOX, DomainKind.INTERVAL)

    def contains(self, w, tol: float = 1e-9) -> bool:
        w = np.asarray(w, dtype=float)
        if self.kind is DomainKind.ALL:
            return bool(np.all(np.isfinite(w)))
        if self.kind is DomainKind.BALL:
            return float(np.linalg.norm(w)) <= self.radius + tol
        if self.kind is DomainKind.L1_BALL:
            return float(np.abs(w).sum()) <= self.radius + tol
        if self.is_box:
            return bool(np.all(w >= self.lower - tol) and np.all(w <= self.upper + tol))
        # simplex
        return bool(np.all(w >= -tol) and abs(float(w.sum()) - 1.0) <= tol)

    def contains_rows(self, points, tol: float = 1e-9) -> np.ndarray:
        """Row-wise `contains` for an (n, dim) array."""
        X = np.asarray(points, dtype=float)
        if self.kind is DomainKind.ALL:
            return np.all(np.isfinite(X), axis=1)
        if self.kind is DomainKind.BALL:
            return np.linalg.norm(X, axis=1) <= self.radius + tol
        if self.kind is DomainKind.L1_BALL:
            return np.abs(X).sum(axis=1) <= self.radius + tol
        if self.is_box:
            return np.all((X >= self.lower - tol) & (X <= self.upper + tol), axis=1)
        return np.all(X >= -tol, axis=1) & (np.abs(X.sum(axis=1) - 1.0) <= tol)

    def max_norm(self) -> float:
        """max ‖u‖₂ over the domain (the constant D)."""
        if self.kind is DomainKind.ALL:
            return math.inf
        if self.kind in (DomainKind.BALL, DomainKind.L1_BALL):
            return self.radius
        if self.is_box:
            return float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))
        return 1.0

    def diameter(self) -> float:
        """max ‖w − u‖₂ over pairs in the domain (the constant B)."""
        if self.kind is DomainKind.ALL:
            return math.inf
        if self.kind in (DomainKind.BALL, DomainKind.L1_BALL):
            return 2.0 * self.radius
        if self.is_box:
            return float(np.linalg.norm(self.upper - self.lower))
        return math.sqrt(2.0) if self.dim > 1 else 0.0

    def center(self) -> np.ndarray:
        if self.is_box:
            return 0.5 * (self.lower + self.upper)
        if self.kind is DomainKind.SIMPLEX:
            return np.full(self.dim, 1.0 / self.dim)
        return np.zeros(self.dim)

    # -- Euclidean projection ----------------------------------------------

    def project(self, w) -> np.ndarray:
        w = np.array(w, dtype=float)
        if self.kind is DomainKind.ALL:
            return w
        if self.kind is DomainKind.BALL:
            norm = float(np.linalg.norm(w))
            return w if norm <= self.radius else w * (self.radius / norm)
        if self.kind is DomainKind.L1_BALL:
            return _project_l1_ball(w, self.radius)
        if self.is_box:
            return np.clip(w, self.lower, self.upper)
        return _project_simplex(w)

    # -- Mahalanobis projection --------------------------------------------

    def project_mahalanobis(self, w, precision, tol: float = PROJECTION_TOL) -> np.ndarray:
        """argmin_{u ∈ W} (u − w)ᵀ A (u − w) for a positive-definite A."""
        w = np.array(w, dtype=float)
        A = np.asarray(precision, dtype=float)
        if A.shape != (self.dim, self.dim):
            raise DomainError(f"precision has shape {A.shape}, expected {(self.dim, self.dim)}")
        if self.kind is DomainKind.ALL or self.contains(w, tol=0.0):
            return w
        if _is_isotropic(A):
            return self.project(w)
        if self.kind is DomainKind.BALL:
            return _mahalanobis_ball(w, A, self.radius, tol)
        if self.is_box:
            return _mahalanobis_box(w, A, self.lower, self.upper, tol)
        if self.kind is DomainKind.SIMPLEX:
            return _mahalanobis_simplex(w, A, tol)
        raise DomainError(f"Mahalanobis projection onto {self.kind.value} is not supported")

    # -- sampling -----------------------------------------------------------

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n points drawn uniformly from the domain, shape (n, dim)."""
        d = self.dim
        if self.kind is DomainKind.ALL:
            raise DomainError("cannot sample uniformly from all of R^d")
        if self.kind is DomainKind.BALL:
            z = rng.standard_normal((n, d))
            z /= np.linalg.norm(z, axis=1, keepdims=True)
            return self.radius * z * rng.random((n, 1)) ** (1.0 / d)
        if self.kind is DomainKind.L1_BALL:
            e = rng.exponential(size=(n, d + 1))
            signs = rng.choice((-1.0, 1.0), size=(n, d))
            return self.radius * signs * e[:, :d] / e.sum(axis=1, keepdims=True)
        if self.is_box:
            return self.lower + (self.upper - self.lower) * rng.random((n, d))
        return rng.dirichlet(np.ones(d), size=n)

    def comparator_grid(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Candidate comparators: a regular mesh for d <= 2, random points otherwise.

        Vertices (where the domain has them) are always included.
        """
        d = self.dim
        if d <= 2 and self.kind is not DomainKind.ALL:
            per_axis = max(2, int(round(n ** (1.0 / d))))
            if self.is_box:
                lo, hi = self.lower, self.upper
            elif self.kind is DomainKind.SIMPLEX:
                lo, hi = np.zeros(d), np.ones(d)
            else:
                lo, hi = np.full(d, -self.radius), np.full(d, self.radius)
            axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(d)]
            mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
            if self.kind is DomainKind.SIMPLEX:
                mesh = np.array([self.project(p) for p in mesh])
            else:
                mesh = mesh[self.contains_rows(mesh)]
            points = mesh
        else:
            points = self.sample(rng, n)
        return np.vstack([points, self.vertices()]) if self.vertices().size else points

    def vertices(self) -> np.ndarray:
        d = self.dim
        if self.kind is DomainKind.SIMPLEX:
            return np.eye(d)
        if self.kind is DomainKind.L1_BALL:
            return self.radius * np.vstack([np.eye(d), -np.eye(d)])
        if self.is_box and d <= 12:
            corners = itertools.product(*[(self.lower[i], self.upper[i]) for i in range(d)])
            return np.array(list(corners), dtype=float)
        return np.empty((0, d))

    def linear_minimizer(self, g) -> np.ndarray:
        """Exact argmin_{u ∈ W} ⟨u, g⟩."""
        g = np.asarray(g, dtype=float)
        if self.kind is DomainKind.ALL:
            raise DomainError("linear losses are unbounded below on R^d")
        if self.kind is DomainKind.BALL:
            norm = float(np.linalg.norm(g))
            return np.zeros(self.dim) if norm == 0.0 else -self.radius * g / norm
        if self.kind is DomainKind.L1_BALL:
            u = np.zeros(self.dim)
            i = int(np.argmax(np.abs(g)))
            if g[i] != 0.0:
                u[i] = -self.radius * math.copysign(1.0, g[i])
            return u
        if self.is_box:
            return np.where(g > 0, self.lower, self.upper)
        u = np.zeros(self.dim)
        u[int(np.argmin(g))] = 1.0
        return u


def domain_from_spec(spec: DomainSpec, dim: int) -> ConvexDomain:
    return ConvexDomain.from_spec(spec, dim)


def _is_isotropic(A: np.ndarray) -> bool:
    scale = float(A[0, 0])
    return scale > 0 and bool(np.all(A == scale * np.eye(A.shape[0])))


def _project_simplex(w: np.ndarray) -> np.ndarray:
    # sort-based Euclidean projection
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, w.size + 1)
    rho = int(np.nonzero(u - css / idx > 0)[0][-1])
    tau = css[rho] / (rho + 1.0)
    return np.maximum(w - tau, 0.0)


def _project_l1_ball(w: np.ndarray, radius: float) -> np.ndarray:
    if np.abs(w).sum() <= radius:
        return w
    v = _project_simplex(np.abs(w) / radius) * radius
    return np.sign(w) * v


def _mahalanobis_ball(w: np.ndarray, A: np.ndarray, radius: float, tol: float) -> np.ndarray:
    # (A + λI) u = A w with λ chosen so that ‖u‖ = radius
    evals, Q = linalg.eigh(A)
    c = Q.T @ w

    def excess(lam: float) -> float:
        return float(np.linalg.norm(evals * c / (evals + lam))) - radius

    lam_hi = float(evals.max()) * float(np.linalg.norm(c)) / radius
    lam = optimize.brentq(excess, 0.0, lam_hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=1000)
    u = Q @ (evals * c / (evals + lam))
    if abs(float(np.linalg.norm(u)) - radius) > max(tol, 1e-12 * radius) * 10:
        raise NumericError(f"ball projection did not converge: ‖u‖={np.linalg.norm(u)!r}, radius={radius!r}")
    return u


def _mahalanobis_box(w: np.ndarray, A: np.ndarray, lo: np.ndarray, hi: np.ndarray, tol: float) -> np.ndarray:
    # projected Gauss-Seidel sweeps on ½(u − w)ᵀA(u − w)
    u = np.clip(w, lo, hi)
    diag = np.diag(A)
    for sweep in range(_MAX_SWEEPS):
        max_delta = 0.0
        for i in range(u.size):
            grad_i = float(A[i] @ (u - w))
            new = min(max(u[i] - grad_i / diag[i], lo[i]), hi[i])
            max_delta = max(max_delta, abs(new - u[i]))
            u[i] = new
        if max_delta < tol:
            logger.debug("box projection converged after %d sweeps", sweep + 1)
            return u
    raise NumericError(f"box projection did not converge in {_MAX_SWEEPS} sweeps")


def _mahalanobis_simplex(w: np.ndarray, A: np.ndarray, tol: float) -> np.ndarray:
    d = w.size
    res = optimize.minimize(
        lambda u: 0.5 * float((u - w) @ A @ (u - w)),
        _project_simplex(w),
        jac=lambda u: A @ (u - w),
        method="SLSQP",
        bounds=[(0.0, 1.0)] * d,
        constraints=[{"type": "eq", "fun": lambda u: u.sum() - 1.0, "jac": lambda u: np.ones(d)}],
        options={"ftol": max(tol * tol, 1e-15), "maxiter": 1000},
    )
    x = res.x
    if not res.success:
        # SLSQP reports line-search stalls at the optimum as failures
        if np.min(x) < -1e-8 or abs(float(x.sum()) - 1.0) > 1e-8:
            raise NumericError(f"simplex projection failed: {res.message}")
        logger.debug("simplex projection: %s", res.message)
    x = np.maximum(x, 0.0)
    return x / x.sum()
