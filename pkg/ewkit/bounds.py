"""Closed-form regret bounds, one evaluator per algorithm.

`evaluate_bound` looks the algorithm up in a registry and checks that every
constant the bound needs is present; the formula functions themselves are
plain and pure.
"""
from __future__ import annotations

import math
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import MissingConstantError
from .ew import Schedule, lemma1_bound
from .models import AlgorithmId, Flavor


def kt_bound(T: int) -> float:
    """ln(2√T)."""
    return math.log(2.0 * math.sqrt(T))


def egpm_bound(T: int, d: int, G: float, M: float = 1.0, eta: float | None = None) -> float:
    """GM√(2T ln 2d) at the tuned η, or ln(2d)/η + ηTM²G²/2 for a given η."""
    if eta is None:
        return G * M * math.sqrt(2.0 * T * math.log(2 * d))
    return math.log(2 * d) / eta + eta * T * M * M * G * G / 2.0


def gd_lazy_bound(dist2: float, sigma2: float, eta_T: float, sum_eta_prev_g2: float) -> float:
    """‖u − w₁‖²/(2σ²η_T) + (σ²/2) Σ η_{t−1}‖g_t‖²."""
    return dist2 / (2.0 * sigma2 * eta_T) + 0.5 * sigma2 * sum_eta_prev_g2


def gd_greedy_bound(max_dist2: float, sigma2: float, eta_T: float, sum_eta_g2: float) -> float:
    """max_t ‖u − w_t‖²/(2σ²η_T) + (σ²/2) Σ η_t‖g_t‖²."""
    return max_dist2 / (2.0 * sigma2 * eta_T) + 0.5 * sigma2 * sum_eta_g2


def gaussian_quadratic_bound(eta: float, prior_mahalanobis: float, sum_g_cov_g: float) -> float:
    """(1/2η)(w₁ − u)ᵀΣ₁⁻¹(w₁ − u) + (η/2) Σ g_tᵀΣ_{t+1}g_t."""
    return prior_mahalanobis / (2.0 * eta) + 0.5 * eta * sum_g_cov_g


def strongly_convex_bound(T: int, G: float, D: float, alpha: float, eta_sigma2: float) -> float:
    inv = 1.0 / eta_sigma2
    return (
        G * G / (2.0 * alpha) * math.log((inv + alpha * T) / (inv + alpha))
        + G * G / (2.0 * inv + 2.0 * alpha)
        + D * D / (2.0 * eta_sigma2)
    )


def ons_bound(T: int, d: int, G: float, D: float, beta: float, eta_sigma2: float) -> float:
    """(d/2β) ln(1 + ησ²βG²T/d) + D²/(2ησ²)."""
    return d / (2.0 * beta) * math.log1p(eta_sigma2 * beta * G * G * T / d) + D * D / (2.0 * eta_sigma2)


def iprod_bound(variance: float, kl: float, grid: Sequence[float], eta_prior: Sequence[float]) -> float:
    """min over grid η* of 2η*V + (2/η*)(kl − ln γ([η*/2, η*]))."""
    grid = np.asarray(grid, dtype=float)
    gamma = np.asarray(eta_prior, dtype=float)
    best = math.inf
    for eta in grid:
        inside = (grid >= 0.5 * eta * (1 - 1e-12)) & (grid <= eta * (1 + 1e-12))
        mass = float(gamma[inside].sum())
        if mass <= 0:
            continue
        best = min(best, 2.0 * eta * variance + (2.0 / eta) * (kl - math.log(mass)))
    return best


def coinbetting_bound(T: int, kl: float) -> float:
    """√(3T(kl + 3)), for the shape a = T/4 + ½."""
    return math.sqrt(3.0 * T * (kl + 3.0))


def coinbetting_bound_general(t: int, a: float, kl: float) -> float:
    """√((2t + 4a − 2)(½ ln((t + 2a − 1)/(2a)) + ln(e√π) + kl)), valid for any a ≥ ½."""
    return math.sqrt(
        (2.0 * t + 4.0 * a - 2.0)
        * (0.5 * math.log((t + 2.0 * a - 1.0) / (2.0 * a)) + 1.0 + 0.5 * math.log(math.pi) + kl)
    )


def bandit_bound(T: int, d: int, nu: float | None = None) -> float:
    """2√(3νdT ln T) + 2."""
    nu = float(d) if nu is None else nu
    return 2.0 * math.sqrt(3.0 * nu * d * T * math.log(T)) + 2.0


def bandit_running_bound(t: int, T: int, d: int, eta: float, gamma: float, nu: float) -> float:
    """2γt + ν ln T/η + ηdt + 2, the bound before tuning, after t rounds."""
    return 2.0 * gamma * t + nu * math.log(T) / eta + eta * d * t + 2.0


def _lemma1(c: Mapping[str, float]) -> float:
    gaps = c["gaps"]
    schedule = c.get("schedule") or Schedule.constant(c["eta"])
    flavor = Flavor(c.get("flavor", Flavor.LAZY))
    return lemma1_bound(c["kl_prior"], gaps, schedule, c.get("kl_max_intermediate", 0.0), flavor)


def _gd(c: Mapping[str, float]) -> float:
    if Flavor(c.get("flavor", Flavor.LAZY)) is Flavor.LAZY:
        return gd_lazy_bound(c["dist2"], c["sigma2"], c["eta_T"], c["sum_eta_g2"])
    return gd_greedy_bound(c["dist2"], c["sigma2"], c["eta_T"], c["sum_eta_g2"])


_REGISTRY: dict[str, tuple[tuple[str, ...], Callable[[Mapping], float]]] = {
    AlgorithmId.KT.value: (("T",), lambda c: kt_bound(c["T"])),
    AlgorithmId.EGPM.value: (("T", "d", "G"), lambda c: egpm_bound(c["T"], c["d"], c["G"], c.get("M", 1.0), c.get("eta"))),
    AlgorithmId.GD.value: (("dist2", "sigma2", "eta_T", "sum_eta_g2"), _gd),
    AlgorithmId.MD_POISSON.value: (("kl_prior", "gaps"), _lemma1),
    AlgorithmId.QUAD_EW.value: (
        ("eta", "prior_mahalanobis", "sum_g_cov_g"),
        lambda c: gaussian_quadratic_bound(c["eta"], c["prior_mahalanobis"], c["sum_g_cov_g"]),
    ),
    AlgorithmId.STRONGLY_CONVEX.value: (
        ("T", "G", "D", "alpha", "eta_sigma2"),
        lambda c: strongly_convex_bound(c["T"], c["G"], c["D"], c["alpha"], c["eta_sigma2"]),
    ),
    AlgorithmId.ONS.value: (
        ("T", "d", "G", "D", "beta", "eta_sigma2"),
        lambda c: ons_bound(c["T"], c["d"], c["G"], c["D"], c["beta"], c["eta_sigma2"]),
    ),
    AlgorithmId.IPROD.value: (
        ("variance", "kl", "grid", "eta_prior"),
        lambda c: iprod_bound(c["variance"], c["kl"], c["grid"], c["eta_prior"]),
    ),
    AlgorithmId.SQUINT.value: (
        ("variance", "kl", "grid", "eta_prior"),
        lambda c: iprod_bound(c["variance"], c["kl"], c["grid"], c["eta_prior"]),
    ),
    AlgorithmId.COIN_BETTING.value: (("T", "kl"), lambda c: coinbetting_bound(c["T"], c["kl"])),
    AlgorithmId.BANDIT.value: (("T", "d"), lambda c: bandit_bound(c["T"], c["d"], c.get("nu"))),
    "lemma1": (("kl_prior", "gaps"), _lemma1),
}


def evaluate_bound(algorithm: AlgorithmId | str, constants: Mapping[str, object]) -> float:
    """The closed-form bound for `algorithm`, from the named constants and statistics."""
    key = algorithm.value if isinstance(algorithm, AlgorithmId) else str(algorithm)
    if key not in _REGISTRY:
        raise MissingConstantError(f"no bound registered for {key!r}")
    required, fn = _REGISTRY[key]
    missing = [name for name in required if constants.get(name) is None]
    if missing:
        raise MissingConstantError(f"bound for {key} needs {', '.join(missing)}")
    return float(fn(constants))
