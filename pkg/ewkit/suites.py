"""`ewkit verify`: batteries of seeded runs and equivalence checks.

Each suite is a list of named checks. A check either compares trajectories of
two implementations (equivalence) or runs the harness over several seeds and
asserts that no ledger row exceeds its bound.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bounds import coinbetting_bound, egpm_bound, kt_bound
from .config import build_config
from .core import StatusCallback, run_experiment, run_replicate
from .domains import ConvexDomain
from .errors import ConfigError
from .ew import LearnerState, Schedule, ew_update, posterior_mean
from .expfam import DiscreteAtoms, GaussianState, PoissonProductState, gaussian_pair, poisson_pair
from .learners import GridExpertsLearner
from .losses import LinearLoss, QuadraticLoss
from .models import Flavor
from .surrogates import QuadEWState, egpm_step, gd_step, md_step, ons_curvature, quad_ew_step

logger = logging.getLogger(__name__)

SUITES = ("core", "adaptive", "bandit")


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    runtime_s: float = 0.0
    flagged: int = 0


@dataclass
class SuiteReport:
    suite: str
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


@dataclass(frozen=True)
class Scale:
    """Sizes for one verify pass; `full` matches the published acceptance sizes."""

    seeds: int
    kt_sequences: int
    kt_T: int
    linear_T: int
    quad_T: int
    quad_seeds: int
    expert_seeds: int
    expert_T: tuple[int, ...]
    bandit_T: int
    bandit_replicates: int
    bandit_mc_T: int
    bandit_mc_replicates: int
    equivalence_rounds: int


QUICK = Scale(
    seeds=5,
    kt_sequences=10,
    kt_T=1000,
    linear_T=500,
    quad_T=500,
    quad_seeds=5,
    expert_seeds=5,
    expert_T=(100, 1000),
    bandit_T=1000,
    bandit_replicates=4,
    bandit_mc_T=300,
    bandit_mc_replicates=2,
    equivalence_rounds=200,
)
FULL = Scale(
    seeds=20,
    kt_sequences=100,
    kt_T=1000,
    linear_T=1000,
    quad_T=2000,
    quad_seeds=20,
    expert_seeds=50,
    expert_T=(100, 1000),
    bandit_T=10_000,
    bandit_replicates=20,
    bandit_mc_T=2000,
    bandit_mc_replicates=5,
    equivalence_rounds=200,
)


def _timed(name: str, fn: Callable[[], tuple[bool, str] | tuple[bool, str, int]]) -> CheckResult:
    start = time.perf_counter()
    out = fn()
    passed, detail = out[0], out[1]
    flagged = out[2] if len(out) > 2 else 0
    return CheckResult(name, bool(passed), detail, time.perf_counter() - start, flagged)


# -- equivalence checks -----------------------------------------------------------


def check_gd_equivalence(rounds: int, seeds: int) -> tuple[bool, str]:
    worst = 0.0
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(1, 6))
        domain = ConvexDomain.ball(d, float(rng.uniform(0.5, 3.0)))
        sigma2, eta = float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.01, 0.5))
        for flavor in Flavor:
            w1 = np.zeros(d)
            state = LearnerState.start(GaussianState.isotropic(w1, sigma2), Schedule.constant(eta), domain, flavor)
            w, grad_sum = w1.copy(), np.zeros(d)
            for _ in range(rounds):
                g = rng.standard_normal(d)
                if flavor is Flavor.GREEDY:
                    w = gd_step(w, g, sigma2 * eta, domain, flavor)
                else:
                    w = gd_step(w1, g, sigma2 * eta, domain, flavor, anchor_sum=grad_sum)
                    grad_sum = grad_sum + g
                state = ew_update(state, LinearLoss(g), domain)
                worst = max(worst, float(np.max(np.abs(w - posterior_mean(state)))))
    return worst <= 1e-10, f"max |GD − EW| = {worst:.3g}"


def check_egpm_equivalence(rounds: int, seeds: int) -> tuple[bool, str]:
    worst = 0.0
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(1, 8))
        eta = float(rng.uniform(0.05, 1.0))
        domain = ConvexDomain.l1_ball(d)
        state = LearnerState.start(DiscreteAtoms.plus_minus_basis(d), Schedule.constant(eta), domain, Flavor.GREEDY)
        wplus = np.full(d, 0.5 / d)
        wminus = np.full(d, 0.5 / d)
        for _ in range(rounds):
            g = rng.uniform(-1.0, 1.0, d)
            wplus, wminus = egpm_step(wplus, wminus, g, eta)
            state = ew_update(state, LinearLoss(g), domain)
            weights = np.concatenate([wplus, wminus])
            worst = max(worst, float(np.max(np.abs(weights - state.posterior.weights))))
    return worst <= 1e-12, f"max |EG± − EW| weight difference = {worst:.3g}"


def check_md_equivalence(rounds: int, seeds: int) -> tuple[bool, str]:
    worst = 0.0
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(1, 5))
        eta = float(rng.uniform(0.01, 0.2))
        cases = [
            (gaussian_pair(1.0), GaussianState.isotropic(np.zeros(d), 1.0), ConvexDomain.ball(d, 2.0)),
            (poisson_pair(), PoissonProductState.from_rates(np.ones(d)), ConvexDomain.box(np.full(d, 0.1), np.full(d, 3.0))),
        ]
        for pair, prior, domain in cases:
            for flavor in Flavor:
                state = LearnerState.start(prior, Schedule.constant(eta), domain, flavor)
                w1 = posterior_mean(state)
                w, grad_sum = w1.copy(), np.zeros(d)
                for _ in range(rounds):
                    g = rng.uniform(-1.0, 1.0, d)
                    if flavor is Flavor.GREEDY:
                        w = md_step(w, g, eta, pair, domain, flavor)
                    else:
                        w = md_step(w1, g, eta, pair, domain, flavor, grad_sum=grad_sum)
                        grad_sum = grad_sum + g
                    state = ew_update(state, LinearLoss(g), domain)
                    worst = max(worst, float(np.max(np.abs(w - posterior_mean(state)))))
    return worst <= 1e-8, f"max |MD − EW| = {worst:.3g}"


def check_ons_recursion(rounds: int, seeds: int) -> tuple[bool, str]:
    """Sherman-Morrison covariance against a fresh inverse of the precision."""
    worst = 0.0
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 6))
        domain = ConvexDomain.ball(d, 1.0)
        state = QuadEWState.start(np.zeros(d), 1.0, 1.0)
        for _ in range(rounds):
            g = rng.standard_normal(d)
            g /= max(1.0, float(np.linalg.norm(g)))
            state = quad_ew_step(state, ons_curvature(g, 1.0, 1.0, 2.0, anchor=state.mean), domain)
            worst = max(worst, float(np.max(np.abs(state.covariance - np.linalg.inv(state.precision)))))
    return worst <= 1e-9, f"max |Σ − (Σ⁻¹)⁻¹| = {worst:.3g}"


def check_quadratic_reduction(rounds: int, seeds: int) -> tuple[bool, str]:
    """With zero curvature the quadratic recursion is GD with rate ησ²."""
    worst = 0.0
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(1, 5))
        domain = ConvexDomain.ball(d, 1.5)
        eta, sigma2 = float(rng.uniform(0.05, 0.5)), float(rng.uniform(0.5, 2.0))
        state = QuadEWState.start(np.zeros(d), sigma2, eta)
        w = np.zeros(d)
        for _ in range(rounds):
            g = rng.standard_normal(d)
            state = quad_ew_step(state, QuadraticLoss.of(g, np.zeros((d, d)), state.mean), domain)
            w = gd_step(w, g, eta * sigma2, domain)
            worst = max(worst, float(np.max(np.abs(w - state.mean))))
    return worst <= 1e-10, f"max |quad-EW − GD| = {worst:.3g}"


def check_scaling_redundancy(rounds: int, seeds: int) -> tuple[bool, str]:
    """(η, σ²) → (cη, σ²/c) leaves the GD and ONS trajectories unchanged."""
    worst = 0.0
    for algo, eta in (("gd", 0.1), ("ons", 0.5)):
        for seed in range(seeds):
            base = {"algorithm": algo, "d": 3, "T": rounds, "seed": seed, "grid_size": 100}
            reference: list[np.ndarray] = []
            run_replicate(build_config({**base, "eta": eta, "sigma2": 1.0}), played=reference)
            for c in (0.1, 10.0):
                scaled: list[np.ndarray] = []
                run_replicate(build_config({**base, "eta": eta * c, "sigma2": 1.0 / c}), played=scaled)
                gap = np.max(np.abs(np.asarray(scaled) - np.asarray(reference)))
                worst = max(worst, float(gap))
    return worst <= 1e-10, f"max trajectory change under (cη, σ²/c) = {worst:.3g}"


# -- bound checks ------------------------------------------------------------------


def _bound_check(base: dict, seeds: int, extra: Callable | None = None) -> tuple[bool, str]:
    worst_slack = math.inf
    failures = 0
    for seed in range(seeds):
        config = build_config({**base, "seed": seed})
        ledger, learner = run_replicate(config)
        bad = ledger.violations(1e-6)
        if bad or any(f.startswith("mixture comparator") for f in ledger.flags):
            failures += 1
            logger.debug("%s seed %d: %d rows over the bound", base.get("algorithm"), seed, len(bad))
        if extra is not None and not extra(config, ledger, learner):
            failures += 1
        worst_slack = min(worst_slack, ledger.final.bound - ledger.final.regret)
    return failures == 0, f"{seeds} seeds, {failures} failing, min final slack {worst_slack:.4g}"


def _kt_headline(config, ledger, learner) -> bool:
    return ledger.final.regret <= kt_bound(config.adversary.T) + 1e-9


def _egpm_headline(config, ledger, learner) -> bool:
    spec = config.adversary
    return ledger.final.regret <= egpm_bound(spec.T, spec.d, 1.0, 1.0) + 1e-9


def _coinbetting_headline(config, ledger, learner) -> bool:
    return ledger.final.regret <= coinbetting_bound(config.adversary.T, math.log(config.adversary.d)) + 1e-9


def _potential_invariant(config, ledger, learner) -> bool:
    if not isinstance(learner, GridExpertsLearner):
        return True
    phi = np.asarray(learner.potentials)
    if config.algorithm.value == "iprod":
        return bool(np.all(np.abs(phi - 1.0) <= 1e-10))
    return bool(np.all(phi <= 1.0 + 1e-10))


def core_checks(scale: Scale) -> list[CheckResult]:
    s = scale
    out = [
        _timed("gd≡ew", lambda: check_gd_equivalence(s.equivalence_rounds, s.seeds)),
        _timed("eg±≡ew", lambda: check_egpm_equivalence(s.equivalence_rounds, s.seeds)),
        _timed("md≡ew", lambda: check_md_equivalence(s.equivalence_rounds, s.seeds)),
        _timed("ons recursion", lambda: check_ons_recursion(s.equivalence_rounds, s.seeds)),
        _timed("quad-ew ≡ gd at M = 0", lambda: check_quadratic_reduction(s.equivalence_rounds, s.seeds)),
        _timed("scaling redundancy", lambda: check_scaling_redundancy(s.equivalence_rounds, s.seeds)),
        _timed(
            "kt bound",
            lambda: _bound_check({"algorithm": "kt", "d": 1, "T": s.kt_T}, s.kt_sequences, _kt_headline),
        ),
    ]
    for d in (2, 50):
        out.append(
            _timed(
                f"eg± bound d={d}",
                lambda d=d: _bound_check(
                    {"algorithm": "egpm", "d": d, "T": s.linear_T, "schedule": "tuned"}, s.seeds, _egpm_headline
                ),
            )
        )
    for flavor in ("lazy", "greedy"):
        for adversary in ("iid-linear", "adaptive-linear"):
            out.append(
                _timed(
                    f"gd {flavor} bound vs {adversary}",
                    lambda flavor=flavor, adversary=adversary: _bound_check(
                        {"algorithm": "gd", "d": 5, "T": s.linear_T, "flavor": flavor, "adversary": adversary,
                         "schedule": "tuned"},
                        s.seeds,
                    ),
                )
            )
    out.append(
        _timed(
            "md-poisson bound",
            lambda: _bound_check({"algorithm": "md-poisson", "d": 3, "T": s.linear_T, "radius": 2.0}, s.seeds),
        )
    )
    for algo in ("quad-ew", "sc-gd", "ons"):
        for flavor in ("lazy", "greedy"):
            out.append(
                _timed(
                    f"{algo} {flavor} bound",
                    lambda algo=algo, flavor=flavor: _bound_check(
                        {"algorithm": algo, "d": 5, "T": s.quad_T, "flavor": flavor}, s.quad_seeds
                    ),
                )
            )
    return out


def compare_squint_coinbetting(seeds: int, d: int = 10, T: int = 1000) -> tuple[bool, str, int]:
    """Squint should beat Coin Betting on low-variance experts for most seeds.

    Reported only: the check always passes and the seeds where Squint is
    worse come back as flagged.
    """
    worse = 0
    for seed in range(seeds):
        base = {"d": d, "T": T, "seed": seed, "adversary": "experts-low-variance"}
        squint, _ = run_replicate(build_config({**base, "algorithm": "squint"}))
        coin, _ = run_replicate(build_config({**base, "algorithm": "coinbetting"}))
        if squint.final.regret > coin.final.regret:
            worse += 1
    share = 1.0 - worse / seeds
    verdict = "ok" if share >= 0.9 else "below 90%"
    return True, f"squint <= coinbetting on {share:.0%} of {seeds} seeds ({verdict})", worse


def adaptive_checks(scale: Scale) -> list[CheckResult]:
    out = []
    for algo in ("iprod", "squint", "coinbetting"):
        for d in (2, 10):
            for T in scale.expert_T:
                extra = _coinbetting_headline if algo == "coinbetting" else _potential_invariant
                out.append(
                    _timed(
                        f"{algo} d={d} T={T}",
                        lambda algo=algo, d=d, T=T, extra=extra: _bound_check(
                            {"algorithm": algo, "d": d, "T": T}, scale.expert_seeds, extra
                        ),
                    )
                )
    out.append(
        _timed(
            "squint vs coinbetting (soft)",
            lambda: compare_squint_coinbetting(scale.expert_seeds, T=scale.expert_T[-1]),
        )
    )
    return out


def bandit_checks(scale: Scale) -> list[CheckResult]:
    def run(method: str, T: int, replicates: int) -> tuple[bool, str, int]:
        config = build_config(
            {
                "algorithm": "bandit",
                "d": 2,
                "T": T,
                "replicates": replicates,
                "moment_method": method,
                "domain": "ball",
            }
        )
        result = run_experiment(config, write=False)
        bound = result.summaries[0].final_bound
        detail = f"mean regret {result.mean_final_regret:.4g} vs bound {bound:.4g}, {len(result.flagged)} flagged"
        return not result.violated, detail, len(result.flagged)

    return [
        _timed("bandit expected regret", lambda: run("exact", scale.bandit_T, scale.bandit_replicates)),
        _timed(
            "bandit expected regret (monte-carlo)",
            lambda: run("monte-carlo", scale.bandit_mc_T, scale.bandit_mc_replicates),
        ),
    ]


_SUITE_BUILDERS: dict[str, Callable[[Scale], list[CheckResult]]] = {
    "core": core_checks,
    "adaptive": adaptive_checks,
    "bandit": bandit_checks,
}


def run_suite(name: str, *, full: bool = False, on_status: StatusCallback | None = None) -> list[SuiteReport]:
    names = SUITES if name == "all" else (name,)
    for n in names:
        if n not in _SUITE_BUILDERS:
            raise ConfigError(f"unknown suite {n!r}; choose from all, {', '.join(SUITES)}")
    scale = FULL if full else QUICK
    reports = []
    for n in names:
        if on_status:
            on_status(f"Suite {n} ({'full' if full else 'quick'})")
        report = SuiteReport(n, _SUITE_BUILDERS[n](scale))
        if on_status:
            for c in report.checks:
                mark = "PASS" if c.passed else "FAIL"
                on_status(f"  [{mark}] {c.name}: {c.detail} ({c.runtime_s:.2f}s)")
        reports.append(report)
    return reports
