from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


class Flavor(str, Enum):
    LAZY = "lazy"
    GREEDY = "greedy"


class DomainKind(str, Enum):
    ALL = "all"
    BALL = "ball"
    L1_BALL = "l1ball"
    BOX = "box"
    SIMPLEX = "simplex"
    INTERVAL = "interval"


class Support(str, Enum):
    UNIT = "unit"  # [0, 1]
    SYMMETRIC = "symmetric"  # [-1, 1]


class AlgorithmId(str, Enum):
    KT = "kt"
    EGPM = "egpm"
    GD = "gd"
    MD_POISSON = "md-poisson"
    QUAD_EW = "quad-ew"
    STRONGLY_CONVEX = "sc-gd"
    ONS = "ons"
    IPROD = "iprod"
    SQUINT = "squint"
    COIN_BETTING = "coinbetting"
    BANDIT = "bandit"


class AdversaryKind(str, Enum):
    ZERO = "zero"
    IID_LINEAR = "iid-linear"
    ADAPTIVE_LINEAR = "adaptive-linear"
    STRONGLY_CONVEX_QUADRATIC = "strongly-convex-quadratic"
    EXP_CONCAVE_LOG = "exp-concave-log"
    LOG_LOSS_BERNOULLI = "log-loss-bernoulli"
    EXPERTS_BOUNDED = "experts-bounded"
    EXPERTS_LOW_VARIANCE = "experts-low-variance"
    BANDIT_LINEAR = "bandit-linear"


class ScheduleKind(str, Enum):
    CONSTANT = "constant"
    SEQUENCE = "sequence"


LEDGER_COLUMNS = ("t", "loss", "cum_loss", "comparator_cum_loss", "regret", "mix_gap", "bound")


@dataclass(frozen=True)
class LedgerRow:
    t: int
    loss: float
    cum_loss: float
    comparator_cum_loss: float
    regret: float
    mix_gap: float
    bound: float

    def as_tuple(self) -> tuple:
        return (self.t, self.loss, self.cum_loss, self.comparator_cum_loss, self.regret, self.mix_gap, self.bound)


@dataclass
class RegretLedger:
    """Per-round record of learner loss, comparator loss, regret and bound."""

    algorithm: str
    rows: list[LedgerRow] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def append(
        self,
        *,
        loss: float,
        comparator_cum_loss: float,
        mix_gap: float = math.nan,
        bound: float = math.nan,
    ) -> LedgerRow:
        t = len(self.rows) + 1
        cum = (self.rows[-1].cum_loss if self.rows else 0.0) + loss
        row = LedgerRow(
            t=t,
            loss=float(loss),
            cum_loss=float(cum),
            comparator_cum_loss=float(comparator_cum_loss),
            regret=float(cum - comparator_cum_loss),
            mix_gap=float(mix_gap),
            bound=float(bound),
        )
        self.rows.append(row)
        return row

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def final(self) -> LedgerRow:
        if not self.rows:
            raise IndexError("empty ledger")
        return self.rows[-1]

    def violations(self, tol: float = 1e-6) -> list[LedgerRow]:
        return [r for r in self.rows if not math.isnan(r.bound) and r.regret > r.bound + tol]


@dataclass(frozen=True)
class DomainSpec:
    kind: DomainKind = DomainKind.BALL
    radius: float = 1.0


@dataclass(frozen=True)
class AdversarySpec:
    kind: AdversaryKind = AdversaryKind.IID_LINEAR
    d: int = 2
    T: int = 100
    seed: int = 0
    G: float | None = None
    D: float | None = None
    B: float | None = None
    alpha: float | None = None
    M: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    algorithm: AlgorithmId = AlgorithmId.GD
    domain: DomainSpec = field(default_factory=DomainSpec)
    adversary: AdversarySpec = field(default_factory=AdversarySpec)
    schedule: str = "constant"  # constant | sqrt | tuned
    eta: float | None = None
    sigma2: float = 1.0
    flavor: Flavor = Flavor.GREEDY
    replicates: int = 1
    workers: int = 1
    out_dir: Path | None = None
    grid_size: int | None = None
    n_samples: int = 4096
    moment_method: str = "monte-carlo"  # monte-carlo | exact
    nu: float | None = None
    clip_regrets: bool = False
    eta_prior: str = "inverse"  # inverse | log-uniform
    sampler_flag_tolerance: float = 0.05


@dataclass(frozen=True)
class RunPaths:
    run_dir: Path
    csv_path: Path
    svg_path: Path


@dataclass(frozen=True)
class ReplicateSummary:
    replicate: int
    final_regret: float
    final_bound: float
    violations: int
    flags: tuple[str, ...] = ()

    @property
    def slack(self) -> float:
        return self.final_bound - self.final_regret


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    ledgers: list[RegretLedger]
    summaries: list[ReplicateSummary]
    runtime_s: float = 0.0
    paths: list[RunPaths] = field(default_factory=list)
    stochastic: bool = False

    @property
    def mean_final_regret(self) -> float:
        return sum(s.final_regret for s in self.summaries) / len(self.summaries)

    @property
    def violated(self) -> bool:
        if not self.stochastic:
            return any(s.violations for s in self.summaries)
        # expected-regret bounds: judge the replicate mean, fail only gross outliers
        bound = self.summaries[0].final_bound
        if self.mean_final_regret > bound + 1e-6:
            return True
        return any(s.final_regret >= 2.0 * bound for s in self.summaries)

    @property
    def flagged(self) -> list[ReplicateSummary]:
        if not self.stochastic:
            return []
        return [s for s in self.summaries if s.final_bound < s.final_regret < 2.0 * s.final_bound]
