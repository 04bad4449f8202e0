from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .adversaries import Adversary, resolve_constants
from .comparators import GridComparator, make_comparator
from .config import build_config
from .learners import EXPERT_ALGORITHMS, ExpertsLearner, Learner, algorithm_domain, make_learner
from .models import (
    LEDGER_COLUMNS,
    AlgorithmId,
    ExperimentConfig,
    ExperimentResult,
    LedgerRow,
    RegretLedger,
    ReplicateSummary,
    RunPaths,
)
from .plotting import plot_regret
from .storage import make_run_dir, replicate_dir

logger = logging.getLogger(__name__)

StatusCallback = Callable[[str], None]

BOUND_TOL = 1e-6


def replicate_rng(seed: int, replicate: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, replicate])


def _generator(ss: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(ss))


def default_grid_size(d: int) -> int:
    return 10**6 if d <= 2 else 10**4


def run_replicate(
    config: ExperimentConfig, replicate: int = 0, played: list[np.ndarray] | None = None
) -> tuple[RegretLedger, Learner]:
    """One seeded run; returns the ledger and the finished learner.

    When `played` is given, every predicted point is appended to it.
    """
    spec = config.adversary
    adv_ss, learner_ss, grid_ss = replicate_rng(spec.seed, replicate).spawn(3)
    domain = algorithm_domain(config)
    norm_ord = math.inf if config.algorithm is AlgorithmId.EGPM else 2.0
    constants = resolve_constants(spec, domain, norm_ord)
    adversary = Adversary(spec, domain, constants, _generator(adv_ss))
    learner = make_learner(config, domain, constants, _generator(learner_ss))
    grid_size = config.grid_size or default_grid_size(domain.dim)

    ledger = RegretLedger(algorithm=config.algorithm.value)
    comparator = None
    for t in range(1, spec.T + 1):
        w = learner.predict()
        if played is not None:
            played.append(np.array(w, dtype=float))
        loss = adversary.next_loss(w, t)
        if comparator is None:
            comparator = make_comparator(
                loss, domain, grid_size, _generator(grid_ss), experts=config.algorithm in EXPERT_ALGORITHMS
            )
        step = learner.update(loss, w)
        comparator.update(loss)
        ledger.append(
            loss=step.loss,
            comparator_cum_loss=comparator.cum_loss,
            mix_gap=step.mix_gap,
            bound=learner.bound(comparator, t),
        )

    if isinstance(comparator, GridComparator):
        _polish_final_row(ledger, comparator)
    if isinstance(learner, ExpertsLearner):
        _check_mixture(ledger, learner, comparator)
    learner.finish()
    ledger.flags.extend(learner.flags())
    return ledger, learner


def _polish_final_row(ledger: RegretLedger, comparator: GridComparator) -> None:
    _, value = comparator.polished()
    last = ledger.final
    if value < last.comparator_cum_loss:
        logger.debug("polished comparator improves final loss by %.3g", last.comparator_cum_loss - value)
        ledger.rows[-1] = replace(last, comparator_cum_loss=value, regret=last.cum_loss - value)


def _check_mixture(ledger: RegretLedger, learner: ExpertsLearner, comparator) -> None:
    """The bound must also hold against the uniform mixture of the two best experts."""
    regret, bound = learner.mixture_bound(comparator.top_two())
    if regret > bound + BOUND_TOL:
        ledger.flags.append(f"mixture comparator: regret {regret:.6g} exceeds bound {bound:.6g}")


def summarize(ledger: RegretLedger, replicate: int) -> ReplicateSummary:
    last = ledger.final
    violations = len(ledger.violations(BOUND_TOL))
    violations += sum(1 for f in ledger.flags if f.startswith("mixture comparator"))
    return ReplicateSummary(
        replicate=replicate,
        final_regret=last.regret,
        final_bound=last.bound,
        violations=violations,
        flags=tuple(ledger.flags),
    )


# -- outputs -------------------------------------------------------------------


def _fmt(value: float) -> str:
    return format(value, ".17g")


def write_ledger_csv(ledger: RegretLedger, path: Path) -> Path:
    if not ledger.rows:
        raise ValueError("cannot write an empty ledger")
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(LEDGER_COLUMNS)
        for row in ledger.rows:
            writer.writerow([row.t, *(_fmt(x) for x in row.as_tuple()[1:])])
    return path


def read_ledger_csv(path: Path) -> RegretLedger:
    ledger = RegretLedger(algorithm=path.parent.name)
    with path.open("r", newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != LEDGER_COLUMNS:
            raise ValueError(f"{path} has columns {reader.fieldnames}; expected {list(LEDGER_COLUMNS)}")
        for r in reader:
            ledger.rows.append(
                LedgerRow(int(r["t"]), *(float(r[k]) for k in LEDGER_COLUMNS[1:]))
            )
    return ledger


def emit_outputs(ledger: RegretLedger, out_dir: Path) -> RunPaths:
    """Write `ledger.csv` and `regret.svg` into `out_dir`."""
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = write_ledger_csv(ledger, out_dir / "ledger.csv")
    svg_path = plot_regret([ledger], out_dir / "regret.svg")
    return RunPaths(run_dir=out_dir, csv_path=csv_path, svg_path=svg_path)


def write_summary(result: ExperimentResult, path: Path) -> Path:
    cfg = result.config
    first = result.summaries[0]
    lines = [
        f"algorithm = {cfg.algorithm.value}",
        f"adversary = {cfg.adversary.kind.value}",
        f"d = {cfg.adversary.d}",
        f"T = {cfg.adversary.T}",
        f"seed = {cfg.adversary.seed}",
        f"replicates = {cfg.replicates}",
        f"final_regret = {_fmt(result.mean_final_regret)}",
        f"final_bound = {_fmt(first.final_bound)}",
        f"slack = {_fmt(first.final_bound - result.mean_final_regret)}",
        f"violations = {sum(s.violations for s in result.summaries)}",
        f"violated = {str(result.violated).lower()}",
        f"flagged_replicates = {len(result.flagged)}",
        f"runtime_s = {result.runtime_s:.3f}",
    ]
    for s in result.summaries:
        for flag in s.flags:
            lines.append(f"flag[{s.replicate}] = {flag}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# -- orchestration ---------------------------------------------------------------


def run_experiment(
    config: ExperimentConfig,
    *,
    on_status: StatusCallback | None = None,
    write: bool = True,
) -> ExperimentResult:
    """Run every replicate (in parallel when `workers > 1`) and write the outputs."""
    start = time.perf_counter()
    n = config.replicates
    if on_status:
        spec = config.adversary
        on_status(f"Running {config.algorithm.value} vs {spec.kind.value}: d={spec.d}, T={spec.T}, replicates={n}")

    def one(i: int) -> tuple[RegretLedger, bool]:
        ledger, learner = run_replicate(config, i)
        logger.debug("replicate %d: final regret %.6g, bound %.6g", i, ledger.final.regret, ledger.final.bound)
        return ledger, learner.stochastic

    if config.workers > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(one, range(n)))
    else:
        outcomes = [one(i) for i in range(n)]

    ledgers = [ledger for ledger, _ in outcomes]
    result = ExperimentResult(
        config=config,
        ledgers=ledgers,
        summaries=[summarize(ledger, i) for i, ledger in enumerate(ledgers)],
        runtime_s=time.perf_counter() - start,
        stochastic=outcomes[0][1],
    )

    if write:
        # all file writes happen here, on the calling thread
        out_dir = config.out_dir or make_run_dir(label=config.algorithm.value)
        out_dir.mkdir(parents=True, exist_ok=True)
        for i, ledger in enumerate(ledgers):
            result.paths.append(emit_outputs(ledger, replicate_dir(out_dir, i, n)))
        if n > 1:
            plot_regret(ledgers, out_dir / "regret.svg")
        write_summary(result, out_dir / "summary.txt")
        if on_status:
            on_status(f"Run folder: {out_dir}")

    if on_status:
        for s in result.summaries:
            if s.violations:
                on_status(f"  replicate {s.replicate}: {s.violations} bound violations")
            for flag in s.flags:
                on_status(f"  replicate {s.replicate}: {flag}")
        on_status(
            f"Final regret {result.mean_final_regret:.6g} vs bound {result.summaries[0].final_bound:.6g}"
            f" ({'VIOLATED' if result.violated else 'ok'}, {result.runtime_s:.2f}s)"
        )
    return result


def sweep(
    values: Mapping[str, object],
    param: str,
    sweep_values: Sequence[str],
    out_dir: Path | None = None,
    *,
    on_status: StatusCallback | None = None,
) -> list[ExperimentResult]:
    """Re-run the experiment once per value of `param`; one sub-folder per value."""
    base = out_dir or make_run_dir(label=f"sweep-{param}")
    results: list[ExperimentResult] = []
    for raw in sweep_values:
        config = build_config({**values, param: raw, "out": base / f"{param}={raw}"})
        if on_status:
            on_status(f"{param} = {raw}")
        results.append(run_experiment(config, on_status=on_status))

    lines = [f"{param}\tfinal_regret\tfinal_bound\tslack\tviolated"]
    for raw, r in zip(sweep_values, results):
        bound = r.summaries[0].final_bound
        lines.append(
            f"{raw}\t{_fmt(r.mean_final_regret)}\t{_fmt(bound)}\t{_fmt(bound - r.mean_final_regret)}\t{str(r.violated).lower()}"
        )
    base.mkdir(parents=True, exist_ok=True)
    (base / "sweep.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if on_status:
        on_status(f"Sweep table: {base / 'sweep.txt'}")
    return results
