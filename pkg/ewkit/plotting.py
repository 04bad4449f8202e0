from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .models import RegretLedger  # noqa: E402

# fixed salt and no date stamp: equal ledgers give byte-identical SVGs
matplotlib.rcParams["svg.hashsalt"] = "ewkit"


def plot_regret(ledgers: Sequence[RegretLedger], path: Path, title: str | None = None) -> Path:
    """Regret (and bound, where one exists) against t."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for i, ledger in enumerate(ledgers):
        t = np.array([r.t for r in ledger.rows])
        regret = np.array([r.regret for r in ledger.rows])
        bound = np.array([r.bound for r in ledger.rows])
        suffix = f" (rep {i})" if len(ledgers) > 1 else ""
        line = ax.plot(t, regret, linewidth=1.5, label=f"regret{suffix}")[0]
        if np.any(np.isfinite(bound)):
            ax.plot(t, bound, linestyle="--", color=line.get_color(), alpha=0.8, label=f"bound{suffix}")
    ax.axhline(0.0, color="0.6", linewidth=0.8)
    ax.set_xlabel("round t")
    ax.set_ylabel("cumulative regret")
    ax.grid(True, alpha=0.3)
    if len(ledgers) <= 6:
        ax.legend(loc="upper left")
    ax.set_title(title or (ledgers[0].algorithm if ledgers else ""))
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
