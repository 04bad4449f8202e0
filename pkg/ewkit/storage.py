from __future__ import annotations

from datetime import datetime
from pathlib import Path

from platformdirs import user_cache_dir

APP_NAME = "ewkit"


def default_base_run_dir() -> Path:
    # Per-user cache dir, so plain `ewkit run` never litters the working tree
    return Path(user_cache_dir(APP_NAME))


def make_run_dir(base_dir: Path | None = None, label: str | None = None) -> Path:
    base = base_dir or default_base_run_dir()
    ts = datetime.now().strftime("%Y-%m-%d_%H%M%S")
    name = f"{ts}_{label}" if label else ts
    run_dir = base / "runs" / name
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def replicate_dir(out_dir: Path, replicate: int, replicates: int) -> Path:
    """`out_dir` itself for a single replicate, else `out_dir/rep-XXX`."""
    path = out_dir if replicates == 1 else out_dir / f"rep-{replicate:03d}"
    path.mkdir(parents=True, exist_ok=True)
    return path
