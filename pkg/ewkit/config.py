"""Flat `key = value` experiment files.

A config file is read into a plain mapping first; CLI flags are merged into
that mapping and only then is the frozen `ExperimentConfig` built, so the
file and the flags go through exactly the same checks.
"""
from __future__ import annotations

import math
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .errors import ConfigError
from .models import (
    AdversaryKind,
    AdversarySpec,
    AlgorithmId,
    DomainKind,
    DomainSpec,
    ExperimentConfig,
    Flavor,
)

DEFAULT_ADVERSARY: dict[AlgorithmId, AdversaryKind] = {
    AlgorithmId.KT: AdversaryKind.LOG_LOSS_BERNOULLI,
    AlgorithmId.EGPM: AdversaryKind.IID_LINEAR,
    AlgorithmId.GD: AdversaryKind.IID_LINEAR,
    AlgorithmId.MD_POISSON: AdversaryKind.IID_LINEAR,
    AlgorithmId.QUAD_EW: AdversaryKind.STRONGLY_CONVEX_QUADRATIC,
    AlgorithmId.STRONGLY_CONVEX: AdversaryKind.STRONGLY_CONVEX_QUADRATIC,
    AlgorithmId.ONS: AdversaryKind.EXP_CONCAVE_LOG,
    AlgorithmId.IPROD: AdversaryKind.EXPERTS_BOUNDED,
    AlgorithmId.SQUINT: AdversaryKind.EXPERTS_BOUNDED,
    AlgorithmId.COIN_BETTING: AdversaryKind.EXPERTS_BOUNDED,
    AlgorithmId.BANDIT: AdversaryKind.BANDIT_LINEAR,
}

# which adversaries each algorithm can face
COMPATIBLE: dict[AlgorithmId, tuple[AdversaryKind, ...]] = {
    AlgorithmId.KT: (AdversaryKind.LOG_LOSS_BERNOULLI,),
    AlgorithmId.EGPM: (AdversaryKind.ZERO, AdversaryKind.IID_LINEAR, AdversaryKind.ADAPTIVE_LINEAR),
    AlgorithmId.GD: (
        AdversaryKind.ZERO,
        AdversaryKind.IID_LINEAR,
        AdversaryKind.ADAPTIVE_LINEAR,
        AdversaryKind.STRONGLY_CONVEX_QUADRATIC,
        AdversaryKind.EXP_CONCAVE_LOG,
    ),
    AlgorithmId.MD_POISSON: (AdversaryKind.ZERO, AdversaryKind.IID_LINEAR, AdversaryKind.ADAPTIVE_LINEAR),
    AlgorithmId.QUAD_EW: (AdversaryKind.STRONGLY_CONVEX_QUADRATIC,),
    AlgorithmId.STRONGLY_CONVEX: (AdversaryKind.STRONGLY_CONVEX_QUADRATIC,),
    AlgorithmId.ONS: (AdversaryKind.EXP_CONCAVE_LOG,),
    AlgorithmId.IPROD: (AdversaryKind.EXPERTS_BOUNDED, AdversaryKind.EXPERTS_LOW_VARIANCE),
    AlgorithmId.SQUINT: (AdversaryKind.EXPERTS_BOUNDED, AdversaryKind.EXPERTS_LOW_VARIANCE),
    AlgorithmId.COIN_BETTING: (AdversaryKind.EXPERTS_BOUNDED, AdversaryKind.EXPERTS_LOW_VARIANCE),
    AlgorithmId.BANDIT: (AdversaryKind.BANDIT_LINEAR,),
}


def normalize_config_lines(lines: Iterable[str]) -> list[str]:
    out: list[str] = []
    for line in lines:
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        out.append(s)
    return out


def parse_config_lines(lines: Iterable[str], source: str = "<config>") -> dict[str, str]:
    values: dict[str, str] = {}
    for line in normalize_config_lines(lines):
        if "=" not in line:
            raise ConfigError(f"{source}: expected `key = value`, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"{source}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}: key {key!r} given twice")
        values[key] = value
    return values


def load_config_file(path: Path) -> dict[str, str]:
    if not path.exists():
        raise ConfigError(f"Missing config file: {path}")
    text = path.read_text(encoding="utf-8-sig", errors="replace")
    return parse_config_lines(text.splitlines(), source=str(path))


def load_config(path: Path | None = None, overrides: Mapping[str, object] | None = None) -> ExperimentConfig:
    values: dict[str, object] = dict(load_config_file(path)) if path else {}
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key.replace("-", "_")] = value
    return build_config(values)


# -- value parsing --------------------------------------------------------------


def _positive_int(key: str, raw) -> int:
    try:
        value = int(str(raw))
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{key} must be >= 1, got {value}")
    return value


def _int(key: str, raw) -> int:
    try:
        return int(str(raw))
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {raw!r}") from None


def _seed(key: str, raw) -> int:
    value = _int(key, raw)
    if value < 0:
        raise ConfigError(f"{key} must be >= 0, got {value}")
    return value


def _positive_float(key: str, raw) -> float:
    try:
        value = float(str(raw))
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {raw!r}") from None
    if not (value > 0 and math.isfinite(value)):
        raise ConfigError(f"{key} must be positive and finite, got {value}")
    return value


def _bool(key: str, raw) -> bool:
    s = str(raw).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {raw!r}")


def _choice(key: str, raw, choices: Iterable[str]) -> str:
    s = raw.value if isinstance(raw, Enum) else str(raw).strip()
    options = list(choices)
    if s not in options:
        raise ConfigError(f"{key} must be one of {', '.join(options)}; got {s!r}")
    return s


def _enum(key: str, raw, enum_cls):
    return enum_cls(_choice(key, raw, [m.value for m in enum_cls]))


_FIELDS: dict[str, Callable[[str, object], object]] = {
    "algorithm": lambda k, v: _enum(k, v, AlgorithmId),
    "algo": lambda k, v: _enum(k, v, AlgorithmId),
    "domain": lambda k, v: _enum(k, v, DomainKind),
    "radius": _positive_float,
    "adversary": lambda k, v: _enum(k, v, AdversaryKind),
    "d": _positive_int,
    "T": _positive_int,
    "seed": _seed,
    "G": _positive_float,
    "D": _positive_float,
    "B": _positive_float,
    "alpha": _positive_float,
    "M": _positive_float,
    "schedule": lambda k, v: _choice(k, v, ("constant", "sqrt", "tuned")),
    "eta": _positive_float,
    "sigma2": _positive_float,
    "flavor": lambda k, v: _enum(k, v, Flavor),
    "replicates": _positive_int,
    "workers": _positive_int,
    "out": lambda k, v: Path(str(v)).expanduser(),
    "grid_size": _positive_int,
    "n_samples": _positive_int,
    "moment_method": lambda k, v: _choice(k, v, ("monte-carlo", "exact")),
    "nu": _positive_float,
    "clip_regrets": _bool,
    "eta_prior": lambda k, v: _choice(k, v, ("inverse", "log-uniform")),
    "sampler_flag_tolerance": _positive_float,
}

CONFIG_KEYS = tuple(k for k in _FIELDS if k != "algo")


def parse_value(key: str, raw) -> object:
    key = key.replace("-", "_")
    if key not in _FIELDS:
        raise ConfigError(f"unknown key {key!r}")
    return _FIELDS[key](key, raw)


def build_config(values: Mapping[str, object]) -> ExperimentConfig:
    """Validate a raw mapping and assemble the frozen config."""
    v = {key: parse_value(key, raw) for key, raw in values.items()}
    if "algo" in v:
        v["algorithm"] = v.pop("algo")
    algorithm = v.get("algorithm", AlgorithmId.GD)
    adversary_kind = v.get("adversary", DEFAULT_ADVERSARY[algorithm])
    if adversary_kind not in COMPATIBLE[algorithm]:
        allowed = ", ".join(k.value for k in COMPATIBLE[algorithm])
        raise ConfigError(f"{algorithm.value} cannot face {adversary_kind.value}; use one of: {allowed}")

    d = v.get("d", 1 if algorithm is AlgorithmId.KT else 2)
    if algorithm is AlgorithmId.KT and d != 1:
        raise ConfigError("kt predicts a single probability; d must be 1")
    if algorithm in (AlgorithmId.IPROD, AlgorithmId.SQUINT, AlgorithmId.COIN_BETTING) and d < 2:
        raise ConfigError(f"{algorithm.value} needs at least 2 experts")

    T = v.get("T", 100)
    if algorithm is AlgorithmId.BANDIT and T < 2:
        raise ConfigError("bandit runs need T >= 2")
    adversary = AdversarySpec(
        kind=adversary_kind,
        d=d,
        T=T,
        seed=v.get("seed", 0),
        G=v.get("G"),
        D=v.get("D"),
        B=v.get("B"),
        alpha=v.get("alpha"),
        M=v.get("M"),
    )
    domain = DomainSpec(kind=v.get("domain", DomainKind.BALL), radius=v.get("radius", 1.0))

    config = ExperimentConfig(
        algorithm=algorithm,
        domain=domain,
        adversary=adversary,
        schedule=v.get("schedule", "constant"),
        eta=v.get("eta"),
        sigma2=v.get("sigma2", 1.0),
        flavor=v.get("flavor", Flavor.GREEDY),
        replicates=v.get("replicates", 1),
        workers=v.get("workers", 1),
        out_dir=v.get("out"),
        grid_size=v.get("grid_size"),
        n_samples=v.get("n_samples", 4096),
        moment_method=v.get("moment_method", "monte-carlo"),
        nu=v.get("nu"),
        clip_regrets=v.get("clip_regrets", False),
        eta_prior=v.get("eta_prior", "inverse"),
        sampler_flag_tolerance=v.get("sampler_flag_tolerance", 0.05),
    )
    if config.moment_method == "monte-carlo" and config.n_samples < 1000:
        raise ConfigError(f"need at least 1000 posterior samples, got {config.n_samples}")
    if config.schedule == "sqrt" and algorithm in (AlgorithmId.QUAD_EW, AlgorithmId.STRONGLY_CONVEX, AlgorithmId.ONS):
        raise ConfigError(f"{algorithm.value} needs a constant learning rate")
    return config

