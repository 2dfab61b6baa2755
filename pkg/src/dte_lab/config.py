"""Run configuration: flat dotted key = value files plus CLI overrides.

Grammar, one entry per line:

    # comment (full line only)
    section.key = value

Unknown keys are rejected. `nuisance.*` keys pass through to the chosen
learner and are validated against its option set when the learner is
built. CLI flags override file values; built-in defaults fill the rest.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError

__all__ = ["RunConfig", "parse_config_file", "build_run_config", "CONFIG_DEFAULTS"]

# key -> (type tag, default); nuisance.* handled separately
CONFIG_DEFAULTS = {
    "data.input": ("str", None),
    "data.rho": ("float", 0.1),
    "data.treatment_column": ("str", "d"),
    "data.outcome_column": ("str", "y"),
    "grid.percentile": ("float", 0.99),
    "grid.intervals": ("int", 20),
    "grid.step": ("int", None),
    "grid.count": ("int", None),
    "grid.source": ("str", "pooled"),
    "estimator.kind": ("str", "adjusted"),
    "estimator.learner": ("str", "boosted_stumps"),
    "estimator.folds": ("int", 3),
    "estimator.rearrange": ("bool", False),
    "estimator.span": ("int", None),
    "inference.replications": ("int", 500),
    "inference.level": ("float", 0.95),
    "inference.method": ("str", "normal"),
    "inference.nuisance_mode": ("str", "refit"),
    "inference.seed": ("int", 0),
    "inference.stratified": ("bool", False),
    "output.dir": ("str", None),
}

_NUISANCE_INT_KEYS = ("rounds", "max_depth", "min_leaf", "max_bins", "max_iter")
_NUISANCE_FLOAT_KEYS = ("learning_rate", "l2", "tol")


def _coerce(key: str, raw: str):
    if key.startswith("nuisance."):
        opt = key.split(".", 1)[1]
        if opt in _NUISANCE_INT_KEYS:
            kind = "int"
        elif opt in _NUISANCE_FLOAT_KEYS:
            kind = "float"
        else:
            raise ConfigError(f"unknown config key {key!r}")
    elif key in CONFIG_DEFAULTS:
        kind = CONFIG_DEFAULTS[key][0]
    else:
        raise ConfigError(f"unknown config key {key!r}")
    if not isinstance(raw, str):
        return raw  # already typed (flag override)
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "false"):
                return low == "true"
            raise ValueError(raw)
        return raw
    except ValueError:
        raise ConfigError(f"config key {key!r} expects a {kind}, got {raw!r}") from None


def parse_config_file(path) -> dict:
    """Read a config file into a {dotted key: typed value} mapping."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            raw = raw.strip()
            if not key or "." not in key:
                raise ConfigError(f"{path}:{lineno}: keys must be dotted, got {key!r}")
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                values[key] = _coerce(key, raw)
            except ConfigError as e:
                raise ConfigError(f"{path}:{lineno}: {e}") from None
    return values


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one CLI run."""

    input: str | None = None
    rho: float = 0.1
    treatment_column: str = "d"
    outcome_column: str = "y"
    grid_percentile: float = 0.99
    grid_intervals: int = 20
    grid_step: int | None = None
    grid_count: int | None = None
    grid_source: str = "pooled"
    estimator: str = "adjusted"
    learner: str = "boosted_stumps"
    folds: int = 3
    rearrange: bool = False
    span: int | None = None
    nuisance_options: tuple = field(default=())
    replications: int = 500
    level: float = 0.95
    method: str = "normal"
    nuisance_mode: str = "refit"
    seed: int = 0
    stratified: bool = False
    out_dir: str | None = None


_FIELD_BY_KEY = {
    "data.input": "input",
    "data.rho": "rho",
    "data.treatment_column": "treatment_column",
    "data.outcome_column": "outcome_column",
    "grid.percentile": "grid_percentile",
    "grid.intervals": "grid_intervals",
    "grid.step": "grid_step",
    "grid.count": "grid_count",
    "grid.source": "grid_source",
    "estimator.kind": "estimator",
    "estimator.learner": "learner",
    "estimator.folds": "folds",
    "estimator.rearrange": "rearrange",
    "estimator.span": "span",
    "inference.replications": "replications",
    "inference.level": "level",
    "inference.method": "method",
    "inference.nuisance_mode": "nuisance_mode",
    "inference.seed": "seed",
    "inference.stratified": "stratified",
    "output.dir": "out_dir",
}


def build_run_config(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Merge defaults <- config file <- CLI overrides into a RunConfig.

    Both mappings use dotted keys; override values may be already-typed
    (from argparse) or strings.
    """
    merged = {k: default for k, (_, default) in CONFIG_DEFAULTS.items()}
    nuisance = {}
    for source in (file_values or {}), (overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            typed = _coerce(key, value)
            if key.startswith("nuisance."):
                nuisance[key.split(".", 1)[1]] = typed
            else:
                merged[key] = typed
    kwargs = {field_name: merged[key] for key, field_name in _FIELD_BY_KEY.items()}
    kwargs["nuisance_options"] = tuple(sorted(nuisance.items()))
    return RunConfig(**kwargs)
