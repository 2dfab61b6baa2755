"""Experiment data model: unit records, location grids, and result containers.

All containers are immutable after construction (arrays are marked
read-only), so they can be shared freely across threads.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateGridError, EmptyArmError, ValidationError

__all__ = [
    "ExperimentDataset",
    "LocationGrid",
    "CdfPair",
    "EffectCurve",
    "AteResult",
    "validate_dataset",
    "build_grid",
    "subset_by_group",
    "read_csv_dataset",
    "write_csv_dataset",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ExperimentDataset:
    """Unit-level records of a completed randomized experiment.

    Attributes
    ----------
    d : np.ndarray
        Binary treatment indicators, shape (n,), values in {0, 1}.
    y : np.ndarray
        Nonnegative outcomes (minutes), shape (n,).
    x : np.ndarray
        Covariate matrix, shape (n, p). p may be zero.
    rho : float
        Design assignment probability, in (0, 1).
    covariate_names : tuple of str
        Column labels for ``x``, unique, length p.
    """

    d: np.ndarray
    y: np.ndarray
    x: np.ndarray
    rho: float
    covariate_names: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @property
    def n1(self) -> int:
        return int(self.d.sum())

    @property
    def n0(self) -> int:
        return self.n - self.n1

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def take(self, rows: np.ndarray) -> "ExperimentDataset":
        """Row-subset (or resample) without re-validation.

        Arm emptiness is NOT checked here; resampling callers are expected
        to check it themselves.
        """
        return ExperimentDataset(
            d=_frozen(self.d[rows].copy()),
            y=_frozen(self.y[rows].copy()),
            x=_frozen(self.x[rows].copy()),
            rho=self.rho,
            covariate_names=self.covariate_names,
        )

    def covariate(self, name: str) -> np.ndarray:
        try:
            j = self.covariate_names.index(name)
        except ValueError:
            raise ValidationError(f"unknown covariate {name!r}") from None
        return self.x[:, j]


@dataclass(frozen=True)
class LocationGrid:
    """Evenly spaced integer outcome locations 0, h, ..., J*h."""

    step_h: int
    count_j: int

    def __post_init__(self):
        if self.step_h < 1:
            raise ValidationError(f"grid step must be a positive integer, got {self.step_h}")
        if self.count_j < 1:
            raise ValidationError(f"grid interval count must be >= 1, got {self.count_j}")

    @property
    def locations(self) -> np.ndarray:
        return _frozen(np.arange(self.count_j + 1, dtype=np.int64) * self.step_h)

    @property
    def top(self) -> int:
        return self.step_h * self.count_j

    def __len__(self) -> int:
        return self.count_j + 1


@dataclass(frozen=True)
class CdfPair:
    """Estimated marginal potential-outcome CDFs for both arms on a grid.

    ``kind`` is "unadjusted" (empirical, monotone by construction) or
    "adjusted" (regression-adjusted; clamped to [0, 1] but not necessarily
    monotone). ``clamp_count`` records how many locations were clamped.
    """

    grid: LocationGrid
    f1: np.ndarray
    f0: np.ndarray
    kind: str
    clamp_count: int = 0
    rearranged: bool = False

    def __post_init__(self):
        if self.kind not in ("unadjusted", "adjusted"):
            raise ValidationError(f"unknown CDF estimator kind {self.kind!r}")
        m = len(self.grid)
        if self.f1.shape != (m,) or self.f0.shape != (m,):
            raise ValidationError("CDF arrays do not match the grid length")
        _frozen(self.f1)
        _frozen(self.f0)


@dataclass(frozen=True)
class EffectCurve:
    """Per-location effect estimates, optionally with bootstrap inference.

    For DTE the locations are the full grid. For PTE the locations are the
    bin start points y_j with y_j + span <= y_J, and ``atom_at_zero`` also
    carries the change in the probability of an exactly-zero outcome
    (identical to the DTE at location 0 for nonnegative outcomes).
    """

    grid: LocationGrid
    effect_kind: str
    locations: np.ndarray
    point: np.ndarray
    span: int | None = None
    atom_at_zero: float | None = None
    se: np.ndarray | None = None
    ci_lo: np.ndarray | None = None
    ci_hi: np.ndarray | None = None

    def __post_init__(self):
        if self.effect_kind not in ("DTE", "PTE"):
            raise ValidationError(f"unknown effect kind {self.effect_kind!r}")
        if self.point.shape != self.locations.shape:
            raise ValidationError("point array does not match the location array")
        _frozen(self.locations)
        _frozen(self.point)
        for a in (self.se, self.ci_lo, self.ci_hi):
            if a is not None:
                _frozen(a)

    def with_inference(self, se, ci_lo, ci_hi) -> "EffectCurve":
        return replace(self, se=se, ci_lo=ci_lo, ci_hi=ci_hi)


@dataclass(frozen=True)
class AteResult:
    """Average treatment effect with the control-arm mean for context."""

    point: float
    kind: str
    control_mean: float
    se: float | None = None

    def __post_init__(self):
        if self.kind not in ("unadjusted", "adjusted"):
            raise ValidationError(f"unknown ATE estimator kind {self.kind!r}")
        if self.se is not None and self.se < 0:
            raise ValidationError("standard error must be nonnegative")


def _parse_float(value, column: str, row: int) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError(
            f"non-numeric value in column {column!r} at row {row}: {value!r}"
        ) from None


def validate_dataset(
    raw: Mapping[str, Sequence] | Iterable[Mapping[str, object]],
    rho: float,
    *,
    treatment_col: str = "d",
    outcome_col: str = "y",
) -> ExperimentDataset:
    """Check raw tabular records against the dataset contract.

    Parameters
    ----------
    raw : mapping of column name to values, or iterable of row mappings
        Must contain a binary treatment column and a numeric outcome
        column; every remaining column is treated as a covariate.
    rho : float
        Design assignment probability.

    Returns
    -------
    ExperimentDataset

    Raises
    ------
    ValidationError
        Non-binary treatment, negative/NaN outcome, or a ragged covariate
        row; the message names the offending row index.
    EmptyArmError
        One of the arms contains no units.
    """
    columns = _as_columns(raw)
    if treatment_col not in columns:
        raise ValidationError(f"treatment column {treatment_col!r} missing")
    if outcome_col not in columns:
        raise ValidationError(f"outcome column {outcome_col!r} missing")
    if not 0.0 < rho < 1.0:
        raise ValidationError(f"assignment probability must lie in (0,1), got {rho}")

    d_raw = columns[treatment_col]
    y_raw = columns[outcome_col]
    cov_names = tuple(c for c in columns if c not in (treatment_col, outcome_col))
    if len(set(cov_names)) != len(cov_names):
        raise ValidationError("covariate names are not unique")

    n = len(d_raw)
    d = np.empty(n, dtype=np.int8)
    for i, v in enumerate(d_raw):
        fv = _parse_float(v, treatment_col, i)
        if fv not in (0.0, 1.0):
            raise ValidationError(f"non-binary treatment at row {i}: {v!r}")
        d[i] = int(fv)

    y = np.asarray([_parse_float(v, outcome_col, i) for i, v in enumerate(y_raw)])
    bad = np.flatnonzero(~np.isfinite(y) | (y < 0))
    if bad.size:
        raise ValidationError(f"negative or non-finite outcome at row {bad[0]}")

    if cov_names:
        cols = []
        for name in cov_names:
            col = columns[name]
            if len(col) != n:
                raise ValidationError(
                    f"covariate column {name!r} has {len(col)} rows, expected {n}"
                )
            cols.append(
                np.asarray([_parse_float(v, name, i) for i, v in enumerate(col)])
            )
        x = np.column_stack(cols)
        bad = np.flatnonzero(~np.isfinite(x).all(axis=1))
        if bad.size:
            raise ValidationError(f"non-finite covariate at row {bad[0]}")
    else:
        x = np.empty((n, 0), dtype=np.float64)

    n1 = int(d.sum())
    if n1 == 0:
        raise EmptyArmError("treated arm is empty")
    if n1 == n:
        raise EmptyArmError("control arm is empty")

    return ExperimentDataset(
        d=_frozen(d), y=_frozen(y), x=_frozen(x), rho=float(rho), covariate_names=cov_names
    )


def _as_columns(raw) -> dict[str, list]:
    if isinstance(raw, Mapping):
        return {str(k): list(v) for k, v in raw.items()}
    rows = list(raw)
    if not rows:
        raise ValidationError("dataset is empty")
    names = list(rows[0].keys())
    cols: dict[str, list] = {str(k): [] for k in names}
    for i, row in enumerate(rows):
        if set(row.keys()) != set(names):
            raise ValidationError(f"ragged record at row {i}: columns differ from header")
        for k in names:
            cols[str(k)].append(row[k])
    return cols


def build_grid(
    dataset: ExperimentDataset,
    percentile_p: float = 0.99,
    intervals_j: int = 20,
    *,
    source: str = "pooled",
) -> LocationGrid:
    """Construct the location grid covering the bulk of observed outcomes.

    The grid step is ``h = max(1, ceil(q / J))`` where q is the empirical
    ``percentile_p`` quantile of the outcomes, so the top location ``J*h``
    is at least q and every location is an integer.

    Parameters
    ----------
    source : {"pooled", "control"}
        Which outcomes the quantile is computed on. Pooled by default.

    Raises
    ------
    DegenerateGridError
        The quantile is zero (e.g. all outcomes zero); supply an explicit
        ``LocationGrid(step_h, count_j)`` instead.
    """
    if not 0.0 < percentile_p <= 1.0:
        raise ValidationError(f"percentile must lie in (0,1], got {percentile_p}")
    if intervals_j < 1:
        raise ValidationError(f"interval count must be >= 1, got {intervals_j}")
    if source == "pooled":
        pool = dataset.y
    elif source == "control":
        pool = dataset.y[dataset.d == 0]
    else:
        raise ValidationError(f"unknown grid source {source!r}")
    q = float(np.quantile(pool, percentile_p))
    if q <= 0.0:
        raise DegenerateGridError(
            f"the {percentile_p:g} outcome quantile is 0; "
            "supply an explicit grid step via LocationGrid(step_h, count_j)"
        )
    h = max(1, math.ceil(q / intervals_j))
    return LocationGrid(step_h=h, count_j=intervals_j)


def subset_by_group(
    dataset: ExperimentDataset,
    group_predicate: Callable[[Mapping[str, float]], bool],
) -> ExperimentDataset:
    """Restrict to the units whose covariates satisfy a predicate.

    The predicate receives a read-only mapping of covariate name to value
    for one unit. The returned dataset keeps rho and the covariate schema,
    so the full estimation pipeline can be rerun per subgroup.

    Raises
    ------
    EmptyArmError
        The subgroup has no treated or no control units; the message names
        the arm.
    """
    names = dataset.covariate_names
    keep = np.fromiter(
        (bool(group_predicate(dict(zip(names, row)))) for row in dataset.x),
        dtype=bool,
        count=dataset.n,
    )
    rows = np.flatnonzero(keep)
    d_sub = dataset.d[rows]
    if rows.size == 0 or not (d_sub == 1).any():
        raise EmptyArmError("subgroup has an empty treated arm")
    if not (d_sub == 0).any():
        raise EmptyArmError("subgroup has an empty control arm")
    return dataset.take(rows)


def read_csv_dataset(
    path, rho: float, *, treatment_col: str = "d", outcome_col: str = "y"
) -> ExperimentDataset:
    """Read the standard input CSV (columns d, y, then covariates)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValidationError(f"{path}: missing header row")
        rows = list(reader)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    try:
        return validate_dataset(
            rows, rho, treatment_col=treatment_col, outcome_col=outcome_col
        )
    except ValidationError as e:
        raise type(e)(f"{path}: {e}") from None


def write_csv_dataset(path, dataset: ExperimentDataset) -> None:
    """Write a dataset in the standard input CSV schema."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d", "y", *dataset.covariate_names])
        for i in range(dataset.n):
            writer.writerow(
                [int(dataset.d[i]), _fmt(dataset.y[i]), *(_fmt(v) for v in dataset.x[i])]
            )


def _fmt(v: float) -> str:
    # shortest round-trip decimal; integers without trailing ".0"
    f = float(v)
    return str(int(f)) if f.is_integer() and abs(f) < 1e16 else repr(f)
