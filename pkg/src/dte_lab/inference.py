"""Bootstrap standard errors and pointwise confidence intervals.

Resampling is a unit-level nonparametric bootstrap: each replicate draws
n rows with replacement, reruns the supplied pipeline, and the replicate
statistics are reduced in replicate-index order so results do not depend
on thread scheduling. A replicate whose resample has an empty arm (or
whose pipeline raises an arm-emptiness or estimation failure) is redrawn
up to 3 times before counting as failed.
"""
from __future__ import annotations

import inspect
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from ._parallel import run_indexed
from .dataset import EffectCurve, ExperimentDataset, _frozen
from .errors import EmptyArmError, EstimationError, ValidationError

__all__ = ["BootstrapConfig", "BootstrapResult", "bootstrap", "attach_inference"]

_BOOT_TAG = 41
_METHODS = ("normal", "percentile")
_NUISANCE_MODES = ("refit", "frozen")


@dataclass(frozen=True)
class BootstrapConfig:
    """Settings for `bootstrap`.

    nuisance_mode is carried as metadata for pipeline builders and run
    records; `bootstrap` itself treats the pipeline as a black box.
    stratified resampling draws within each arm (fixing n1 and n0),
    which rules out empty-arm replicates at small n.
    """

    replications: int = 500
    level: float = 0.95
    method: str = "normal"
    nuisance_mode: str = "refit"
    seed: int = 0
    stratified: bool = False

    def __post_init__(self):
        if self.replications < 2:
            raise ValidationError(f"replications must be >= 2, got {self.replications}")
        if not 0.0 < self.level < 1.0:
            raise ValidationError(f"level must lie in (0,1), got {self.level}")
        if self.method not in _METHODS:
            raise ValidationError(f"method must be one of {_METHODS}, got {self.method!r}")
        if self.nuisance_mode not in _NUISANCE_MODES:
            raise ValidationError(
                f"nuisance_mode must be one of {_NUISANCE_MODES}, got {self.nuisance_mode!r}"
            )
        if self.seed < 0:
            raise ValidationError("seed must be a nonnegative integer")


@dataclass(frozen=True)
class BootstrapResult:
    """Replicate matrix plus per-column summaries.

    Failed replicates appear as NaN rows in `replicates`; `se` and the
    CI bounds are computed over the successful rows only.
    """

    point: np.ndarray
    replicates: np.ndarray
    se: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    failures: int
    config: BootstrapConfig = field(default_factory=BootstrapConfig)

    def __post_init__(self):
        m = self.point.shape[0] if self.point.ndim == 1 else -1
        if m < 0:
            raise ValidationError("point must be a 1-d statistics vector")
        if self.replicates.shape != (self.config.replications, m):
            raise ValidationError(
                f"replicates must have shape ({self.config.replications}, {m}), "
                f"got {self.replicates.shape}"
            )
        for name in ("se", "ci_lo", "ci_hi"):
            if getattr(self, name).shape != (m,):
                raise ValidationError(f"{name} must have shape ({m},)")
        if np.any(self.se < 0):
            raise ValidationError("se must be nonnegative")
        if not 0 <= self.failures <= self.config.replications:
            raise ValidationError("failures out of range")
        for name in ("point", "replicates", "se", "ci_lo", "ci_hi"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=np.float64)))

    @property
    def successes(self) -> int:
        return self.config.replications - self.failures


def _make_caller(pipeline):
    """Call pipeline with rows/seed keywords only if it accepts them, so a
    plain dataset -> vector callable works unchanged."""
    try:
        params = inspect.signature(pipeline).parameters
    except (TypeError, ValueError):
        return lambda ds, rows, seed: pipeline(ds)
    var_kw = any(p.kind is inspect.Parameter.VAR_KEYWORD for p in params.values())
    wants_rows = var_kw or "rows" in params
    wants_seed = var_kw or "seed" in params

    def call(ds, rows, seed):
        kwargs = {}
        if wants_rows:
            kwargs["rows"] = rows
        if wants_seed:
            kwargs["seed"] = seed
        return pipeline(ds, **kwargs)

    return call


def _draw_rows(rng, dataset: ExperimentDataset, stratified: bool) -> np.ndarray:
    n = dataset.n
    if not stratified:
        return rng.integers(0, n, n)
    treated = np.flatnonzero(dataset.d == 1)
    control = np.flatnonzero(dataset.d == 0)
    return np.concatenate(
        [treated[rng.integers(0, treated.size, treated.size)],
         control[rng.integers(0, control.size, control.size)]]
    )


def bootstrap(dataset: ExperimentDataset, pipeline, config: BootstrapConfig | None = None):
    """Resample the dataset B times and summarize the pipeline statistics.

    Parameters
    ----------
    dataset : ExperimentDataset
    pipeline : callable
        Maps a dataset to a 1-d statistics vector of fixed length. If it
        accepts `rows` or `seed` keywords it additionally receives the
        resampled row indices (for reusing frozen per-unit nuisance
        predictions) and a replicate-specific derived seed.
    config : BootstrapConfig, optional

    Returns
    -------
    BootstrapResult
        With the original-sample point estimate, the B x m replicate
        matrix (NaN rows for failures), se per column, and CI bounds:
        normal CIs centered at the original point, percentile CIs from
        linearly interpolated replicate quantiles.
    """
    config = config if config is not None else BootstrapConfig()
    call = _make_caller(pipeline)
    n = dataset.n
    point = np.asarray(call(dataset, np.arange(n), config.seed), dtype=np.float64)
    if point.ndim != 1 or point.size == 0:
        raise ValidationError("pipeline must return a nonempty 1-d statistics vector")
    m = point.size

    b_total = config.replications
    replicates = np.full((b_total, m), np.nan)
    failed = np.zeros(b_total, dtype=bool)

    def make_task(b):
        def run():
            for attempt in range(4):  # original draw + 3 redraws
                ss = np.random.SeedSequence([_BOOT_TAG, config.seed, b, attempt])
                rng = np.random.default_rng(ss)
                rows = _draw_rows(rng, dataset, config.stratified)
                sub = dataset.take(rows)
                if sub.n1 == 0 or sub.n0 == 0:
                    continue
                pipe_seed = int(ss.generate_state(2, np.uint64)[1] >> 1)
                try:
                    stats = np.asarray(call(sub, rows, pipe_seed), dtype=np.float64)
                except (EmptyArmError, EstimationError):
                    continue
                if stats.shape != (m,):
                    raise EstimationError(
                        f"replicate {b} returned {stats.shape} statistics, expected ({m},)"
                    )
                replicates[b] = stats
                return
            failed[b] = True
        return run

    run_indexed([make_task(b) for b in range(b_total)])

    failures = int(failed.sum())
    if failures >= b_total / 10:
        raise EstimationError(
            f"{failures} of {b_total} bootstrap replicates failed; "
            "fewer than one in ten may fail"
        )
    good = replicates[~failed]
    se = good.std(axis=0, ddof=1)
    alpha = 1.0 - config.level
    if config.method == "normal":
        z = float(norm.ppf(1.0 - alpha / 2.0))
        ci_lo = point - z * se
        ci_hi = point + z * se
    else:
        ci_lo = np.quantile(good, alpha / 2.0, axis=0)
        ci_hi = np.quantile(good, 1.0 - alpha / 2.0, axis=0)
    return BootstrapResult(
        point=point, replicates=replicates, se=se,
        ci_lo=ci_lo, ci_hi=ci_hi, failures=failures, config=config,
    )


def attach_inference(curve: EffectCurve, result: BootstrapResult, columns=None) -> EffectCurve:
    """Copy se and CI bounds from a bootstrap result onto an effect curve.

    columns optionally selects the curve's block (a slice or index array)
    out of a wider statistics vector.
    """
    se, lo, hi = result.se, result.ci_lo, result.ci_hi
    if columns is not None:
        se, lo, hi = se[columns], lo[columns], hi[columns]
    m = curve.point.shape[0]
    if se.shape != (m,):
        raise ValidationError(
            f"bootstrap provides {se.shape[0]} column(s) but the curve has {m} location(s)"
        )
    return curve.with_inference(se=se, ci_lo=lo, ci_hi=hi)
