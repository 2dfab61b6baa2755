"""End-to-end estimation runs: point estimates plus bootstrap inference.

A run produces DTE and PTE curves, ATE rows, and (for adjusted runs) the
unadjusted counterparts needed for side-by-side reporting. For bootstrap
the same computation is packaged as a statistics-vector pipeline whose
blocks are addressed through a layout mapping, so each replicate fills
one row of a flat matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import AteResult, CdfPair, EffectCurve, ExperimentDataset, LocationGrid
from .errors import ConfigError
from .estimators import (
    adjusted_cdf_pair,
    ate,
    ate_adjusted,
    dte,
    empirical_cdf_pair,
    pte,
    rearrange_cdf_pair,
)
from .inference import BootstrapConfig, BootstrapResult, attach_inference, bootstrap
from .nuisance import CrossFitPredictions, cross_fit, make_fold_plan, make_learner_factory

__all__ = ["EstimateSettings", "EstimateBundle", "statistic_layout", "build_pipeline", "run_estimate"]

_ESTIMATORS = ("unadjusted", "adjusted")


@dataclass(frozen=True)
class EstimateSettings:
    """What to estimate and how: estimator kind, nuisance learner, folds."""

    estimator: str = "adjusted"
    learner: str = "boosted_stumps"
    learner_options: tuple = ()  # (key, value) pairs, hashable
    folds: int = 3
    span: int | None = None
    rearrange: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.estimator not in _ESTIMATORS:
            raise ConfigError(
                f"estimator must be one of {_ESTIMATORS}, got {self.estimator!r}"
            )
        if self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")

    def options_dict(self) -> dict:
        return dict(self.learner_options)


@dataclass(frozen=True)
class EstimateBundle:
    """Everything one estimation run produced."""

    settings: EstimateSettings
    grid: LocationGrid
    pair: CdfPair
    dte_curve: EffectCurve
    pte_curve: EffectCurve
    ate_rows: tuple[AteResult, ...]
    bootstrap_result: BootstrapResult | None = None
    layout: dict = field(default_factory=dict)
    nonconverged: int = 0


def statistic_layout(grid: LocationGrid, span: int | None, estimator: str) -> dict:
    """Column blocks of the replicate statistics vector.

    Adjusted runs carry [dte, pte, ate, ate_unadjusted, dte_unadjusted]
    so adjusted and unadjusted uncertainties come from the same
    resamples; unadjusted runs carry [dte, pte, ate].
    """
    j1 = len(grid)
    s = (span if span is not None else grid.step_h) // grid.step_h
    pte_len = j1 - s
    layout = {
        "dte": slice(0, j1),
        "pte": slice(j1, j1 + pte_len),
        "ate": j1 + pte_len,
    }
    if estimator == "adjusted":
        layout["ate_unadjusted"] = j1 + pte_len + 1
        layout["dte_unadjusted"] = slice(j1 + pte_len + 2, 2 * j1 + pte_len + 2)
    return layout


def _unadjusted_stats(ds: ExperimentDataset, grid: LocationGrid, span):
    pair = empirical_cdf_pair(ds, grid)
    dte_curve = dte(pair)
    pte_curve = pte(pair, span)
    a = ate(ds)
    return pair, dte_curve, pte_curve, a


def _adjusted_stats(ds, grid, span, rearrange, cfp):
    pair = adjusted_cdf_pair(ds, grid, cfp)
    if rearrange:
        pair = rearrange_cdf_pair(pair)
    dte_curve = dte(pair)
    pte_curve = pte(pair, span)
    a = ate_adjusted(ds, cfp)
    return pair, dte_curve, pte_curve, a


def build_pipeline(
    dataset: ExperimentDataset,
    grid: LocationGrid,
    settings: EstimateSettings,
    nuisance_mode: str = "refit",
):
    """Return (pipeline, layout) for `bootstrap`.

    refit mode re-runs fold assignment and cross-fitting inside every
    replicate; frozen mode cross-fits once on the full sample here and
    replicates only re-average the stored per-unit predictions (selected
    by the resampled row indices).
    """
    span = settings.span
    layout = statistic_layout(grid, span, settings.estimator)

    if settings.estimator == "unadjusted":
        def pipeline(ds, rows=None, seed=0):
            _, dte_c, pte_c, a = _unadjusted_stats(ds, grid, span)
            return np.concatenate([dte_c.point, pte_c.point, [a.point]])

        return pipeline, layout

    factory = make_learner_factory(settings.learner, **settings.options_dict())

    if nuisance_mode == "frozen":
        plan = make_fold_plan(dataset, settings.folds, seed=settings.seed)
        full = cross_fit(dataset, grid, factory, plan, seed=settings.seed)

        def cfp_for(ds, rows, seed):
            if rows is None:
                rows = np.arange(ds.n)
            # take() keeps the row axis contiguous, so averaging the
            # selected predictions reassociates exactly like refit mode
            return CrossFitPredictions(
                grid=grid,
                f_cond=np.take(full.f_cond, rows, axis=2),
                mu_cond=np.take(full.mu_cond, rows, axis=1),
                learner_name=full.learner_name,
                nonconverged=full.nonconverged,
            )
    elif nuisance_mode == "refit":
        def cfp_for(ds, rows, seed):
            plan = make_fold_plan(ds, settings.folds, seed=seed)
            return cross_fit(ds, grid, factory, plan, seed=seed)
    else:
        raise ConfigError(f"unknown nuisance mode {nuisance_mode!r}")

    def pipeline(ds, rows=None, seed=settings.seed):
        cfp = cfp_for(ds, rows, seed)
        _, dte_c, pte_c, a_adj = _adjusted_stats(ds, grid, span, settings.rearrange, cfp)
        _, dte_un, _, a_un = _unadjusted_stats(ds, grid, span)
        return np.concatenate(
            [dte_c.point, pte_c.point, [a_adj.point, a_un.point], dte_un.point]
        )

    return pipeline, layout


def run_estimate(
    dataset: ExperimentDataset,
    grid: LocationGrid,
    settings: EstimateSettings,
    boot: BootstrapConfig | None = None,
) -> EstimateBundle:
    """Point estimation, optionally followed by bootstrap inference.

    The bootstrap reuses the run seed so the fold assignment of the
    full-sample point estimate and of the bootstrap's internal point
    call coincide exactly.
    """
    nonconverged = 0
    if settings.estimator == "unadjusted":
        pair, dte_c, pte_c, a = _unadjusted_stats(dataset, grid, settings.span)
        ate_rows = [a]
    else:
        factory = make_learner_factory(settings.learner, **settings.options_dict())
        plan = make_fold_plan(dataset, settings.folds, seed=settings.seed)
        cfp = cross_fit(dataset, grid, factory, plan, seed=settings.seed)
        nonconverged = cfp.nonconverged
        pair, dte_c, pte_c, a_adj = _adjusted_stats(
            dataset, grid, settings.span, settings.rearrange, cfp
        )
        _, _, _, a_un = _unadjusted_stats(dataset, grid, settings.span)
        ate_rows = [a_un, a_adj]  # unadjusted first, adjusted second

    layout = statistic_layout(grid, settings.span, settings.estimator)
    result = None
    if boot is not None:
        boot = replace(boot, seed=settings.seed)
        pipeline, layout = build_pipeline(dataset, grid, settings, boot.nuisance_mode)
        result = bootstrap(dataset, pipeline, boot)
        dte_c = attach_inference(dte_c, result, columns=layout["dte"])
        pte_c = attach_inference(pte_c, result, columns=layout["pte"])
        if settings.estimator == "unadjusted":
            ate_rows = [replace(ate_rows[0], se=float(result.se[layout["ate"]]))]
        else:
            ate_rows = [
                replace(ate_rows[0], se=float(result.se[layout["ate_unadjusted"]])),
                replace(ate_rows[1], se=float(result.se[layout["ate"]])),
            ]

    return EstimateBundle(
        settings=settings,
        grid=grid,
        pair=pair,
        dte_curve=dte_c,
        pte_curve=pte_c,
        ate_rows=tuple(ate_rows),
        bootstrap_result=result,
        layout=layout,
        nonconverged=nonconverged,
    )
