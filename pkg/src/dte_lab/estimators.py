"""Point estimators for average, distributional, and probability effects.

Each estimator comes in an unadjusted (empirical) and a regression-
adjusted form. The adjusted CDF at location y for arm d averages the
arm's residuals 1{Y<=y} - F_hat(y|X) and adds back the all-units mean of
F_hat(y|X), so a constant nuisance cancels exactly and a good nuisance
removes covariate noise.
"""
from __future__ import annotations

import warnings

import numpy as np
from scipy.optimize import isotonic_regression

from .dataset import AteResult, CdfPair, EffectCurve, ExperimentDataset, LocationGrid
from .errors import EmptyArmError, EstimationError
from .nuisance import CrossFitPredictions

__all__ = [
    "empirical_cdf_pair",
    "adjusted_cdf_pair",
    "rearrange_cdf_pair",
    "dte",
    "pte",
    "ate",
    "ate_adjusted",
    "ate_from_dte",
]


def _arm_outcomes(dataset: ExperimentDataset):
    y1 = dataset.y[dataset.d == 1]
    y0 = dataset.y[dataset.d == 0]
    if y1.size == 0:
        raise EmptyArmError("treated arm is empty")
    if y0.size == 0:
        raise EmptyArmError("control arm is empty")
    return y1, y0


def empirical_cdf_pair(dataset: ExperimentDataset, grid: LocationGrid) -> CdfPair:
    """Per-arm empirical CDFs on the grid: f_d(y) = mean of 1{Y_i <= y} in arm d."""
    y1, y0 = _arm_outcomes(dataset)
    locs = grid.locations
    f1 = np.searchsorted(np.sort(y1), locs, side="right") / y1.size
    f0 = np.searchsorted(np.sort(y0), locs, side="right") / y0.size
    return CdfPair(grid=grid, f1=f1, f0=f0, kind="unadjusted")


def _check_cfp(dataset, grid, cfp: CrossFitPredictions):
    if cfp.grid != grid:
        raise EstimationError(
            f"prediction grid {cfp.grid} does not match the requested grid {grid}"
        )
    if cfp.n != dataset.n:
        raise EstimationError(
            f"predictions cover {cfp.n} units but the dataset has {dataset.n}"
        )


def adjusted_cdf_pair(
    dataset: ExperimentDataset, grid: LocationGrid, cfp: CrossFitPredictions
) -> CdfPair:
    """Regression-adjusted marginal CDFs.

    For each arm d and location y: the arm mean of 1{Y<=y} - F_hat(y|X)
    plus the all-units mean of F_hat(y|X). Values are clamped to [0, 1]
    afterwards and the number of clamped cells is recorded, because the
    raw sum can stray outside in finite samples.
    """
    _check_cfp(dataset, grid, cfp)
    bad = np.argwhere(np.isnan(cfp.f_cond))
    if bad.size:
        d_i, j_i, u_i = bad[0]
        raise EstimationError(
            f"missing nuisance prediction for arm {d_i} at location "
            f"{grid.locations[j_i]} for unit {u_i}"
        )
    _arm_outcomes(dataset)

    ind = (dataset.y[None, :] <= grid.locations[:, None]).astype(np.float64)
    curves = []
    clamped = 0
    for d in (0, 1):
        arm = dataset.d == d
        resid = ind[:, arm] - cfp.f_cond[d][:, arm]
        f = resid.mean(axis=1) + cfp.f_cond[d].mean(axis=1)
        clamped += int(((f < 0.0) | (f > 1.0)).sum())
        curves.append(np.clip(f, 0.0, 1.0))
    return CdfPair(
        grid=grid, f1=curves[1], f0=curves[0], kind="adjusted", clamp_count=clamped
    )


def rearrange_cdf_pair(pair: CdfPair) -> CdfPair:
    """Isotonic (pool-adjacent-violators) rearrangement of both curves.

    Presentation aid for adjusted estimates, which need not be monotone;
    applied before differencing when requested. Projection preserves the
    [0, 1] range.
    """
    f1 = isotonic_regression(pair.f1).x
    f0 = isotonic_regression(pair.f0).x
    return CdfPair(
        grid=pair.grid,
        f1=f1,
        f0=f0,
        kind=pair.kind,
        clamp_count=pair.clamp_count,
        rearranged=True,
    )


def dte(pair: CdfPair) -> EffectCurve:
    """Distributional treatment effect: F1 - F0 at every grid location."""
    return EffectCurve(
        grid=pair.grid,
        effect_kind="DTE",
        locations=pair.grid.locations.copy(),
        point=pair.f1 - pair.f0,
    )


def pte(pair: CdfPair, span: int | None = None) -> EffectCurve:
    """Probability treatment effect on intervals (y_j, y_j + span].

    The span defaults to the grid step and must be a positive multiple of
    it. Locations are the bin starts y_j with y_j + span <= y_J. The zero
    atom (change in the probability of an exactly-zero outcome, which is
    DTE at 0 for nonnegative outcomes) rides along separately so callers
    can report "did not engage at all" on its own.
    """
    h = pair.grid.step_h
    span = h if span is None else int(span)
    if span <= 0 or span % h != 0:
        raise EstimationError(f"span must be a positive multiple of the grid step {h}")
    s = span // h
    if s > pair.grid.count_j:
        raise EstimationError(
            f"span {span} exceeds the grid range {pair.grid.top}"
        )
    delta = pair.f1 - pair.f0
    point = delta[s:] - delta[:-s]
    return EffectCurve(
        grid=pair.grid,
        effect_kind="PTE",
        locations=pair.grid.locations[: len(pair.grid) - s].copy(),
        point=point,
        span=span,
        atom_at_zero=float(delta[0]),
    )


def ate(dataset: ExperimentDataset) -> AteResult:
    """Difference in arm means, with the control mean for context."""
    y1, y0 = _arm_outcomes(dataset)
    control_mean = float(y0.mean())
    return AteResult(
        point=float(y1.mean()) - control_mean, kind="unadjusted", control_mean=control_mean
    )


def ate_adjusted(dataset: ExperimentDataset, cfp: CrossFitPredictions) -> AteResult:
    """Regression-adjusted ATE via the same residual-plus-projection form.

    E_hat[Y(d)] = arm mean of (Y - mu_hat_d(X)) + all-units mean of
    mu_hat_d(X); the reported control mean is the adjusted E_hat[Y(0)].
    """
    if cfp.n != dataset.n:
        raise EstimationError(
            f"predictions cover {cfp.n} units but the dataset has {dataset.n}"
        )
    bad = np.argwhere(np.isnan(cfp.mu_cond))
    if bad.size:
        d_i, u_i = bad[0]
        raise EstimationError(
            f"missing conditional-mean prediction for arm {d_i}, unit {u_i}"
        )
    _arm_outcomes(dataset)
    means = []
    for d in (0, 1):
        arm = dataset.d == d
        means.append(
            float((dataset.y[arm] - cfp.mu_cond[d][arm]).mean() + cfp.mu_cond[d].mean())
        )
    return AteResult(point=means[1] - means[0], kind="adjusted", control_mean=means[0])


def ate_from_dte(curve: EffectCurve, step_h: int, outcomes=None) -> float:
    """Recover the ATE from a DTE curve: -h times the sum over j < J.

    Exact whenever all outcomes sit on grid points within [0, y_J]
    (E[Y] = h * sum of survival probabilities at y_0..y_{J-1}); pass the
    observed outcomes to get a warning when that premise fails and the
    identity is only approximate.
    """
    if curve.effect_kind != "DTE":
        raise EstimationError("expected a DTE curve")
    if outcomes is not None:
        y = np.asarray(outcomes, dtype=np.float64)
        top = curve.locations[-1]
        off = (y > top) | (np.abs(y - step_h * np.round(y / step_h)) > 1e-9)
        if off.any():
            warnings.warn(
                f"{int(off.sum())} outcome(s) lie off the grid; the DTE-sum "
                "identity holds only approximately",
                stacklevel=2,
            )
    return float(-step_h * curve.point[:-1].sum())
