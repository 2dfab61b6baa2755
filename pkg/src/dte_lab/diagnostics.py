"""Covariate balance between randomized arms.

Per covariate: difference in arm means, an unpooled Welch-style standard
error from unbiased per-arm sample variances, and the t-statistic. With
heavily unequal arms there is no pooling assumption to lean on, so the
unpooled form is used throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import ExperimentDataset
from .errors import ValidationError

__all__ = ["BalanceRow", "balance_table"]


@dataclass(frozen=True)
class BalanceRow:
    """Balance summary for one covariate.

    t is NaN when both arms have zero variance (degenerate=True); then
    the comparison carries no information at this sample size.
    """

    name: str
    mean_diff: float
    se: float
    t: float
    degenerate: bool = False

    def __post_init__(self):
        if self.se < 0:
            raise ValidationError("se must be nonnegative")
        if not self.degenerate and not math.isfinite(self.t):
            raise ValidationError("non-degenerate rows need a finite t")


def balance_table(dataset: ExperimentDataset) -> list[BalanceRow]:
    """Compute one BalanceRow per covariate, in dataset schema order.

    mean_diff is treated minus control. se = sqrt(s1^2/n1 + s0^2/n0)
    with s_d^2 the ddof=1 sample variance, which needs at least two
    units per arm.
    """
    if dataset.p < 1:
        raise ValidationError("balance requires at least one covariate")
    if dataset.n1 < 2 or dataset.n0 < 2:
        raise ValidationError(
            "balance requires at least 2 units per arm, got "
            f"{dataset.n1} treated and {dataset.n0} control"
        )
    treated = dataset.x[dataset.d == 1]
    control = dataset.x[dataset.d == 0]
    rows = []
    for j, name in enumerate(dataset.covariate_names):
        x1, x0 = treated[:, j], control[:, j]
        mean_diff = float(x1.mean() - x0.mean())
        se = float(np.sqrt(x1.var(ddof=1) / x1.size + x0.var(ddof=1) / x0.size))
        if se == 0.0:
            rows.append(BalanceRow(name, mean_diff, 0.0, float("nan"), degenerate=True))
        else:
            rows.append(BalanceRow(name, mean_diff, se, mean_diff / se))
    return rows
