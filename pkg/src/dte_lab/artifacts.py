"""Reading and writing run artifacts: effects.csv, ate.csv, balance.csv,
metadata.json. Floats are written with repr (shortest round trip), so
byte-level determinism follows from bit-level determinism upstream.
"""
from __future__ import annotations

import csv
import json

import numpy as np

from .boosting import backend_name
from .dataset import EffectCurve, ExperimentDataset, LocationGrid
from .errors import ValidationError

__all__ = [
    "write_effects_csv",
    "write_ate_csv",
    "write_balance_csv",
    "write_metadata",
    "read_effects_csv",
]

EFFECTS_COLUMNS = (
    "location", "f1", "f0",
    "dte", "dte_se", "dte_lo", "dte_hi",
    "pte", "pte_se", "pte_lo", "pte_hi",
)


def _cell(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def write_effects_csv(path, pair, dte_curve: EffectCurve, pte_curve: EffectCurve) -> None:
    """One row per grid location; PTE cells are blank past its last start
    point (intervals reaching beyond the grid are not estimated)."""
    pte_by_loc = {int(loc): i for i, loc in enumerate(pte_curve.locations)}

    def curve_cells(curve, idx):
        if idx is None:
            return [None, None, None, None]
        return [
            curve.point[idx],
            None if curve.se is None else curve.se[idx],
            None if curve.ci_lo is None else curve.ci_lo[idx],
            None if curve.ci_hi is None else curve.ci_hi[idx],
        ]

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EFFECTS_COLUMNS)
        for j, loc in enumerate(dte_curve.grid.locations):
            row = [str(int(loc))]
            row.extend(_cell(v) for v in (pair.f1[j], pair.f0[j]))
            row.extend(_cell(v) for v in curve_cells(dte_curve, j))
            row.extend(_cell(v) for v in curve_cells(pte_curve, pte_by_loc.get(int(loc))))
            writer.writerow(row)


def write_ate_csv(path, ate_rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "point", "se", "control_mean"])
        for row in ate_rows:
            writer.writerow(
                [row.kind, _cell(row.point), _cell(row.se), _cell(row.control_mean)]
            )


def write_balance_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["variable", "mean_diff", "se", "t"])
        for row in rows:
            writer.writerow([row.name, _cell(row.mean_diff), _cell(row.se), _cell(row.t)])


def write_metadata(path, bundle, dataset: ExperimentDataset, run_seed: int) -> None:
    """Reproducibility record: seeds, clamp counts, nuisance mode, sizes."""
    result = bundle.bootstrap_result
    meta = {
        "backend": backend_name(),
        "clamp_count": int(bundle.pair.clamp_count),
        "estimator": bundle.settings.estimator,
        "learner": bundle.settings.learner if bundle.settings.estimator == "adjusted" else None,
        "nuisance_options": dict(bundle.settings.learner_options),
        "folds": bundle.settings.folds if bundle.settings.estimator == "adjusted" else None,
        "nonconverged_fits": int(bundle.nonconverged),
        "rearranged": bool(bundle.pair.rearranged),
        "grid": {
            "step_h": int(bundle.grid.step_h),
            "count_j": int(bundle.grid.count_j),
            "top": int(bundle.grid.top),
        },
        "span": int(bundle.pte_curve.span),
        "seed": int(run_seed),
        "n": int(dataset.n),
        "n_treated": int(dataset.n1),
        "n_control": int(dataset.n0),
        "rho": float(dataset.rho),
        "inference": None if result is None else {
            "replications": int(result.config.replications),
            "level": float(result.config.level),
            "method": result.config.method,
            "nuisance_mode": result.config.nuisance_mode,
            "stratified": bool(result.config.stratified),
            "seed": int(result.config.seed),
            "failures": int(result.failures),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_cell(raw: str):
    return None if raw == "" else float(raw)


def read_effects_csv(path):
    """Rebuild (pair-less) DTE and PTE curves from an effects.csv file."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != EFFECTS_COLUMNS:
            raise ValidationError(
                f"{path}: expected columns {','.join(EFFECTS_COLUMNS)}"
            )
        rows = list(reader)
    if len(rows) < 2:
        raise ValidationError(f"{path}: needs at least two grid locations")
    try:
        locations = np.array([int(r["location"]) for r in rows], dtype=np.int64)
    except ValueError:
        raise ValidationError(f"{path}: locations must be integers") from None
    step = int(locations[1] - locations[0])
    if step < 1 or np.any(np.diff(locations) != step):
        raise ValidationError(f"{path}: locations must be evenly spaced")
    grid = LocationGrid(step_h=step, count_j=len(rows) - 1)

    def column(name, rows_subset):
        vals = [_parse_cell(r[name]) for r in rows_subset]
        if any(v is None for v in vals):
            return None
        return np.array(vals, dtype=np.float64)

    dte_point = column("dte", rows)
    if dte_point is None:
        raise ValidationError(f"{path}: dte column has blank entries")
    dte_curve = EffectCurve(
        grid=grid,
        effect_kind="DTE",
        locations=locations.copy(),
        point=dte_point,
        atom_at_zero=float(dte_point[0]),
        se=column("dte_se", rows),
        ci_lo=column("dte_lo", rows),
        ci_hi=column("dte_hi", rows),
    )
    pte_rows = [r for r in rows if r["pte"] != ""]
    if not pte_rows:
        raise ValidationError(f"{path}: pte column is entirely blank")
    s = len(rows) - len(pte_rows)
    if s < 1:
        raise ValidationError(
            f"{path}: pte must be blank for interval starts beyond the grid"
        )
    pte_curve = EffectCurve(
        grid=grid,
        effect_kind="PTE",
        locations=locations[: len(pte_rows)].copy(),
        point=column("pte", pte_rows),
        span=s * step,
        atom_at_zero=float(dte_point[0]),
        se=column("pte_se", pte_rows),
        ci_lo=column("pte_lo", pte_rows),
        ci_hi=column("pte_hi", pte_rows),
    )
    return dte_curve, pte_curve
