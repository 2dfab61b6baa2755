"""Command-line workflow: estimate, balance, simulate, subgroup, plot.

Each command reads inputs, writes its artifacts into the output
directory, and prints a one-line summary. Exit status is 0 only when
every requested artifact was written.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, build_run_config, parse_config_file
from .dataset import (
    LocationGrid,
    build_grid,
    read_csv_dataset,
    subset_by_group,
    write_csv_dataset,
)
from .diagnostics import balance_table
from .errors import ConfigError, DteLabError
from .inference import BootstrapConfig
from .pipeline import EstimateSettings, run_estimate
from . import artifacts, simulator
from .svg import render_effect_svg


def _load_config(args) -> RunConfig:
    file_values = parse_config_file(args.config) if getattr(args, "config", None) else None
    overrides = {
        "data.input": getattr(args, "input", None),
        "inference.seed": getattr(args, "seed", None),
        "output.dir": getattr(args, "out", None),
        "estimator.kind": getattr(args, "estimator", None),
        "estimator.folds": getattr(args, "folds", None),
        "inference.replications": getattr(args, "replications", None),
        "inference.level": getattr(args, "level", None),
    }
    return build_run_config(file_values, overrides)


def _require(value, flag: str):
    if value is None:
        raise ConfigError(f"{flag} is required (flag or config key)")
    return value


def _load_dataset(cfg: RunConfig):
    path = _require(cfg.input, "--input / data.input")
    return read_csv_dataset(
        path,
        cfg.rho,
        treatment_col=cfg.treatment_column,
        outcome_col=cfg.outcome_column,
    )


def _resolve_grid(cfg: RunConfig, dataset) -> LocationGrid:
    if (cfg.grid_step is None) != (cfg.grid_count is None):
        raise ConfigError("grid.step and grid.count must be set together")
    if cfg.grid_step is not None:
        return LocationGrid(step_h=cfg.grid_step, count_j=cfg.grid_count)
    return build_grid(
        dataset,
        percentile_p=cfg.grid_percentile,
        intervals_j=cfg.grid_intervals,
        source=cfg.grid_source,
    )


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(_require(cfg.out_dir, "--out / output.dir"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _estimate_into(dataset, cfg: RunConfig, out: Path):
    grid = _resolve_grid(cfg, dataset)
    settings = EstimateSettings(
        estimator=cfg.estimator,
        learner=cfg.learner,
        learner_options=cfg.nuisance_options,
        folds=cfg.folds,
        span=cfg.span,
        rearrange=cfg.rearrange,
        seed=cfg.seed,
    )
    boot = None
    if cfg.replications > 0:
        boot = BootstrapConfig(
            replications=cfg.replications,
            level=cfg.level,
            method=cfg.method,
            nuisance_mode=cfg.nuisance_mode,
            seed=cfg.seed,
            stratified=cfg.stratified,
        )
    bundle = run_estimate(dataset, grid, settings, boot)
    artifacts.write_effects_csv(
        out / "effects.csv", bundle.pair, bundle.dte_curve, bundle.pte_curve
    )
    artifacts.write_ate_csv(out / "ate.csv", bundle.ate_rows)
    artifacts.write_metadata(out / "metadata.json", bundle, dataset, cfg.seed)
    (out / "dte.svg").write_text(render_effect_svg(bundle.dte_curve), encoding="utf-8")
    (out / "pte.svg").write_text(render_effect_svg(bundle.pte_curve), encoding="utf-8")
    return bundle


def cmd_estimate(args) -> int:
    cfg = _load_config(args)
    dataset = _load_dataset(cfg)
    out = _out_dir(cfg)
    bundle = _estimate_into(dataset, cfg, out)
    ate_bits = ", ".join(
        f"{r.kind} ATE {r.point:+.4f}" + (f" (se {r.se:.4f})" if r.se is not None else "")
        for r in bundle.ate_rows
    )
    print(f"estimate: wrote {out}/effects.csv ate.csv metadata.json dte.svg pte.svg; {ate_bits}")
    return 0


def cmd_balance(args) -> int:
    cfg = _load_config(args)
    dataset = _load_dataset(cfg)
    out = _out_dir(cfg)
    rows = balance_table(dataset) if dataset.p else []
    artifacts.write_balance_csv(out / "balance.csv", rows)
    large = [r for r in rows if not r.degenerate and abs(r.t) > 1.96]
    line = f"balance: {len(large)} of {len(rows)} covariates with |t| > 1.96"
    if large:
        worst = sorted(large, key=lambda r: -abs(r.t))
        line += ": " + ", ".join(f"{r.name} (t={r.t:.2f})" for r in worst)
    print(line)
    return 0


_BUILTIN_SPECS = {
    "default": simulator.default_spec,
    "gender_interacted": simulator.gender_interacted_spec,
    "grid_aligned": simulator.grid_aligned_spec,
}


def cmd_simulate(args) -> int:
    if args.spec in _BUILTIN_SPECS:
        spec = _BUILTIN_SPECS[args.spec]()
    else:
        spec = simulator.load_spec(args.spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = simulator.generate(spec, args.n, seed=args.seed)
    write_csv_dataset(out / "data.csv", dataset)
    simulator.save_spec(spec, out / "spec.json")
    print(
        f"simulate: wrote {out}/data.csv ({dataset.n} rows, "
        f"{dataset.n1} treated / {dataset.n0} control) and spec.json"
    )
    return 0


def cmd_subgroup(args) -> int:
    cfg = _load_config(args)
    if not args.group_by:
        raise ConfigError("--group-by is required")
    dataset = _load_dataset(cfg)
    if args.group_by not in dataset.covariate_names:
        raise ConfigError(
            f"unknown covariate {args.group_by!r}; available: "
            f"{', '.join(dataset.covariate_names)}"
        )
    out = _out_dir(cfg)
    values = np.unique(dataset.covariate(args.group_by))
    failures = []
    sizes = []
    for v in values:
        label = str(int(v)) if float(v) == int(v) else repr(float(v))
        group_dir = out / f"{args.group_by}={label}"
        try:
            group = subset_by_group(
                dataset, lambda row, v=v: row[args.group_by] == v
            )
            group_dir.mkdir(parents=True, exist_ok=True)
            _estimate_into(group, cfg, group_dir)
            sizes.append((label, group.n))
            print(f"subgroup {args.group_by}={label}: n={group.n}, wrote {group_dir}")
        except DteLabError as e:
            failures.append(label)
            print(f"subgroup {args.group_by}={label}: error: {e}", file=sys.stderr)
    done = ", ".join(f"{lbl} (n={n})" for lbl, n in sizes)
    print(f"subgroup: {len(sizes)} of {len(values)} groups completed: {done}")
    return 0 if not failures else 1


def cmd_plot(args) -> int:
    dte_curve, pte_curve = artifacts.read_effects_csv(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "dte.svg").write_text(render_effect_svg(dte_curve), encoding="utf-8")
    (out / "pte.svg").write_text(render_effect_svg(pte_curve), encoding="utf-8")
    print(f"plot: wrote {out}/dte.svg and {out}/pte.svg")
    return 0


def _add_common(p, *, with_estimation=True):
    p.add_argument("--input", help="input CSV path")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="run seed")
    if with_estimation:
        p.add_argument("--estimator", choices=("unadjusted", "adjusted"))
        p.add_argument("--folds", type=int, help="cross-fitting folds")
        p.add_argument("--replications", type=int, help="bootstrap replications (0 disables)")
        p.add_argument("--level", type=float, help="confidence level")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dte-lab",
        description=(
            "Distributional and average treatment effects from randomized "
            "experiments, with cross-fitted regression adjustment."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="estimate DTE/PTE/ATE with inference")
    _add_common(p_est)
    p_est.set_defaults(func=cmd_estimate)

    p_bal = sub.add_parser("balance", help="covariate balance table")
    _add_common(p_bal, with_estimation=False)
    p_bal.set_defaults(func=cmd_balance)

    p_sim = sub.add_parser("simulate", help="draw synthetic experiment data")
    p_sim.add_argument(
        "--spec",
        default="default",
        help="builtin name (default, gender_interacted, grid_aligned) or JSON path",
    )
    p_sim.add_argument("--n", type=int, required=True, help="number of units")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_sub = sub.add_parser("subgroup", help="estimate separately per covariate value")
    _add_common(p_sub)
    p_sub.add_argument("--group-by", help="covariate to split on")
    p_sub.set_defaults(func=cmd_subgroup)

    p_plot = sub.add_parser("plot", help="re-render SVG plots from effects.csv")
    p_plot.add_argument("--input", required=True, help="effects.csv path")
    p_plot.add_argument("--out", required=True, help="output directory")
    p_plot.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DteLabError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
