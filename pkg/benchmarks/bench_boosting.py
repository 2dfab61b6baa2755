"""Compare the compiled and numpy boosting kernels on one workload.

Fits the same forest with each backend, times fit and predict, and
checks that the predictions agree bit for bit (the two backends are
required to produce identical arithmetic, not merely close results).

Usage: python3 benchmarks/bench_boosting.py [--n 200000] [--rounds 100] [--repeats 3]
"""
import argparse
import importlib
import sys
import time

import numpy as np

from dte_lab.boosting import BoostConfig, fit_forest
from dte_lab.simulator import default_spec, generate


def _load_kernels(name):
    try:
        return importlib.import_module(f"dte_lab.boosting._kernels_{name}")
    except ImportError:
        return None


def _time(fn, repeats):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000, help="training rows")
    ap.add_argument("--rounds", type=int, default=100, help="boosting rounds")
    ap.add_argument("--repeats", type=int, default=3, help="timing repeats, best kept")
    args = ap.parse_args(argv)

    ds = generate(default_spec(), args.n, seed=1)
    x = ds.x
    labels = (ds.y <= 1.0).astype(np.float64)
    config = BoostConfig(rounds=args.rounds)

    backends = {}
    for name in ("np", "cy"):
        kernels = _load_kernels(name)
        if kernels is None:
            print(f"backend {name}: not built, skipping")
            continue
        fit_s, forest = _time(lambda k=kernels: fit_forest(x, labels, config, kernels=k), args.repeats)
        pred_s, scores = _time(lambda k=kernels, f=forest: f.raw_scores(x, kernels=k), args.repeats)
        backends[name] = (fit_s, pred_s, scores)

    print(f"\nn={args.n} rows, p={x.shape[1]} features, rounds={args.rounds}, "
          f"best of {args.repeats}")
    print(f"{'backend':<10}{'fit (s)':>10}{'predict (s)':>14}")
    for name, (fit_s, pred_s, _) in backends.items():
        label = {"np": "numpy", "cy": "cython"}[name]
        print(f"{label:<10}{fit_s:>10.3f}{pred_s:>14.4f}")

    if len(backends) == 2:
        f_np, p_np, s_np = backends["np"]
        f_cy, p_cy, s_cy = backends["cy"]
        delta = float(np.max(np.abs(s_np - s_cy)))
        print(f"\nspeedup: fit {f_np / f_cy:.2f}x, predict {p_np / p_cy:.2f}x")
        print(f"max |prediction delta|: {delta:.1e} "
              f"({'bit-identical' if delta == 0.0 else 'MISMATCH'})")
        return 0 if delta == 0.0 else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
