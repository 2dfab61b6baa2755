"""Histogram-based Newton boosting with depth-limited trees.

Features are quantile-binned once per fit; split search runs on bin
histograms, but thresholds are stored as raw cut values so prediction
works on unbinned features. There is no row or column subsampling, so
fitting is deterministic without any RNG. Two losses: logistic (binary
probability) and squared (conditional mean).

Only the histogram accumulation, the row partition, and the forest
traversal are backend kernels; everything else is shared numpy code
operating on kernel outputs, which keeps the two backends bit-identical.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from ..errors import EstimationError
from ._backend import kernels as _default_kernels

__all__ = ["BoostConfig", "Forest", "fit_forest"]

# code values fit a uint8 and histograms stay cache-friendly
MAX_BINS_LIMIT = 256

_PROB_FLOOR = 1e-6  # keeps logit(base rate) finite on degenerate labels


@dataclass(frozen=True)
class BoostConfig:
    """Hyperparameters for one boosted forest."""

    rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 2
    min_leaf: int = 20
    # small enough that 100 rounds drive a deterministic two-cell problem
    # to within 1e-3 of the clipped log-loss optimum
    l2: float = 0.1
    max_bins: int = 64
    loss: str = "logistic"

    def __post_init__(self):
        if self.rounds < 0:
            raise EstimationError("rounds must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise EstimationError("learning_rate must lie in (0, 1]")
        if self.max_depth < 1:
            raise EstimationError("max_depth must be >= 1")
        if self.min_leaf < 1:
            raise EstimationError("min_leaf must be >= 1")
        if self.l2 < 0.0:
            raise EstimationError("l2 must be >= 0")
        if not 2 <= self.max_bins <= MAX_BINS_LIMIT:
            raise EstimationError(f"max_bins must lie in [2, {MAX_BINS_LIMIT}]")
        if self.loss not in ("logistic", "squared"):
            raise EstimationError(f"unknown loss {self.loss!r}")


@dataclass(frozen=True)
class Forest:
    """Fitted forest as flat node arrays; feature < 0 marks a leaf."""

    config: BoostConfig
    n_features: int
    base_score: float
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray

    @property
    def n_trees(self) -> int:
        return self.roots.size

    def raw_scores(self, x, kernels=None) -> np.ndarray:
        k = kernels or _default_kernels
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise EstimationError(
                f"expected {self.n_features} feature columns, got shape {x.shape}"
            )
        return k.predict_forest(
            x, self.feature, self.threshold, self.left, self.right,
            self.value, self.roots, self.config.learning_rate, self.base_score,
        )

    def predict_proba(self, x, kernels=None) -> np.ndarray:
        if self.config.loss != "logistic":
            raise EstimationError("predict_proba requires the logistic loss")
        return expit(self.raw_scores(x, kernels))

    def predict_mean(self, x, kernels=None) -> np.ndarray:
        if self.config.loss != "squared":
            raise EstimationError("predict_mean requires the squared loss")
        return self.raw_scores(x, kernels)


def fit_forest(x, targets, config: BoostConfig, kernels=None) -> Forest:
    """Fit a boosted forest on raw features.

    For the logistic loss, targets are 0/1 labels and the base score is
    the logit of the (floored) base rate; all-equal labels short-circuit
    to a treeless forest. For the squared loss, the base score is the
    target mean.
    """
    k = kernels or _default_kernels
    x = np.ascontiguousarray(x, dtype=np.float64)
    t = np.ascontiguousarray(targets, dtype=np.float64)
    if x.ndim != 2 or t.ndim != 1 or x.shape[0] != t.shape[0]:
        raise EstimationError(f"bad training shapes x{x.shape}, targets{t.shape}")
    n, p = x.shape
    if n < 1:
        raise EstimationError("need at least one training sample")

    logistic = config.loss == "logistic"
    if logistic:
        if ((t != 0.0) & (t != 1.0)).any():
            raise EstimationError("logistic loss requires 0/1 labels")
        rate_bar = min(max(float(t.mean()), _PROB_FLOOR), 1.0 - _PROB_FLOOR)
        base = float(logit(rate_bar))
        degenerate = t.min() == t.max()
    else:
        base = float(t.mean())
        degenerate = False

    store = _NodeStore()
    roots: list[int] = []
    rounds = 0 if degenerate else config.rounds
    if rounds > 0:
        codes, cuts = _bin_features(x, config.max_bins)
        scores = np.full(n, base)
        all_rows = np.arange(n, dtype=np.int64)
        ones = np.ones(n)
        for _ in range(rounds):
            if logistic:
                prob = expit(scores)
                grad = prob - t
                hess = prob * (1.0 - prob)
            else:
                grad = scores - t
                hess = ones
            root, leaf_updates = _grow_tree(
                codes, cuts, grad, hess, all_rows, config, k, store
            )
            if len(leaf_updates) == 1 and leaf_updates[0][1] == 0.0:
                # a zero root-leaf step means the fit has converged
                store.truncate(root)
                break
            roots.append(root)
            for rows, val in leaf_updates:
                scores[rows] += config.learning_rate * val

    return Forest(
        config=config,
        n_features=p,
        base_score=base,
        feature=np.asarray(store.feature, dtype=np.int32),
        threshold=np.asarray(store.threshold, dtype=np.float64),
        left=np.asarray(store.left, dtype=np.int32),
        right=np.asarray(store.right, dtype=np.int32),
        value=np.asarray(store.value, dtype=np.float64),
        roots=np.asarray(roots, dtype=np.int64),
    )


def _bin_features(x, max_bins):
    """Quantile cuts and uint8 codes; code c means x <= cuts[c] (first such)."""
    n, p = x.shape
    codes = np.zeros((n, p), dtype=np.uint8)
    cuts = []
    probs = np.linspace(0.0, 1.0, max_bins + 1)[1:-1]
    for j in range(p):
        col = x[:, j]
        cj = np.unique(np.quantile(col, probs))
        cuts.append(cj)
        codes[:, j] = np.searchsorted(cj, col, side="left")
    return codes, cuts


class _NodeStore:
    """Flat growable node arrays shared by all trees of one forest."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def truncate(self, first_id: int) -> None:
        del self.feature[first_id:]
        del self.threshold[first_id:]
        del self.left[first_id:]
        del self.right[first_id:]
        del self.value[first_id:]


def _grow_tree(codes, cuts, grad, hess, rows, config, k, store):
    """Grow one depth-limited tree; returns (root id, [(leaf rows, value)])."""
    leaf_updates = []
    root = store.new_node()
    queue = [(root, rows, 0)]
    while queue:
        nid, nrows, depth = queue.pop(0)
        g_tot = float(grad[nrows].sum())
        h_tot = float(hess[nrows].sum())
        best = None
        if depth < config.max_depth and nrows.size >= 2 * config.min_leaf:
            best = _best_split(codes, cuts, grad, hess, nrows, g_tot, h_tot, config, k)
        if best is None:
            val = -g_tot / (h_tot + config.l2)
            store.value[nid] = val
            leaf_updates.append((nrows, val))
        else:
            feat, split_bin = best
            lrows, rrows = k.partition_rows(codes, feat, split_bin, nrows)
            lid = store.new_node()
            rid = store.new_node()
            store.feature[nid] = feat
            store.threshold[nid] = float(cuts[feat][split_bin])
            store.left[nid] = lid
            store.right[nid] = rid
            queue.append((lid, lrows, depth + 1))
            queue.append((rid, rrows, depth + 1))
    return root, leaf_updates


def _best_split(codes, cuts, grad, hess, rows, g_tot, h_tot, config, k):
    """Highest-gain (feature, bin) split, or None when no gain beats zero.

    Ties break to the lowest feature index, then the lowest bin, so the
    search order is part of the determinism contract.
    """
    p = codes.shape[1]
    if p == 0:
        return None
    gsum, hsum, cnt = k.build_histograms(codes, grad, hess, rows, config.max_bins)
    m = rows.size
    lam = config.l2
    parent = g_tot * g_tot / (h_tot + lam)
    best_gain = 0.0
    best = None
    for j in range(p):
        nb = cuts[j].size
        if nb == 0:
            continue
        gl = np.cumsum(gsum[j])[:nb]
        hl = np.cumsum(hsum[j])[:nb]
        cl = np.cumsum(cnt[j])[:nb]
        ok = (cl >= config.min_leaf) & (m - cl >= config.min_leaf)
        if not ok.any():
            continue
        gr = g_tot - gl
        hr = h_tot - hl
        gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent
        gain[~ok] = -np.inf
        b = int(np.argmax(gain))
        if gain[b] > best_gain:
            best_gain = float(gain[b])
            best = (j, b)
    return best
