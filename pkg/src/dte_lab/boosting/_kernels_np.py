"""Pure-numpy implementations of the tree-growing hot loops.

_kernels_cy mirrors this interface in compiled form. Both backends must
produce bit-identical results: histogram cells accumulate contributions in
row order, partitions preserve row order, and forest prediction applies
the same elementwise operation sequence.
"""
from __future__ import annotations

import numpy as np


def build_histograms(codes, g, h, rows, nbins):
    """Per-feature bin sums of gradients, hessians, and counts.

    Parameters
    ----------
    codes : (n, p) uint8
        Quantile-bin codes of the training features.
    g, h : (n,) float64
        Gradient and hessian of the loss at the current scores.
    rows : (m,) int64
        Indices of the rows in the node.
    nbins : int
        Histogram width (codes are < nbins).

    Returns
    -------
    (gsum, hsum, cnt) : ((p, nbins) float64, (p, nbins) float64, (p, nbins) int64)
    """
    p = codes.shape[1]
    gsum = np.zeros((p, nbins))
    hsum = np.zeros((p, nbins))
    cnt = np.zeros((p, nbins), dtype=np.int64)
    if rows.size == 0 or p == 0:
        return gsum, hsum, cnt
    sub = codes[rows]
    gr = g[rows]
    hr = h[rows]
    for j in range(p):
        cj = sub[:, j]
        gsum[j] = np.bincount(cj, weights=gr, minlength=nbins)
        hsum[j] = np.bincount(cj, weights=hr, minlength=nbins)
        cnt[j] = np.bincount(cj, minlength=nbins)
    return gsum, hsum, cnt


def partition_rows(codes, feature, split_bin, rows):
    """Split node rows by bin code: left gets code <= split_bin. Order kept."""
    go_left = codes[rows, feature] <= split_bin
    return rows[go_left], rows[~go_left]


def predict_forest(x, feature, threshold, left, right, value, roots, rate, base):
    """Raw additive scores of a forest on raw (unbinned) features.

    Nodes are flat parallel arrays; feature < 0 marks a leaf. A unit goes
    left when x[feature] <= threshold.
    """
    n = x.shape[0]
    scores = np.full(n, base)
    all_rows = np.arange(n)
    for root in roots:
        idx = np.full(n, root, dtype=np.int64)
        while True:
            feat = feature[idx]
            internal = feat >= 0
            if not internal.any():
                break
            xv = x[all_rows, np.where(internal, feat, 0)]
            child = np.where(xv <= threshold[idx], left[idx], right[idx])
            idx = np.where(internal, child, idx)
        scores += rate * value[idx]
    return scores
