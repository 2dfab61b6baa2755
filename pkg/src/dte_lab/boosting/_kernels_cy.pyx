# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the tree-growing hot loops.

Mirrors _kernels_np exactly; per-cell accumulation order matches the
numpy backend so the two produce bit-identical models. Compiled with
-ffp-contract=off to keep float arithmetic IEEE-elementwise.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def build_histograms(const unsigned char[:, ::1] codes, const double[::1] g,
                     const double[::1] h, const cnp.int64_t[::1] rows, int nbins):
    cdef Py_ssize_t p = codes.shape[1]
    cdef Py_ssize_t m = rows.shape[0]
    gsum_arr = np.zeros((p, nbins))
    hsum_arr = np.zeros((p, nbins))
    cnt_arr = np.zeros((p, nbins), dtype=np.int64)
    if m == 0 or p == 0:
        return gsum_arr, hsum_arr, cnt_arr
    cdef double[:, ::1] gsum = gsum_arr
    cdef double[:, ::1] hsum = hsum_arr
    cdef cnp.int64_t[:, ::1] cnt = cnt_arr
    cdef Py_ssize_t ii, j
    cdef cnp.int64_t i
    cdef unsigned char c
    with nogil:
        for j in range(p):
            for ii in range(m):
                i = rows[ii]
                c = codes[i, j]
                gsum[j, c] += g[i]
                hsum[j, c] += h[i]
                cnt[j, c] += 1
    return gsum_arr, hsum_arr, cnt_arr


def partition_rows(const unsigned char[:, ::1] codes, int feature, int split_bin,
                   const cnp.int64_t[::1] rows):
    cdef Py_ssize_t m = rows.shape[0]
    left_arr = np.empty(m, dtype=np.int64)
    right_arr = np.empty(m, dtype=np.int64)
    cdef cnp.int64_t[::1] left = left_arr
    cdef cnp.int64_t[::1] right = right_arr
    cdef Py_ssize_t ii
    cdef Py_ssize_t nl = 0
    cdef Py_ssize_t nr = 0
    cdef cnp.int64_t i
    with nogil:
        for ii in range(m):
            i = rows[ii]
            if codes[i, feature] <= split_bin:
                left[nl] = i
                nl += 1
            else:
                right[nr] = i
                nr += 1
    return left_arr[:nl].copy(), right_arr[:nr].copy()


def predict_forest(const double[:, ::1] x, const cnp.int32_t[::1] feature,
                   const double[::1] threshold, const cnp.int32_t[::1] left,
                   const cnp.int32_t[::1] right, const double[::1] value,
                   const cnp.int64_t[::1] roots, double rate, double base):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t ntrees = roots.shape[0]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, t
    cdef cnp.int64_t node
    cdef cnp.int32_t f
    cdef double s, step
    with nogil:
        for i in range(n):
            s = base
            for t in range(ntrees):
                node = roots[t]
                f = feature[node]
                while f >= 0:
                    if x[i, f] <= threshold[node]:
                        node = left[node]
                    else:
                        node = right[node]
                    f = feature[node]
                # two rounding steps, matching numpy's rate*value then add
                step = rate * value[node]
                s = s + step
            out[i] = s
    return out_arr
