# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled orthogonal matching pursuit kernel.

Mirrors ``specsr._omp_py`` operation for operation (same selection rule, same
SVD refit, same stopping and rank-deficiency handling); see that module for
the semantics. BLAS/LAPACK routines are called directly so the per-column
greedy loop carries no Python overhead.
"""

import numpy as np

cimport numpy as cnp
from scipy.linalg.cython_blas cimport dcopy, dgemv, dnrm2
from scipy.linalg.cython_lapack cimport dgesdd

cnp.import_array()

COND_LIMIT = 1e12
cdef double _COND_LIMIT = 1e12


def omp_batch(const double[:, ::1] D, const double[:, ::1] signals, int max_atoms,
              double residual_tol):
    """Code every column of ``signals``; returns (codes, supports)."""
    cdef int bands = D.shape[0]
    cdef int K = D.shape[1]
    cdef int n = signals.shape[1]
    if signals.shape[0] != bands:
        raise ValueError("signal length does not match dictionary columns")
    if max_atoms < 1:
        raise ValueError("max_atoms must be >= 1")
    cdef int smax = max_atoms if max_atoms < K else K
    cdef int minmn_max = smax if smax < bands else bands

    codes_arr = np.zeros((K, n), dtype=np.float64)
    cdef double[:, ::1] codes = codes_arr
    supports = []

    # Scratch buffers reused across columns. ``sub`` keeps the support
    # submatrix intact (column-major); ``svd_a`` is the copy dgesdd destroys.
    cdef double[::1] y = np.empty(bands, dtype=np.float64)
    cdef double[::1] r = np.empty(bands, dtype=np.float64)
    cdef double[::1] corr = np.empty(K, dtype=np.float64)
    cdef double[::1] sub = np.empty(bands * smax, dtype=np.float64)
    cdef double[::1] svd_a = np.empty(bands * smax, dtype=np.float64)
    cdef double[::1] u = np.empty(bands * minmn_max, dtype=np.float64)
    cdef double[::1] vt = np.empty(minmn_max * smax, dtype=np.float64)
    cdef double[::1] sv = np.empty(minmn_max, dtype=np.float64)
    cdef double[::1] tmp = np.empty(minmn_max, dtype=np.float64)
    cdef double[::1] coef = np.empty(smax, dtype=np.float64)
    cdef int[::1] support = np.empty(smax, dtype=np.int32)
    cdef int[::1] iwork = np.empty(8 * minmn_max, dtype=np.int32)

    cdef char jobz = b'S'
    cdef char transN = b'N'
    cdef char transT = b'T'
    cdef double done = 1.0, dzero = 0.0, dnegone = -1.0
    cdef int one = 1, info = 0, lwork = -1
    cdef int j, t, i, a, k, best, col, nsel, coef_len, s_count, minmn, sz
    cdef double rnorm, best_val, v, wquery

    # One workspace sized for the largest refit any step can request.
    cdef int best_lwork = 1
    for s_count in range(1, smax + 1):
        minmn = s_count if s_count < bands else bands
        lwork = -1
        dgesdd(&jobz, &bands, &s_count, &svd_a[0], &bands, &sv[0], &u[0],
               &bands, &vt[0], &minmn, &wquery, &lwork, &iwork[0], &info)
        if info != 0:
            raise RuntimeError(f"SVD workspace query failed (info={info})")
        if <int> wquery > best_lwork:
            best_lwork = <int> wquery
    work_arr = np.empty(best_lwork, dtype=np.float64)
    cdef double[::1] work = work_arr
    lwork = best_lwork

    for j in range(n):
        for i in range(bands):
            y[i] = signals[i, j]
        dcopy(&bands, &y[0], &one, &r[0], &one)
        nsel = 0
        coef_len = 0
        for t in range(smax):
            rnorm = dnrm2(&bands, &r[0], &one)
            if rnorm <= residual_tol:
                break
            # The row-major D buffer read column-major is D^T (K x bands).
            dgemv(&transN, &K, &bands, &done, <double*> &D[0, 0], &K, &r[0], &one,
                  &dzero, &corr[0], &one)
            for a in range(nsel):
                corr[support[a]] = 0.0
            best = 0
            best_val = -1.0
            for k in range(K):
                v = corr[k] if corr[k] >= 0.0 else -corr[k]
                if v > best_val:
                    best_val = v
                    best = k
            if corr[best] == 0.0:
                break
            support[nsel] = best
            nsel += 1
            s_count = nsel
            for a in range(s_count):
                col = support[a]
                for i in range(bands):
                    sub[a * bands + i] = D[i, col]
            sz = bands * s_count
            dcopy(&sz, &sub[0], &one, &svd_a[0], &one)
            minmn = s_count if s_count < bands else bands
            info = 0
            dgesdd(&jobz, &bands, &s_count, &svd_a[0], &bands, &sv[0], &u[0],
                   &bands, &vt[0], &minmn, &work[0], &lwork, &iwork[0], &info)
            if info != 0:
                raise RuntimeError(
                    f"SVD failed at column {j}, step {t} (info={info})"
                )
            if sv[minmn - 1] == 0.0 or sv[0] / sv[minmn - 1] > _COND_LIMIT:
                nsel -= 1
                break
            dgemv(&transT, &bands, &minmn, &done, &u[0], &bands, &y[0], &one,
                  &dzero, &tmp[0], &one)
            for i in range(minmn):
                tmp[i] = tmp[i] / sv[i]
            dgemv(&transT, &minmn, &s_count, &done, &vt[0], &minmn, &tmp[0],
                  &one, &dzero, &coef[0], &one)
            coef_len = s_count
            dcopy(&bands, &y[0], &one, &r[0], &one)
            dgemv(&transN, &bands, &s_count, &dnegone, &sub[0], &bands,
                  &coef[0], &one, &done, &r[0], &one)
        col_support = []
        for a in range(coef_len):
            codes[support[a], j] = coef[a]
            col_support.append(int(support[a]))
        supports.append(col_support)
    return codes_arr, supports
