# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; same contracts as ``monoscat._kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin
from libc.stdlib cimport malloc, free
from scipy.linalg.cython_lapack cimport zheevd

cnp.import_array()


def winding_numbers(double[:, ::1] curve, double[:, ::1] points):
    cdef Py_ssize_t n = curve.shape[0], m = points.shape[0]
    cdef Py_ssize_t i, s, t
    cdef double px, py, x0, y0, x1, y1, cross
    cdef long wn
    out = np.zeros(m, dtype=np.int64)
    cdef long long[::1] res = out
    with nogil:
        for i in range(m):
            px = points[i, 0]
            py = points[i, 1]
            wn = 0
            for s in range(n):
                t = s + 1
                if t == n:
                    t = 0
                x0 = curve[s, 0]; y0 = curve[s, 1]
                x1 = curve[t, 0]; y1 = curve[t, 1]
                cross = (x1 - x0) * (py - y0) - (px - x0) * (y1 - y0)
                if y0 <= py:
                    if y1 > py and cross > 0:
                        wn += 1
                elif y1 <= py and cross < 0:
                    wn -= 1
            res[i] = wn
    return out


def pixel_eig_counts(base, double coef, kdirs, centers, double delta):
    cdef double complex[::1, :] S = np.asfortranarray(base, dtype=complex)
    cdef double[:, ::1] kd = np.ascontiguousarray(kdirs, dtype=float)
    cdef double[:, ::1] zc = np.ascontiguousarray(centers, dtype=float)
    cdef int N = S.shape[0]
    cdef Py_ssize_t J = zc.shape[0]
    n_neg_arr = np.zeros(J, dtype=np.int64)
    n_pos_arr = np.zeros(J, dtype=np.int64)
    cdef long long[::1] n_neg = n_neg_arr
    cdef long long[::1] n_pos = n_pos_arr

    cdef char jobz = b'N'
    cdef char uplo = b'L'
    cdef int lwork = N + 1, lrwork = N, liwork = 1, info = 0
    cdef double complex *a = <double complex *> malloc(N * N * sizeof(double complex))
    cdef double complex *v = <double complex *> malloc(N * sizeof(double complex))
    cdef double complex *work = <double complex *> malloc(lwork * sizeof(double complex))
    cdef double *w = <double *> malloc(N * sizeof(double))
    cdef double *rwork = <double *> malloc(lrwork * sizeof(double))
    cdef int *iwork = <int *> malloc(liwork * sizeof(int))
    cdef Py_ssize_t j
    cdef int l, mm, cneg, cpos, failed = 0
    cdef double ph
    if a == NULL or v == NULL or work == NULL or w == NULL or rwork == NULL or iwork == NULL:
        free(a); free(v); free(work); free(w); free(rwork); free(iwork)
        raise MemoryError()
    try:
        with nogil:
            for j in range(J):
                for l in range(N):
                    ph = -(kd[l, 0] * zc[j, 0] + kd[l, 1] * zc[j, 1])
                    v[l] = cos(ph) + 1j * sin(ph)
                for mm in range(N):
                    for l in range(mm, N):
                        a[l + mm * N] = S[l, mm] - coef * v[l] * v[mm].conjugate()
                zheevd(&jobz, &uplo, &N, a, &N, w, work, &lwork, rwork, &lrwork,
                       iwork, &liwork, &info)
                if info != 0:
                    failed = info
                    break
                cneg = 0
                cpos = 0
                for l in range(N):
                    if w[l] < -delta:
                        cneg += 1
                    elif w[l] > delta:
                        cpos += 1
                n_neg[j] = cneg
                n_pos[j] = cpos
    finally:
        free(a); free(v); free(work); free(w); free(rwork); free(iwork)
    if failed:
        raise np.linalg.LinAlgError(f"zheevd failed with info={failed}")
    return n_neg_arr, n_pos_arr
