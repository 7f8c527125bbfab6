# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampler hot kernels.

Same contract as ``_kernels_py``.  Dimension is fixed at 7 (ambient pose
embedding); loops are written out so a Kameleon step does no temporary
allocation beyond the returned arrays.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, fabs, log, M_PI

cnp.import_array()

cdef enum:
    D = 7
cdef double BOUNDARY_W = 1e-9


cdef void _gradient_matrix(const double[::1] y, const double[:, ::1] Z,
                           double eta, double sigma, double ell, double c,
                           double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = Z.shape[0], i, j
    cdef double qn = sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3])
    cdef double q[4]
    cdef double dot, adot, d2, dtj, k, coef, s
    cdef double dt[3]
    for j in range(4):
        q[j] = y[j] / qn
    for i in range(n):
        dot = q[0] * Z[i, 0] + q[1] * Z[i, 1] + q[2] * Z[i, 2] + q[3] * Z[i, 3]
        adot = fabs(dot)
        if adot <= BOUNDARY_W:
            for j in range(D):
                out[j, i] = 0.0
            continue
        if adot > 1.0:
            adot = 1.0
        d2 = 2.0 - 2.0 * adot
        for j in range(3):
            dtj = Z[i, 4 + j] - y[4 + j]
            dt[j] = dtj
            d2 += c * dtj * dtj
        k = sigma * sigma * exp(-d2 / (2.0 * ell * ell))
        coef = 2.0 * eta * k / (ell * ell)
        s = 1.0 if dot > 0 else -1.0
        for j in range(4):
            out[j, i] = coef * s / qn * (Z[i, j] - dot * q[j])
        for j in range(3):
            out[4 + j, i] = coef * c * dt[j]


cdef void _proposal_covariance(const double[:, ::1] M, double gamma, double nu,
                               double[:, ::1] C) noexcept nogil:
    cdef Py_ssize_t n = M.shape[1], a, b, i
    cdef double mean[D]
    cdef double acc
    for a in range(D):
        acc = 0.0
        for i in range(n):
            acc += M[a, i]
        mean[a] = acc / n
    for a in range(D):
        for b in range(a + 1):
            acc = 0.0
            for i in range(n):
                acc += (M[a, i] - mean[a]) * (M[b, i] - mean[b])
            acc *= nu * nu
            C[a, b] = acc
            C[b, a] = acc
        C[a, a] += gamma * gamma


cdef int _cholesky(const double[:, ::1] C, double[:, ::1] L) noexcept nogil:
    cdef Py_ssize_t d = C.shape[0], i, j, k
    cdef double s
    for i in range(d):
        for j in range(d):
            L[i, j] = 0.0
    for j in range(d):
        s = C[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s <= 0.0:
            return -1
        L[j, j] = sqrt(s)
        for i in range(j + 1, d):
            s = C[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
    return 0


def gradient_matrix(y, Z, double eta, double sigma, double ell, double c):
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[:, ::1] Zv = np.ascontiguousarray(np.atleast_2d(Z), dtype=np.float64)
    out = np.empty((D, Zv.shape[0]))
    cdef double[:, ::1] ov = out
    _gradient_matrix(yv, Zv, eta, sigma, ell, c, ov)
    return out


def proposal_covariance(M, double gamma, double nu):
    cdef const double[:, ::1] Mv = np.ascontiguousarray(M, dtype=np.float64)
    if Mv.shape[0] != D:
        raise ValueError("gradient matrix must have 7 rows")
    C = np.empty((D, D))
    cdef double[:, ::1] Cv = C
    _proposal_covariance(Mv, gamma, nu, Cv)
    return C


def proposal_covariance_at(y, Z, double eta, double sigma, double ell, double c,
                           double gamma, double nu):
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[:, ::1] Zv = np.ascontiguousarray(np.atleast_2d(Z), dtype=np.float64)
    M = np.empty((D, Zv.shape[0]))
    C = np.empty((D, D))
    cdef double[:, ::1] Mv = M
    cdef double[:, ::1] Cv = C
    with nogil:
        _gradient_matrix(yv, Zv, eta, sigma, ell, c, Mv)
        _proposal_covariance(Mv, gamma, nu, Cv)
    return C


def cholesky(C):
    cdef const double[:, ::1] Cv = np.ascontiguousarray(C, dtype=np.float64)
    L = np.empty_like(np.asarray(Cv))
    cdef double[:, ::1] Lv = L
    if _cholesky(Cv, Lv) != 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    return L


def mvn_logpdf(x, mean, C):
    cdef const double[:, ::1] Cv = np.ascontiguousarray(C, dtype=np.float64)
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] mv = np.ascontiguousarray(mean, dtype=np.float64)
    cdef Py_ssize_t d = Cv.shape[0], i, k
    L = np.empty((d, d))
    cdef double[:, ::1] Lv = L
    if _cholesky(Cv, Lv) != 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    cdef double r[64]
    cdef double s, quad = 0.0, logdet = 0.0
    if d > 64:
        raise ValueError("dimension too large")
    for i in range(d):
        s = xv[i] - mv[i]
        for k in range(i):
            s -= Lv[i, k] * r[k]
        r[i] = s / Lv[i, i]
        quad += r[i] * r[i]
        logdet += log(Lv[i, i])
    return -0.5 * quad - logdet - 0.5 * d * log(2.0 * M_PI)
