# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled FEM kernels: fused CSR PCG, element energy gather, filtering.

Algorithms mirror ``pure.py`` line for line; keep the two in sync.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

BACKEND_NAME = "compiled"


def elem_energies(const double[::1] u, const long[:, ::1] edof, const double[:, ::1] ke):
    cdef Py_ssize_t n = edof.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double[::1] out_v = out
    cdef double ue[8]
    cdef double acc, row
    cdef Py_ssize_t e, i, j
    for e in range(n):
        for i in range(8):
            ue[i] = u[edof[e, i]]
        acc = 0.0
        for i in range(8):
            row = 0.0
            for j in range(8):
                row += ke[i, j] * ue[j]
            acc += ue[i] * row
        out_v[e] = acc
    return out


cdef void _csr_matvec(const int[::1] indptr, const int[::1] indices, const double[::1] data,
                      const double[::1] x, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef double acc
    for i in range(indptr.shape[0] - 1):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        out[i] = acc


def pcg(const int[::1] indptr, const int[::1] indices, const double[::1] data,
        const double[::1] b, const double[::1] diag, const double[::1] x0,
        double tol, long maxiter):
    """Jacobi-preconditioned CG; see pure.pcg for the contract."""
    cdef Py_ssize_t n = b.shape[0]
    cdef cnp.ndarray[double, ndim=1] x_arr = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] x = x_arr
    cdef cnp.ndarray[double, ndim=1] r_arr = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] z_arr = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] p_arr = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] ap_arr = np.empty(n)
    cdef double[::1] r = r_arr
    cdef double[::1] z = z_arr
    cdef double[::1] p = p_arr
    cdef double[::1] ap = ap_arr
    cdef double bnorm = 0.0, rnorm, relres, rz, rz_new, pap, alpha, beta
    cdef Py_ssize_t i
    cdef long k

    for i in range(n):
        bnorm += b[i] * b[i]
    bnorm = sqrt(bnorm)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0

    _csr_matvec(indptr, indices, data, x, r)
    rnorm = 0.0
    for i in range(n):
        r[i] = b[i] - r[i]
        rnorm += r[i] * r[i]
    relres = sqrt(rnorm) / bnorm
    if relres <= tol:
        return x_arr, 0, relres

    rz = 0.0
    for i in range(n):
        z[i] = r[i] / diag[i]
        p[i] = z[i]
        rz += r[i] * z[i]

    for k in range(1, maxiter + 1):
        _csr_matvec(indptr, indices, data, p, ap)
        pap = 0.0
        for i in range(n):
            pap += p[i] * ap[i]
        if pap <= 0.0:
            return x_arr, -1, relres
        alpha = rz / pap
        rnorm = 0.0
        for i in range(n):
            x[i] += alpha * p[i]
            r[i] -= alpha * ap[i]
            rnorm += r[i] * r[i]
        relres = sqrt(rnorm) / bnorm
        if relres <= tol:
            return x_arr, k, relres
        rz_new = 0.0
        for i in range(n):
            z[i] = r[i] / diag[i]
            rz_new += r[i] * z[i]
        beta = rz_new / rz
        for i in range(n):
            p[i] = z[i] + beta * p[i]
        rz = rz_new
    return x_arr, maxiter, relres


def filter_apply(const int[::1] indptr, const int[::1] indices, const double[::1] weights,
                 const double[::1] row_sums, const double[::1] rho, const double[::1] dc,
                 double floor):
    cdef Py_ssize_t n = rho.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double[::1] out_v = out
    cdef Py_ssize_t e, k
    cdef double acc, den
    for e in range(n):
        acc = 0.0
        for k in range(indptr[e], indptr[e + 1]):
            acc += weights[k] * rho[indices[k]] * dc[indices[k]]
        den = rho[e] if rho[e] > floor else floor
        out_v[e] = acc / (row_sums[e] * den)
    return out
