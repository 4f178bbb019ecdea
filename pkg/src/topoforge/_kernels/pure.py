"""Pure NumPy implementations of the hot FEM kernels.

These mirror the compiled Cython kernels in ``_ext.pyx`` exactly (same
algorithms, same update order) so the two backends agree to rounding.
Selection happens in ``topoforge._kernels.__init__``.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

BACKEND_NAME = "pure"


def elem_energies(u: np.ndarray, edof: np.ndarray, ke: np.ndarray) -> np.ndarray:
    """Per-element quadratic form u_e^T K_e u_e for one shared 8x8 K_e."""
    ue = u[edof]                     # (n_elems, 8)
    return np.einsum("ij,jk,ik->i", ue, ke, ue)


def pcg(indptr, indices, data, b, diag, x0, tol, maxiter):
    """Jacobi-preconditioned conjugate gradient on a CSR matrix.

    Returns (x, iterations, relative_residual). Convergence is a relative
    residual ||b - Ax|| / ||b|| <= tol; the caller decides what to do when
    the iteration cap is hit. A non-positive curvature p^T A p signals a
    singular (or indefinite) system and is reported with iterations = -1.
    """
    n = b.shape[0]
    A = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    x = x0.copy()
    r = b - A @ x
    relres = np.linalg.norm(r) / bnorm
    if relres <= tol:
        return x, 0, relres
    z = r / diag
    p = z.copy()
    rz = float(r @ z)
    for k in range(1, maxiter + 1):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            return x, -1, relres
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        relres = np.linalg.norm(r) / bnorm
        if relres <= tol:
            return x, k, relres
        z = r / diag
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, maxiter, relres


def filter_apply(indptr, indices, weights, row_sums, rho, dc, floor):
    """Distance-weighted sensitivity filter.

    out_e = sum_i w_ei rho_i dc_i / (max(rho_e, floor) * sum_i w_ei)
    """
    n = rho.shape[0]
    H = sp.csr_matrix((weights, indices, indptr), shape=(n, n))
    num = H @ (rho * dc)
    return num / (row_sums * np.maximum(rho, floor))
