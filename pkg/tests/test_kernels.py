"""The compiled and pure kernel backends must agree."""
import numpy as np
import pytest

from topoforge import _kernels
from topoforge._kernels import pure


def _backends():
    backends = [pure]
    try:
        backends.append(_kernels.get_backend("compiled"))
    except ImportError:
        pass
    return backends


compiled_available = pytest.mark.skipif(
    len(_backends()) < 2, reason="compiled kernels not built")


def make_spd_csr(n, rng):
    import scipy.sparse as sp
    A = sp.random(n, n, density=0.05, random_state=np.random.RandomState(0),
                  format="csr")
    A = A + A.T + sp.identity(n) * n * 0.1
    A = A.tocsr()
    A.sort_indices()
    return A


@compiled_available
def test_pcg_backends_agree():
    compiled = _kernels.get_backend("compiled")
    rng = np.random.default_rng(5)
    A = make_spd_csr(200, rng)
    b = rng.standard_normal(200)
    diag = A.diagonal()
    x0 = np.zeros(200)
    args = (np.ascontiguousarray(A.indptr, np.int32),
            np.ascontiguousarray(A.indices, np.int32),
            np.ascontiguousarray(A.data), b, diag, x0, 1e-10, 1000)
    xp, kp, rp = pure.pcg(*args)
    xc, kc, rc = compiled.pcg(*args)
    assert kp == kc
    np.testing.assert_allclose(xp, xc, rtol=1e-12, atol=1e-14)


@compiled_available
def test_elem_energies_backends_agree():
    compiled = _kernels.get_backend("compiled")
    from topoforge.fem import DesignDomain
    dom = DesignDomain(nx=7, ny=5)
    rng = np.random.default_rng(2)
    u = rng.standard_normal(dom.n_dofs)
    ke = np.asarray(dom.unit_ke)
    ep = pure.elem_energies(u, dom.edof, ke)
    ec = compiled.elem_energies(u, dom.edof, ke)
    np.testing.assert_allclose(ep, ec, rtol=1e-14)


@compiled_available
def test_filter_backends_agree():
    compiled = _kernels.get_backend("compiled")
    import scipy.sparse as sp
    rng = np.random.default_rng(3)
    n = 64
    H = sp.random(n, n, density=0.2, random_state=np.random.RandomState(1),
                  format="csr")
    H = (H + sp.identity(n)).tocsr()
    H.sort_indices()
    row_sums = np.asarray(H.sum(axis=1)).ravel()
    rho = rng.uniform(0, 1, n)
    dc = -rng.uniform(0, 2, n)
    args = (np.ascontiguousarray(H.indptr, np.int32),
            np.ascontiguousarray(H.indices, np.int32),
            np.ascontiguousarray(H.data), row_sums, rho, dc, 1e-3)
    np.testing.assert_allclose(pure.filter_apply(*args),
                               compiled.filter_apply(*args), rtol=1e-13)


def test_pcg_solves_small_dense_system():
    rng = np.random.default_rng(4)
    A = make_spd_csr(50, rng)
    b = rng.standard_normal(50)
    x, k, res = _kernels.pcg(
        np.ascontiguousarray(A.indptr, np.int32),
        np.ascontiguousarray(A.indices, np.int32),
        np.ascontiguousarray(A.data), b, A.diagonal(), np.zeros(50), 1e-12, 500)
    assert res <= 1e-12
    np.testing.assert_allclose(A @ x, b, atol=1e-9)


def test_pcg_zero_rhs():
    rng = np.random.default_rng(4)
    A = make_spd_csr(10, rng)
    x, k, res = _kernels.pcg(
        np.ascontiguousarray(A.indptr, np.int32),
        np.ascontiguousarray(A.indices, np.int32),
        np.ascontiguousarray(A.data), np.zeros(10), A.diagonal(),
        np.zeros(10), 1e-12, 100)
    assert k == 0 and res == 0.0 and np.all(x == 0)
