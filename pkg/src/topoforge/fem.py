"""Plane-stress finite elements on a regular grid of bilinear quads.

Grid conventions used throughout the package:

* Elements are indexed ``e = ey * nx + ex`` with ``ex`` running along x
  and ``ey`` along y, y pointing up. Element-wise fields (density, stress,
  strain energy) are stored as ``(ny, nx)`` arrays, so ``field[ey, ex]``
  is the element at column ``ex``, row ``ey``; flattening in C order gives
  the row-major element vector.
* Nodes are indexed ``n = iy * (nx + 1) + ix``; each node carries two
  degrees of freedom ``(2n, 2n + 1)`` for x and y displacement.
* The element's local DOF order is counter-clockwise from the bottom-left
  corner: (bl_x, bl_y, br_x, br_y, tr_x, tr_y, tl_x, tl_y).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import _kernels

GAUSS_2PT = 1.0 / np.sqrt(3.0)


class FemError(Exception):
    """Base class for finite-element failures."""


class SingularSystemError(FemError):
    """The constrained system is singular (insufficient supports)."""


class SolverConvergenceError(FemError):
    """Iterative solver exhausted its iteration cap."""

    def __init__(self, message, achieved_residual):
        super().__init__(message)
        self.achieved_residual = achieved_residual


@dataclass(frozen=True)
class DesignDomain:
    """Regular nx-by-ny grid of square plane-stress elements."""

    nx: int = 64
    ny: int = 64
    elem_size: float = 1.0
    E0: float = 1.0
    Emin: float = 1e-9
    nu: float = 0.3
    thickness: float = 1.0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid must have at least one element per axis")
        if not (0.0 < self.Emin < self.E0):
            raise ValueError("require 0 < Emin < E0")
        if not (0.0 <= self.nu < 0.5):
            raise ValueError("Poisson ratio must satisfy 0 <= nu < 0.5")
        if self.elem_size <= 0 or self.thickness <= 0:
            raise ValueError("elem_size and thickness must be positive")

    @property
    def n_elems(self) -> int:
        return self.nx * self.ny

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_nodes

    def node_index(self, ix: int, iy: int) -> int:
        return iy * (self.nx + 1) + ix

    def node_coords(self, node: int) -> tuple[float, float]:
        iy, ix = divmod(node, self.nx + 1)
        return ix * self.elem_size, iy * self.elem_size

    def is_boundary_node(self, node: int) -> bool:
        iy, ix = divmod(node, self.nx + 1)
        return ix in (0, self.nx) or iy in (0, self.ny)

    @property
    def edof(self) -> np.ndarray:
        """(n_elems, 8) element DOF map, counter-clockwise from bottom-left."""
        return _edof_matrix(self.nx, self.ny)

    @property
    def unit_ke(self) -> np.ndarray:
        """Reference element stiffness at unit Young's modulus."""
        return _unit_ke(self.nu, self.elem_size, self.thickness)


@dataclass(frozen=True)
class Supports:
    """Global DOF indices held at zero displacement."""

    fixed_dofs: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "fixed_dofs", frozenset(int(d) for d in self.fixed_dofs))
        if any(d < 0 for d in self.fixed_dofs):
            raise ValueError("DOF indices must be non-negative")

    def validate(self, domain: DesignDomain):
        if any(d >= domain.n_dofs for d in self.fixed_dofs):
            raise ValueError("fixed DOF index outside the domain")

    def sorted_dofs(self) -> np.ndarray:
        return np.fromiter(sorted(self.fixed_dofs), dtype=np.int64)

    def fixed_nodes(self) -> set[int]:
        return {d // 2 for d in self.fixed_dofs}


@dataclass(frozen=True)
class LoadSpec:
    """Single nodal point load."""

    node: int
    fx: float
    fy: float

    @property
    def magnitude(self) -> float:
        return float(np.hypot(self.fx, self.fy))

    def force_vector(self, domain: DesignDomain) -> np.ndarray:
        if not 0 <= self.node < domain.n_nodes:
            raise ValueError(f"load node {self.node} outside the domain")
        f = np.zeros(domain.n_dofs)
        f[2 * self.node] = self.fx
        f[2 * self.node + 1] = self.fy
        return f


@dataclass(frozen=True)
class FeaSolution:
    """Result of one linear solve.

    ``element_energies`` holds u_e^T K_e u_e with the assembled (density
    scaled) moduli, so they sum to the compliance. ``unit_energies`` holds
    the same quadratic form at unit Young's modulus, which is what the
    SIMP sensitivities need.
    """

    displacements: np.ndarray
    compliance: float
    element_energies: np.ndarray
    unit_energies: np.ndarray = field(repr=False)
    iterations: int = 0
    residual: float = 0.0


@lru_cache(maxsize=32)
def _edof_matrix(nx: int, ny: int) -> np.ndarray:
    ex, ey = np.meshgrid(np.arange(nx), np.arange(ny))
    n1 = (ey * (nx + 1) + ex).ravel()          # bottom-left node
    n2 = n1 + 1                                # bottom-right
    n3 = n2 + (nx + 1)                         # top-right
    n4 = n1 + (nx + 1)                         # top-left
    edof = np.empty((nx * ny, 8), dtype=np.int64)
    for k, n in enumerate((n1, n2, n3, n4)):
        edof[:, 2 * k] = 2 * n
        edof[:, 2 * k + 1] = 2 * n + 1
    edof.setflags(write=False)
    return edof


def constitutive_matrix(E: float, nu: float) -> np.ndarray:
    """Plane-stress elasticity matrix D."""
    c = E / (1.0 - nu * nu)
    return c * np.array([[1.0, nu, 0.0],
                         [nu, 1.0, 0.0],
                         [0.0, 0.0, (1.0 - nu) / 2.0]])


def shape_function_gradients(xi: float, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear shape-function gradients on the reference square [-1,1]^2."""
    dn_dxi = 0.25 * np.array([-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)])
    dn_deta = 0.25 * np.array([-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)])
    return dn_dxi, dn_deta


def strain_displacement(xi: float, eta: float, elem_size: float) -> np.ndarray:
    """3x8 B matrix at a reference point of a square element."""
    dn_dxi, dn_deta = shape_function_gradients(xi, eta)
    scale = 2.0 / elem_size                    # inverse Jacobian of the square map
    dn_dx = dn_dxi * scale
    dn_dy = dn_deta * scale
    B = np.zeros((3, 8))
    B[0, 0::2] = dn_dx
    B[1, 1::2] = dn_dy
    B[2, 0::2] = dn_dy
    B[2, 1::2] = dn_dx
    return B


def element_stiffness(E: float, nu: float, elem_size: float = 1.0,
                      thickness: float = 1.0) -> np.ndarray:
    """8x8 bilinear-quad plane-stress stiffness via 2x2 Gauss quadrature.

    E = 0 is allowed and returns the zero matrix (the stiffness is linear
    in E); negative moduli and non-positive dimensions are rejected.
    """
    if E < 0:
        raise ValueError("Young's modulus must be non-negative")
    if not (0.0 <= nu < 0.5):
        raise ValueError("Poisson ratio must satisfy 0 <= nu < 0.5")
    if elem_size <= 0 or thickness <= 0:
        raise ValueError("element size and thickness must be positive")
    D = constitutive_matrix(E, nu) if E > 0 else np.zeros((3, 3))
    det_j = (elem_size / 2.0) ** 2
    ke = np.zeros((8, 8))
    for xi in (-GAUSS_2PT, GAUSS_2PT):
        for eta in (-GAUSS_2PT, GAUSS_2PT):
            B = strain_displacement(xi, eta, elem_size)
            ke += B.T @ D @ B * det_j * thickness
    return (ke + ke.T) / 2.0                   # bitwise symmetric


@lru_cache(maxsize=32)
def _unit_ke(nu: float, elem_size: float, thickness: float) -> np.ndarray:
    ke = element_stiffness(1.0, nu, elem_size, thickness)
    ke.setflags(write=False)
    return ke


@dataclass(frozen=True)
class GlobalStiffness:
    """Assembled global stiffness plus the element data behind it."""

    matrix: sp.csr_matrix
    emod: np.ndarray                           # effective Young's modulus per element
    domain: DesignDomain

    @property
    def shape(self):
        return self.matrix.shape


def _sum_duplicates_csr(n: int, rows, cols, vals) -> sp.csr_matrix:
    """Deterministic COO -> CSR with exact symmetry.

    Triplets are ordered with a stable sort, so symmetric entry pairs sum
    identical value sequences and K == K.T holds bitwise.
    """
    order = np.lexsort((cols, rows))
    rows = rows[order]
    cols = cols[order]
    vals = vals[order]
    key = rows * np.int64(n) + cols
    first = np.empty(key.shape[0], dtype=bool)
    first[0] = True
    np.not_equal(key[1:], key[:-1], out=first[1:])
    starts = np.flatnonzero(first)
    data = np.add.reduceat(vals, starts)
    ucols = cols[starts].astype(np.int32)
    counts = np.bincount(rows[starts], minlength=n)
    indptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int32)
    return sp.csr_matrix((data, ucols, indptr), shape=(n, n))


def assemble(domain: DesignDomain, rho: np.ndarray, p: float) -> GlobalStiffness:
    """Assemble the global stiffness under the SIMP power law.

    Per element: E_e = Emin + rho_e^p (E0 - Emin); the element block is
    the unit-modulus reference stiffness scaled by E_e.
    """
    rho = np.asarray(rho, dtype=float).reshape(-1)
    if rho.shape[0] != domain.n_elems:
        raise ValueError(f"density field has {rho.shape[0]} entries, "
                         f"domain has {domain.n_elems} elements")
    if np.any(rho < 0) or np.any(rho > 1):
        raise ValueError("densities must lie in [0, 1]")
    if p < 1:
        raise ValueError("penalization exponent must be >= 1")
    emod = domain.Emin + rho ** p * (domain.E0 - domain.Emin)
    edof = domain.edof
    ke = domain.unit_ke
    rows = np.repeat(edof, 8, axis=1).ravel()
    cols = np.tile(edof, (1, 8)).ravel()
    vals = (emod[:, None] * ke.ravel()[None, :]).ravel()
    matrix = _sum_duplicates_csr(domain.n_dofs, rows, cols, vals)
    return GlobalStiffness(matrix=matrix, emod=emod, domain=domain)


DENSE_SOLVE_LIMIT = 1000     # free DOFs below this use a direct dense solve


def solve(K: GlobalStiffness, load: LoadSpec, supports: Supports,
          tol: float = 1e-8, x0: np.ndarray | None = None,
          maxiter: int | None = None) -> FeaSolution:
    """Solve K U = F with Dirichlet constraints eliminated.

    Small reduced systems go through a dense Cholesky solve; larger ones
    use Jacobi-preconditioned CG (warm-startable through ``x0``). Singular
    systems and non-convergence raise explicit errors.
    """
    domain = K.domain
    supports.validate(domain)
    if not supports.fixed_dofs:
        raise SingularSystemError("no supports: system is singular")
    F = load.force_vector(domain)
    fixed = supports.sorted_dofs()
    mask = np.ones(domain.n_dofs, dtype=bool)
    mask[fixed] = False
    free = np.flatnonzero(mask)

    U = np.zeros(domain.n_dofs)
    iterations = 0
    residual = 0.0
    Ff = F[free]
    if free.size and np.any(Ff):
        Kff = K.matrix[free][:, free].tocsr()
        if free.size < DENSE_SOLVE_LIMIT:
            try:
                cho = scipy.linalg.cho_factor(Kff.toarray(), check_finite=False)
            except scipy.linalg.LinAlgError as exc:
                raise SingularSystemError(
                    f"constrained stiffness is singular (insufficient supports): {exc}"
                ) from exc
            piv = np.abs(np.diag(cho[0]))
            # a collapsed pivot marks a rigid-body mode that rounding kept
            # barely positive; the SIMP Emin contrast alone cannot push the
            # squared pivot ratio this low
            if piv.min() == 0.0 or (piv.min() / piv.max()) ** 2 < 1e-14:
                raise SingularSystemError(
                    "constrained stiffness is numerically singular "
                    "(insufficient supports)")
            uf = scipy.linalg.cho_solve(cho, Ff, check_finite=False)
            residual = float(np.linalg.norm(Kff @ uf - Ff) / np.linalg.norm(Ff))
        else:
            diag = Kff.diagonal()
            if np.any(diag <= 0):
                raise SingularSystemError("non-positive diagonal in reduced stiffness")
            start = x0[free] if x0 is not None else np.zeros(free.size)
            cap = maxiter if maxiter is not None else max(3000, 3 * free.size)
            uf, iterations, residual = _kernels.pcg(
                np.ascontiguousarray(Kff.indptr, dtype=np.int32),
                np.ascontiguousarray(Kff.indices, dtype=np.int32),
                np.ascontiguousarray(Kff.data, dtype=np.float64),
                np.ascontiguousarray(Ff, dtype=np.float64),
                np.ascontiguousarray(diag, dtype=np.float64),
                np.ascontiguousarray(start, dtype=np.float64), tol, cap)
            if iterations < 0:
                raise SingularSystemError(
                    "CG breakdown: system is singular or indefinite")
            if residual > tol:
                raise SolverConvergenceError(
                    f"CG did not reach tol={tol:g} within {cap} iterations "
                    f"(achieved residual {residual:.3e})", residual)
        U[free] = uf

    compliance = float(F @ U)
    unit = _kernels.elem_energies(U, domain.edof, np.asarray(domain.unit_ke))
    energies = K.emod * unit
    grid = (domain.ny, domain.nx)
    return FeaSolution(
        displacements=U,
        compliance=compliance,
        element_energies=energies.reshape(grid),
        unit_energies=unit.reshape(grid),
        iterations=iterations,
        residual=residual,
    )


def _effective_modulus(domain: DesignDomain, rho: np.ndarray, p: float) -> np.ndarray:
    rho = np.asarray(rho, dtype=float).reshape(-1)
    if rho.shape[0] != domain.n_elems:
        raise ValueError("density field does not match the domain")
    return domain.Emin + rho ** p * (domain.E0 - domain.Emin)


def _centroid_strains(domain: DesignDomain, U: np.ndarray) -> np.ndarray:
    B0 = strain_displacement(0.0, 0.0, domain.elem_size)
    ue = U[domain.edof]                        # (n_elems, 8)
    return ue @ B0.T                           # (n_elems, 3)


def von_mises_field(domain: DesignDomain, rho: np.ndarray, U: np.ndarray,
                    p: float = 1.0) -> np.ndarray:
    """Element-centroid von Mises stress, shaped (ny, nx).

    For dataset conditioning this is called with rho identically one
    (full material). The penalization exponent only matters for
    intermediate densities; the standard call sites use binary fields.
    """
    eps = _centroid_strains(domain, U)
    emod = _effective_modulus(domain, rho, p)
    sig = (eps @ constitutive_matrix(1.0, domain.nu).T) * emod[:, None]
    sx, sy, txy = sig[:, 0], sig[:, 1], sig[:, 2]
    vm = np.sqrt(np.maximum(sx * sx + sy * sy - sx * sy + 3.0 * txy * txy, 0.0))
    return vm.reshape(domain.ny, domain.nx)


def strain_energy_density_field(domain: DesignDomain, rho: np.ndarray,
                                U: np.ndarray, p: float = 1.0) -> np.ndarray:
    """Element-mean strain energy density, shaped (ny, nx).

    Evaluated with full quadrature, so summing value * element volume over
    the grid returns exactly half the compliance of the matching solve.
    For constant-strain states this coincides with the centroid value
    0.5 eps^T D eps.
    """
    unit = _kernels.elem_energies(U, domain.edof, np.asarray(domain.unit_ke))
    emod = _effective_modulus(domain, rho, p)
    volume = domain.elem_size ** 2 * domain.thickness
    w = 0.5 * emod * unit / volume
    return w.reshape(domain.ny, domain.nx)
