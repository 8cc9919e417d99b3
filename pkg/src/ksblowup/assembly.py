"""P1 operators and the upwind drift form on a triangulation.

Fields are plain float arrays of nodal values (one entry per vertex).  The
drift form is

    b_h(u, v, w) = sum_i w_i sum_{j in adj(i)} (v_i beta+_ij(u) - v_j beta-_ij(u)),

whose coefficients are interface-length weighted positive and negative parts
of the normal flux of ``grad G_h u`` across the dual-cell interfaces.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .mesh import dual_geometry

__all__ = [
    "SolverError",
    "UpwindCoefficients",
    "lumped_mass",
    "stiffness",
    "consistent_mass",
    "GreenOperator",
    "green_operator",
    "upwind_coeffs",
    "apply_bh",
    "assemble_drift_matrix",
    "write_coo",
]


class SolverError(RuntimeError):
    """A linear solve did not reach its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def lumped_mass(dual):
    """Diagonal of the lumped mass matrix: the dual-cell areas."""
    return np.asarray(dual.cell_measure, dtype=float).copy()


def _assemble(mesh, local):
    """Sum (n_triangles, 3, 3) element matrices into a CSR matrix."""
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def stiffness(mesh):
    g = mesh.basis_gradients
    local = np.einsum("tkd,tld->tkl", g, g) * mesh.triangle_areas[:, None, None]
    return _assemble(mesh, local)


def consistent_mass(mesh):
    base = (np.ones((3, 3)) + np.eye(3)) / 12
    return _assemble(mesh, mesh.triangle_areas[:, None, None] * base)


class GreenOperator:
    """Discrete solution operator of ``-Delta v + alpha v = f`` with natural boundary conditions.

    ``v = G f`` solves ``(grad v, grad w) + alpha (v, w) = (f, w)`` for all P1
    test functions, with the L2 products either consistent (default) or
    lumped.  The matrix is factorized once.
    """

    def __init__(self, mesh, alpha=1.0, mass="consistent", lumped=None, stiff=None, tol=1e-10):
        if not alpha > 0:
            raise ValueError(f"alpha must be positive for an invertible operator, got {alpha!r}")
        if mass not in ("consistent", "lumped"):
            raise ValueError(f"mass must be 'consistent' or 'lumped', got {mass!r}")
        self.alpha = float(alpha)
        self.mass = mass
        self.tol = tol
        A = stiffness(mesh) if stiff is None else stiff
        if mass == "consistent":
            self.rhs_matrix = consistent_mass(mesh)
        else:
            m = lumped_mass(dual_geometry(mesh)) if lumped is None else lumped
            self.rhs_matrix = sp.diags(m).tocsr()
        self.matrix = (A + self.alpha * self.rhs_matrix).tocsc()
        self._lu = splu(self.matrix)

    def __call__(self, f):
        f = np.asarray(f, dtype=float)
        rhs = self.rhs_matrix @ f
        v = self._lu.solve(rhs)
        scale = np.linalg.norm(rhs)
        if scale > 0:
            res = np.linalg.norm(self.matrix @ v - rhs) / scale
            if not res <= self.tol:
                raise SolverError(f"Green solve residual {res:.3e} exceeds {self.tol:.1e}", residual=res)
        return v


def green_operator(mesh, mass, alpha, f):
    """One-shot ``G_h f``; use :class:`GreenOperator` to reuse the factorization."""
    return GreenOperator(mesh, alpha=alpha, mass=mass)(f)


@dataclass(frozen=True, eq=False)
class UpwindCoefficients:
    """``beta_plus[i, j]`` and ``beta_minus[i, j]`` as sparse matrices.

    ``beta_minus`` is the transpose of ``beta_plus`` entry for entry.
    """

    beta_plus: sp.csr_matrix
    beta_minus: sp.csr_matrix

    @property
    def n(self):
        return self.beta_plus.shape[0]


def coefficients_from_potential(mesh, dual, c):
    """Upwind coefficients for a given chemical potential ``c`` (nodal values)."""
    grad = mesh.gradient(c)
    flux = np.einsum("ed,ed->e", grad[dual.tri], dual.normal)
    pos = dual.length * np.maximum(flux, 0.0)
    neg = dual.length * np.maximum(-flux, 0.0)
    n = mesh.n_vertices
    # interface (i -> j) feeds beta+_ij and beta-_ji with the same numbers
    rows = np.concatenate([dual.i, dual.j])
    cols = np.concatenate([dual.j, dual.i])
    bp = sp.coo_matrix((np.concatenate([pos, neg]), (rows, cols)), shape=(n, n)).tocsr()
    bp.sort_indices()
    bm = bp.T.tocsr()
    bm.sort_indices()
    return UpwindCoefficients(beta_plus=bp, beta_minus=bm)


def upwind_coeffs(mesh, dual, u, alpha=1.0, green=None):
    """Coefficients ``beta+-_ij(u)`` built from ``G_h u``."""
    if green is None:
        green = GreenOperator(mesh, alpha=alpha)
    return coefficients_from_potential(mesh, dual, green(u))


def apply_bh(coeffs, v):
    """``r_i = sum_j (v_i beta+_ij - v_j beta-_ij)``, so that ``b_h(u, v, w) = w @ r``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (coeffs.n,):
        raise ValueError(f"field has shape {v.shape}, coefficients expect ({coeffs.n},)")
    bp = coeffs.beta_plus.tocoo()
    bm = coeffs.beta_minus.tocoo()
    r = np.zeros_like(v)
    np.add.at(r, bp.row, v[bp.row] * bp.data)
    np.add.at(r, bm.row, -v[bm.col] * bm.data)
    return r


def assemble_drift_matrix(coeffs):
    """Matrix ``B`` with ``B @ v == apply_bh(coeffs, v)``; its columns sum to zero."""
    out_rate = np.asarray(coeffs.beta_plus.sum(axis=1)).ravel()
    return (sp.diags(out_rate) - coeffs.beta_minus).tocsr()


def write_coo(matrix, path):
    """Write ``row col value`` lines (0-based) for inspection."""
    m = sp.coo_matrix(matrix)
    with open(path, "w") as fh:
        fh.write(f"{m.shape[0]} {m.shape[1]} {m.nnz}\n")
        for r, c, v in zip(m.row, m.col, m.data):
            fh.write(f"{int(r)} {int(c)} {float(v)!r}\n")
