"""Rig-complementary skinning eigenmode subspace construction.

Column ordering of the LBS subspace matrix B (3n x 12m), fixed across the
package: modes outer, then the 12 affine parameters of each mode's 3x4
transform in row-major order (output axis outer, [x-coeff, y-coeff,
z-coeff, translation] inner).  Equivalently, the reduced coordinate
vector ``z`` reshapes to ``(m, 3, 4)`` stacked transforms.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh, svd

from .mesh import TetMesh

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10          # relative tolerance for rank-revealing factorizations
ROW_REDUNDANCY_TOL = 1e-10


@dataclass
class WeightSpaceOperators:
    """The 12 weight-space skinning Jacobians, H_w and the constraint J_w."""

    A: list            # twelve (3n, n) sparse matrices, axis-major order
    H_w: sp.spmatrix   # (n, n) symmetric
    J_w: np.ndarray    # (c, n), full row rank after redundancy removal


@dataclass
class SkinningSubspace:
    """Secondary skinning weights, their eigenvalues and the LBS matrix B."""

    W: np.ndarray             # (n, m), M_w-orthonormal columns
    eigenvalues: np.ndarray   # (m,), ascending
    B: np.ndarray             # (3n, 12m)

    @property
    def m(self) -> int:
        return self.W.shape[1]

    @property
    def k(self) -> int:
        return 12 * self.m


def weight_space_skinning_jacobians(mesh: TetMesh) -> list:
    """The twelve sparse maps A_{i,j} with B = [A_{i,j} w_b] blocks.

    A_{i,j} = P_i diag(rest coordinate j) for j in {x, y, z} and
    A_{i,4} = P_i; each has exactly one (structural) nonzero per column.
    """
    n = mesh.n
    mats = []
    rows = np.arange(n)
    for i in range(3):
        for j in range(4):
            vals = mesh.vertices[:, j] if j < 3 else np.ones(n)
            A = sp.coo_matrix((vals, (i * n + rows, rows)), shape=(3 * n, n))
            mats.append(A.tocsc())
    return mats


def lbs_jacobian(W: np.ndarray, mesh: TetMesh) -> np.ndarray:
    """Dense LBS subspace matrix B (3n, 12m) for weights W (n, m).

    B @ vec(T_1..T_m) evaluates u_i = sum_b w_ib T_b X_i with homogeneous
    rest positions X_i; transforms are flattened row-major, modes outer.
    """
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    if W.ndim != 2 or W.shape[0] != mesh.n:
        raise ValueError(f"weights sized {W.shape}, expected ({mesh.n}, m)")
    if not np.isfinite(W).all():
        raise ValueError("weights must be finite")
    n, m = W.shape
    Xh = np.hstack([mesh.vertices, np.ones((n, 1))])
    B = np.zeros((3 * n, 12 * m))
    for a in range(3):
        for j in range(4):
            # columns 12b + 4a + j over modes b; rows of axis a
            B[a * n:(a + 1) * n, 4 * a + j::12] = W * Xh[:, [j]]
    return B


def rep_apply(R: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Apply one rotation to every vertex of an axis-major stacked vector."""
    n = u.shape[0] // 3
    return (R @ u.reshape(3, n)).reshape(-1)


def rotate_reduced_coords(R: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Constructive closure-under-rotations witness: T_b -> R T_b per mode.

    Satisfies rep(R) B z = B w exactly up to round-off.
    """
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or np.abs(R.T @ R - np.eye(3)).max() > 1e-10 \
            or abs(np.linalg.det(R) - 1.0) > 1e-10:
        raise ValueError("R is not a rotation matrix")
    T = np.asarray(z, dtype=np.float64).reshape(-1, 3, 4)
    return np.einsum("ab,mbj->maj", R, T).reshape(-1)


def weight_space_hessian(H: sp.spmatrix) -> sp.csr_matrix:
    """Sum of the three per-axis diagonal blocks of a (3n, 3n) Hessian."""
    if H.shape[0] != H.shape[1] or H.shape[0] % 3:
        raise ValueError(f"H must be square (3n, 3n), got {H.shape}")
    n = H.shape[0] // 3
    H = H.tocsr()
    H_w = sum(H[a * n:(a + 1) * n, a * n:(a + 1) * n] for a in range(3))
    return ((H_w + H_w.T) * 0.5).tocsr()


def weight_space_constraint(cJ: np.ndarray, mesh: TetMesh) -> np.ndarray:
    """Weight-space complementarity constraint J_w (c, n).

    Stacks cJ^T A_{i,j} over the twelve skinning Jacobians (axis-major
    order) and strips numerically redundant rows by row-echelon reduction.
    """
    p = cJ.shape[1]
    n = mesh.n
    if p == 0:
        return np.zeros((0, n))
    if cJ.shape[0] != 3 * n:
        raise ValueError(f"cJ sized {cJ.shape}, expected ({3 * n}, p)")
    Xh = np.hstack([mesh.vertices, np.ones((n, 1))])
    blocks = []
    for i in range(3):
        cJi = cJ[i * n:(i + 1) * n, :]  # (n, p)
        for j in range(4):
            # cJ^T P_i diag(coord j) = cJi^T scaled columnwise
            blocks.append(cJi.T * Xh[:, j][None, :])
    return remove_redundant_rows(np.vstack(blocks))


def remove_redundant_rows(A: np.ndarray,
                          tol: float = ROW_REDUNDANCY_TOL) -> np.ndarray:
    """Keep a maximal independent subset of rows, in original order.

    A row is redundant when its residual after projecting out previously
    kept rows falls below ``tol`` times the largest row norm.
    """
    if A.shape[0] == 0:
        return A
    norms = np.linalg.norm(A, axis=1)
    cutoff = tol * norms.max()
    basis = []
    keep = []
    for idx in range(A.shape[0]):
        r = A[idx].copy()
        for q in basis:
            r -= (q @ r) * q
        # second pass stabilizes near-dependent rows
        for q in basis:
            r -= (q @ r) * q
        nrm = np.linalg.norm(r)
        if nrm > cutoff:
            basis.append(r / nrm)
            keep.append(idx)
    return A[keep]


def nullspace_basis(J_w: np.ndarray, n: int) -> np.ndarray:
    """Orthonormal basis N of null(J_w) via rank-revealing SVD."""
    if J_w.shape[0] == 0:
        return np.eye(n)
    _, s, vh = svd(J_w, full_matrices=True)
    rank = int(np.sum(s > RANK_TOL * s[0])) if s.size else 0
    return vh[rank:].T


def _fix_signs(W: np.ndarray) -> np.ndarray:
    """Deterministic sign convention: largest-magnitude entry positive."""
    idx = np.argmax(np.abs(W), axis=0)
    signs = np.sign(W[idx, np.arange(W.shape[1])])
    signs[signs == 0] = 1.0
    return W * signs[None, :]


def solve_constrained_gevp(H_w, M_w, J_w: np.ndarray, m: int
                           ) -> tuple[np.ndarray, np.ndarray]:
    """Smallest-m eigenpairs of (H_w, M_w) restricted to null(J_w).

    Equivalent to the KKT-augmented eigenproblem pairing H_w with the
    constraint rows: lift an orthonormal null-space basis N and solve the
    dense projected pencil (N^T H_w N, N^T M_w N); eigenvalues reported
    are those of the projected pencil.  Returns (W, eigenvalues) with
    W^T M_w W = I and a deterministic per-column sign.
    """
    n = H_w.shape[0]
    c = J_w.shape[0]
    if m < 1:
        raise ValueError("need at least one mode")
    if m > n - c:
        raise ValueError(
            f"m too large: requested {m} modes but only n - rank(J_w) = "
            f"{n} - {c} = {n - c} are available")

    H_d = H_w.toarray() if sp.issparse(H_w) else np.asarray(H_w, dtype=float)
    M_d = M_w.toarray() if sp.issparse(M_w) else np.asarray(M_w, dtype=float)

    if c:
        N = nullspace_basis(J_w, n)
        A = N.T @ H_d @ N
        Bm = N.T @ M_d @ N
    else:
        N = None
        A, Bm = H_d, M_d
    A = (A + A.T) * 0.5
    Bm = (Bm + Bm.T) * 0.5

    lam, U = eigh(A, Bm, subset_by_index=[0, m - 1])
    W = N @ U if N is not None else U

    gaps = np.diff(lam)
    scale = max(abs(lam[-1]), 1e-30)
    if (gaps < 1e-10 * scale).any():
        logger.warning("degenerate eigenvalue cluster(s) in skinning modes; "
                       "mode order within clusters is solver-dependent")
    return _fix_signs(W), lam


def displacement_modes(H, M, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Baseline: k smallest mass-orthonormal eigenmodes of (H, M), dense."""
    dim = H.shape[0]
    if k > dim:
        raise ValueError(f"k={k} exceeds dimension {dim}")
    H_d = H.toarray() if sp.issparse(H) else np.asarray(H, dtype=float)
    M_d = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    lam, V = eigh((H_d + H_d.T) * 0.5, (M_d + M_d.T) * 0.5,
                  subset_by_index=[0, k - 1])
    return _fix_signs(V), lam


def build_subspace(mesh: TetMesh, W: np.ndarray,
                   eigenvalues: np.ndarray) -> SkinningSubspace:
    return SkinningSubspace(W=np.asarray(W, dtype=np.float64),
                            eigenvalues=np.asarray(eigenvalues, dtype=np.float64),
                            B=lbs_jacobian(W, mesh))
