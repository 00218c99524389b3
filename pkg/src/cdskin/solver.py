"""Hyper-reduced local-global complementary-dynamics stepping.

Energy convention (pinned by the finite-difference gradient tests): the
elastic density is (mu/2)|F - R|^2 + (lambda/2) tr^2(R^T F - I), whose
quadratic part reduces to 0.5 x^T L x.  With that scale the per-cluster
local-step output -m_c mu_c R_c [+ m_c lambda_c tr(R_c^T F_c - I) R_c]
and the system matrix B^T L B + (1/h^2) B^T M B are exactly the analytic
gradient and frozen-rotation Hessian of `reduced_energy`.

Cluster "mass" m_c is the cluster volume (the grouping matrices weight by
volume as well), and mu_c / lambda_c are the volume-weighted averages, so
m_c * mu_c recovers the exact sum of per-tet V_t * mu_t over the cluster.

External forces follow the gradient convention of the stepping algorithm:
`f_ext` is added verbatim to the assembled force, i.e. the energy carries
a `+ z . f_ext` term.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve, eigh
from scipy.sparse.linalg import splu

from .mesh import FullSpaceOperators, MaterialField, TetMesh
from .rig import ComplementarityData
from .subspace import SkinningSubspace
from .clusters import Clustering

logger = logging.getLogger(__name__)

FULL_SPACE_DOF_GUARD = 3000


@dataclass
class SolverConfig:
    """Timestep, energy model and iteration controls."""

    h: float = 1.0 / 60.0
    energy: str = "arap"
    max_iters: int = 30
    tol: float = 1e-6          # on |dz|_inf relative to the bbox diagonal
    ls_beta: float = 0.5
    ls_c: float = 1e-4
    ls_max: int = 20
    warm_start: bool = False   # previous-z warm start; default matches z <- 0
    static: bool = False       # drop the kinetic term (single static solve)

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("timestep h must be positive")
        if self.energy not in ("arap", "corot"):
            raise ValueError(f"unknown energy '{self.energy}'")
        if not (0 < self.ls_beta < 1 and 0 < self.ls_c < 1):
            raise ValueError("line search parameters out of range")


@dataclass
class ReducedOperators:
    """Products cached once at precompute and reused every step."""

    G9KB: np.ndarray      # (9r, 12m)
    G9KJ: np.ndarray      # (9r, p)
    f0: np.ndarray        # (9r,) rest deformation gradients (identity blocks)
    BtLB: np.ndarray      # (12m, 12m)
    BtLJ: np.ndarray      # (12m, p)
    BtMB: np.ndarray
    BtMJ: np.ndarray
    g0: np.ndarray        # (12m,) B^T L x0 (rest offset of the quadratic term)
    JtLJ: np.ndarray
    gJ0: np.ndarray
    c0: float             # x0^T L x0
    JtMJ: np.ndarray
    A_sys: np.ndarray     # (12m, 12m) BtLB [+ (1/h^2) BtMB]
    cluster_mass: np.ndarray
    cluster_mu: np.ndarray
    cluster_lambda: np.ndarray
    cJtB: np.ndarray      # (p, 12m), ~0 by construction
    cJ_norm: float
    B_norm: float
    bbox_diag: float
    h: float
    energy: str
    static: bool
    _chol: object = field(default=None, repr=False)
    _eig: object = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return self.BtLB.shape[0]

    @property
    def r(self) -> int:
        return self.G9KB.shape[0] // 9

    @property
    def p_dim(self) -> int:
        return self.BtLJ.shape[1]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._chol is not None:
            return cho_solve(self._chol, rhs)
        w, V = self._eig
        keep = w > max(w.max(), 0.0) * 1e-12
        return V[:, keep] @ ((V[:, keep].T @ rhs) / w[keep])


@dataclass
class SimState:
    """Reduced simulation state; histories roll atomically per step."""

    z: np.ndarray
    z_prev: np.ndarray
    p: np.ndarray
    p_prev: np.ndarray
    f_ext: np.ndarray

    @classmethod
    def rest(cls, red: ReducedOperators) -> "SimState":
        return cls(z=np.zeros(red.k), z_prev=np.zeros(red.k),
                   p=np.zeros(red.p_dim), p_prev=np.zeros(red.p_dim),
                   f_ext=np.zeros(red.k))

    def reset(self):
        self.z[:] = 0.0
        self.z_prev[:] = 0.0
        self.p[:] = 0.0
        self.p_prev[:] = 0.0
        self.f_ext[:] = 0.0


@dataclass
class StepInfo:
    iterations: int
    converged: bool
    line_search_failures: int
    energy_trace: list


def precompute_reduced_operators(mesh: TetMesh, ops: FullSpaceOperators,
                                 cdata: ComplementarityData,
                                 subspace: SkinningSubspace,
                                 clustering: Clustering,
                                 config: SolverConfig) -> ReducedOperators:
    """Form every cached product of the stepping algorithm."""
    B, J = subspace.B, cdata.J
    x0 = mesh.positions_flat()

    G9K = (clustering.G9 @ ops.K).tocsr()
    G9KB = np.asarray(G9K @ B)
    G9KJ = np.asarray(G9K @ J) if J.shape[1] else np.zeros((G9K.shape[0], 0))
    f0 = np.asarray(G9K @ x0)

    LB = ops.L @ B
    LJ = ops.L @ J if J.shape[1] else np.zeros_like(J)
    Lx0 = ops.L @ x0
    BtLB = _sym(B.T @ LB)
    BtLJ = B.T @ LJ
    JtLJ = _sym(J.T @ LJ)
    g0 = B.T @ Lx0
    gJ0 = J.T @ Lx0
    c0 = float(x0 @ Lx0)

    mdiag = ops.M.diagonal()
    BtMB = _sym(B.T @ (mdiag[:, None] * B))
    BtMJ = B.T @ (mdiag[:, None] * J)
    JtMJ = _sym(J.T @ (mdiag[:, None] * J))

    vols = ops.volumes
    labels = clustering.labels
    cluster_mass = np.bincount(labels, weights=vols,
                               minlength=clustering.r_eff)
    cluster_mu = np.asarray(clustering.G @ ops.mu_per_tet)
    cluster_lambda = np.asarray(clustering.G @ ops.lam_per_tet)

    A_sys = BtLB.copy()
    if not config.static:
        A_sys = A_sys + BtMB / config.h**2
    A_sys = _sym(A_sys)

    chol = eig = None
    try:
        chol = cho_factor(A_sys, lower=True)
    except np.linalg.LinAlgError:
        w, V = eigh(A_sys)
        if w.min() < -1e-10 * max(abs(w.max()), 1e-30):
            raise ValueError(
                "system matrix is not positive semidefinite; check mass, "
                "stiffness and timestep inputs") from None
        logger.warning("system matrix is PSD but singular (subspace has "
                       "dependent columns); using a pseudo-inverse solve")
        eig = (w, V)

    cJtB = cdata.cJ.T @ B if cdata.cJ.shape[1] else np.zeros((0, B.shape[1]))

    return ReducedOperators(
        G9KB=G9KB, G9KJ=G9KJ, f0=f0, BtLB=BtLB, BtLJ=BtLJ, BtMB=BtMB,
        BtMJ=BtMJ, g0=g0, JtLJ=JtLJ, gJ0=gJ0, c0=c0, JtMJ=JtMJ, A_sys=A_sys,
        cluster_mass=cluster_mass, cluster_mu=cluster_mu,
        cluster_lambda=cluster_lambda, cJtB=cJtB,
        cJ_norm=float(np.linalg.norm(cdata.cJ)),
        B_norm=float(np.linalg.norm(B)),
        bbox_diag=mesh.bbox_diag, h=config.h, energy=config.energy,
        static=config.static, _chol=chol, _eig=eig)


def _sym(A: np.ndarray) -> np.ndarray:
    return (A + A.T) * 0.5


def polar_rotation(F: np.ndarray) -> np.ndarray:
    """Rotation factor of F via SVD; det +1, maximizes tr(R^T F) over SO(3)."""
    F = np.asarray(F, dtype=np.float64)
    if not np.isfinite(F).all():
        raise ValueError("non-finite deformation gradient")
    if not F.any():
        logger.warning("polar decomposition of an all-zero matrix; returning I")
        return np.eye(3)
    return polar_rotations(F[None, :, :])[0]


def polar_rotations(F: np.ndarray) -> np.ndarray:
    """Batched rotation extraction for (r, 3, 3) deformation gradients."""
    U, _, Vt = np.linalg.svd(F)
    det = np.linalg.det(np.einsum("cij,cjk->cik", U, Vt))
    U = U.copy()
    U[:, :, 2] *= det[:, None]
    return np.einsum("cij,cjk->cik", U, Vt)


def _cluster_gradients(F, R, red: ReducedOperators):
    coeff = red.cluster_mass * red.cluster_mu
    out = -coeff[:, None, None] * R
    if red.energy == "corot":
        tr = np.einsum("cab,cab->c", R, F) - 3.0
        out = out + (red.cluster_mass * red.cluster_lambda * tr)[:, None, None] * R
    return out


def cluster_deformation(z: np.ndarray, p: np.ndarray,
                        red: ReducedOperators) -> np.ndarray:
    """Per-cluster deformation gradients f_tilde (9r,)."""
    ft = red.G9KB @ z + red.f0
    if p.size:
        ft = ft + red.G9KJ @ p
    return ft


def local_step(z: np.ndarray, p: np.ndarray,
               red: ReducedOperators) -> np.ndarray:
    """Per-cluster analytic gradient of the nonlinear energy w.r.t. F (9r,)."""
    ft = cluster_deformation(z, p, red)
    if not np.isfinite(ft).all():
        raise ValueError("non-finite deformation gradient in local step")
    F = ft.reshape(-1, 3, 3)
    R = polar_rotations(F)
    return _cluster_gradients(F, R, red).reshape(-1)


def reduced_energy(z: np.ndarray, p: np.ndarray, z_hist: np.ndarray,
                   p_hist: np.ndarray, f_ext: np.ndarray,
                   red: ReducedOperators, config: SolverConfig) -> float:
    """Total reduced energy: quadratic + clustered nonlinear + inertia.

    Includes the parameter-only terms, so on an exact (full-rank, r = t)
    setup it equals the full-space energy of u = B z + J p.
    """
    e = 0.5 * z @ (red.BtLB @ z) + z @ red.g0 + 0.5 * red.c0
    if p.size:
        e += z @ (red.BtLJ @ p) + 0.5 * p @ (red.JtLJ @ p) + p @ red.gJ0

    ft = cluster_deformation(z, p, red)
    F = ft.reshape(-1, 3, 3)
    R = polar_rotations(F)
    tr_fr = np.einsum("cab,cab->c", R, F)
    e += float(np.sum(red.cluster_mass * red.cluster_mu * (1.5 - tr_fr)))
    if red.energy == "corot":
        e += 0.5 * float(np.sum(red.cluster_mass * red.cluster_lambda
                                * (tr_fr - 3.0) ** 2))

    if not config.static:
        dz = z - z_hist
        e_kin = 0.5 * dz @ (red.BtMB @ dz)
        if p.size:
            dp = p - p_hist
            e_kin += dz @ (red.BtMJ @ dp) + 0.5 * dp @ (red.JtMJ @ dp)
        e += e_kin / config.h**2

    return float(e + z @ f_ext)


def assemble_force(p: np.ndarray, z_hist: np.ndarray, p_hist: np.ndarray,
                   f_ext: np.ndarray, dPhi_df: np.ndarray,
                   red: ReducedOperators, config: SolverConfig) -> np.ndarray:
    """The constant part f of the gradient A_sys z + f at frozen rotations."""
    f = red.g0 + red.G9KB.T @ dPhi_df + f_ext
    if p.size:
        f = f + red.BtLJ @ p
    if not config.static:
        f = f - (red.BtMB @ z_hist) / config.h**2
        if p.size:
            f = f + (red.BtMJ @ (p - p_hist)) / config.h**2
    return f


def global_step(z: np.ndarray, p: np.ndarray, z_hist: np.ndarray,
                p_hist: np.ndarray, f_ext: np.ndarray, dPhi_df: np.ndarray,
                red: ReducedOperators, config: SolverConfig
                ) -> tuple[np.ndarray, float, bool]:
    """One quasi-Newton solve; ARAP takes the full step, corot line-searches.

    Returns (z_next, step length, line-search-failed flag).
    """
    f = assemble_force(p, z_hist, p_hist, f_ext, dPhi_df, red, config)
    dz = red.solve(-f - red.A_sys @ z)

    if red.energy == "arap":
        # Exact minimizer of the frozen-rotation quadratic: no line search.
        return z + dz, 1.0, False

    e0 = reduced_energy(z, p, z_hist, p_hist, f_ext, red, config)
    slope = float((red.A_sys @ z + f) @ dz)
    alpha = 1.0
    for _ in range(config.ls_max):
        z_try = z + alpha * dz
        e_try = reduced_energy(z_try, p, z_hist, p_hist, f_ext, red, config)
        if e_try <= e0 + config.ls_c * alpha * slope:
            return z_try, alpha, False
        alpha *= config.ls_beta
    logger.warning("backtracking line search failed after %d halvings; "
                   "rejecting step", config.ls_max)
    return z.copy(), 0.0, True


def simulation_step(state: SimState, p_new: np.ndarray,
                    red: ReducedOperators, config: SolverConfig,
                    track_energy: bool = False) -> StepInfo:
    """One full timestep: local/global alternation from a z = 0 warm start.

    Non-convergence is not an error: the last iterate is accepted and the
    iteration count reported.  Histories roll only on return.
    """
    p_new = np.asarray(p_new, dtype=np.float64)
    if p_new.shape != (red.p_dim,):
        raise ValueError(f"rig parameters sized {p_new.shape}, "
                         f"expected ({red.p_dim},)")
    z_hist = 2.0 * state.z - state.z_prev
    p_hist = 2.0 * state.p - state.p_prev
    z = state.z.copy() if config.warm_start else np.zeros(red.k)

    trace = []
    if track_energy:
        trace.append(reduced_energy(z, p_new, z_hist, p_hist, state.f_ext,
                                    red, config))
    iterations = 0
    converged = False
    ls_failures = 0
    for iterations in range(1, config.max_iters + 1):
        dPhi = local_step(z, p_new, red)
        z_next, _, ls_failed = global_step(z, p_new, z_hist, p_hist,
                                           state.f_ext, dPhi, red, config)
        ls_failures += ls_failed
        if track_energy:
            trace.append(reduced_energy(z_next, p_new, z_hist, p_hist,
                                        state.f_ext, red, config))
        dz_inf = float(np.abs(z_next - z).max(initial=0.0))
        z = z_next
        if dz_inf < config.tol * red.bbox_diag:
            converged = True
            break

    state.z_prev = state.z
    state.z = z
    state.p_prev = state.p
    state.p = p_new.copy()
    return StepInfo(iterations=iterations, converged=converged,
                    line_search_failures=ls_failures, energy_trace=trace)


def complementarity_residual(red: ReducedOperators, z: np.ndarray) -> float:
    """Scaled runtime constraint residual |cJ^T B z| (regression guard)."""
    if red.cJtB.shape[0] == 0:
        return 0.0
    num = float(np.abs(red.cJtB @ z).max(initial=0.0))
    den = red.cJ_norm * red.B_norm * max(float(np.linalg.norm(z)), 1e-300)
    return num / den if den > 0 else 0.0


def project_full(z: np.ndarray, p: np.ndarray, subspace: SkinningSubspace,
                 J: np.ndarray, mesh: TetMesh) -> np.ndarray:
    """Deformed vertex positions x0 + J p + B z, returned (n, 3)."""
    x = mesh.positions_flat() + subspace.B @ z
    if p.size:
        x = x + J @ p
    return x.reshape(3, mesh.n).T.copy()


# ---------------------------------------------------------------------------
# Full-space reference solver (test oracle only; guarded to small meshes)
# ---------------------------------------------------------------------------

@dataclass
class FullState:
    u: np.ndarray
    u_prev: np.ndarray
    p: np.ndarray
    p_prev: np.ndarray

    @classmethod
    def rest(cls, n: int, p_dim: int) -> "FullState":
        return cls(np.zeros(3 * n), np.zeros(3 * n),
                   np.zeros(p_dim), np.zeros(p_dim))


class FullSpaceReference:
    """Constrained full-space local-global solver over u^c.

    Minimizes the same elastic + backward-Euler energy as the reduced
    solver with per-tet (r = t) rotations, subject to cJ^T u^c = 0 through
    a KKT-bordered global step.  Used only as a cross-validation oracle.
    """

    def __init__(self, mesh: TetMesh, ops: FullSpaceOperators,
                 mat: MaterialField, cdata: ComplementarityData,
                 config: SolverConfig):
        if 3 * mesh.n > FULL_SPACE_DOF_GUARD:
            raise ValueError(
                f"full-space reference is guarded to 3n <= "
                f"{FULL_SPACE_DOF_GUARD} (got {3 * mesh.n})")
        self.mesh, self.ops, self.mat, self.cdata = mesh, ops, mat, cdata
        self.config = config
        self.x0 = mesh.positions_flat()
        self.vols = ops.volumes

        A = ops.L if config.static else (ops.L + ops.M / config.h**2).tocsr()
        self._A = A
        p = cdata.cJ.shape[1]
        if p:
            C = sp.csr_matrix(cdata.cJ)
            kkt = sp.bmat([[A, C], [C.T, None]], format="csc")
        else:
            kkt = sp.csc_matrix(A)
        self._lu = splu(kkt)
        self._p = p

    def energy(self, u: np.ndarray, p: np.ndarray, u_hist: np.ndarray,
               p_hist: np.ndarray, f_ext: np.ndarray) -> float:
        x = self.x0 + u
        if p.size:
            x = x + self.cdata.J @ p
        e = 0.5 * x @ (self.ops.L @ x)
        F = (self.ops.K @ x).reshape(-1, 3, 3)
        R = polar_rotations(F)
        tr_fr = np.einsum("cab,cab->c", R, F)
        e += float(np.sum(self.vols * self.mat.mu * (1.5 - tr_fr)))
        e += 0.5 * float(np.sum(self.vols * self.mat.lam * (tr_fr - 3.0) ** 2))
        if not self.config.static:
            d = u - u_hist
            if p.size:
                d = d + self.cdata.J @ (p - p_hist)
            e += 0.5 * d @ (self.ops.M @ d) / self.config.h**2
        return float(e + u @ f_ext)

    def _gradient_const(self, p, u_hist, p_hist, f_ext, dPhi):
        f = self.ops.L @ self.x0 + self.ops.K.T @ dPhi + f_ext
        if p.size:
            f = f + self.ops.L @ (self.cdata.J @ p)
        if not self.config.static:
            d = -u_hist
            if p.size:
                d = d + self.cdata.J @ (p - p_hist)
            f = f + (self.ops.M @ d) / self.config.h**2
        return f

    def _dPhi(self, u: np.ndarray, p: np.ndarray) -> np.ndarray:
        x = self.x0 + u
        if p.size:
            x = x + self.cdata.J @ p
        F = (self.ops.K @ x).reshape(-1, 3, 3)
        R = polar_rotations(F)
        coeff = self.vols * self.mat.mu
        out = -coeff[:, None, None] * R
        tr = np.einsum("cab,cab->c", R, F) - 3.0
        out = out + (self.vols * self.mat.lam * tr)[:, None, None] * R
        return out.reshape(-1)

    def step(self, state: FullState, p_new: np.ndarray,
             f_ext: np.ndarray | None = None) -> StepInfo:
        cfg = self.config
        n3 = 3 * self.mesh.n
        f_ext = np.zeros(n3) if f_ext is None else f_ext
        u_hist = 2.0 * state.u - state.u_prev
        p_hist = 2.0 * state.p - state.p_prev
        u = np.zeros(n3)
        A = self._A

        iterations = 0
        converged = False
        ls_failures = 0
        for iterations in range(1, cfg.max_iters + 1):
            dPhi = self._dPhi(u, p_new)
            f = self._gradient_const(p_new, u_hist, p_hist, f_ext, dPhi)
            rhs = -(f + A @ u)
            if self._p:
                du = self._lu.solve(np.concatenate([rhs, np.zeros(self._p)]))
                du = du[:n3]
            else:
                du = self._lu.solve(rhs)

            if cfg.energy == "arap":
                u_next = u + du
            else:
                e0 = self.energy(u, p_new, u_hist, p_hist, f_ext)
                slope = float((A @ u + f) @ du)
                alpha = 1.0
                u_next = None
                for _ in range(cfg.ls_max):
                    u_try = u + alpha * du
                    if self.energy(u_try, p_new, u_hist, p_hist, f_ext) \
                            <= e0 + cfg.ls_c * alpha * slope:
                        u_next = u_try
                        break
                    alpha *= cfg.ls_beta
                if u_next is None:
                    ls_failures += 1
                    u_next = u.copy()

            du_inf = float(np.abs(u_next - u).max(initial=0.0))
            u = u_next
            if du_inf < cfg.tol * self.mesh.bbox_diag:
                converged = True
                break

        state.u_prev = state.u
        state.u = u
        state.p_prev = state.p
        state.p = np.asarray(p_new, dtype=np.float64).copy()
        return StepInfo(iterations=iterations, converged=converged,
                        line_search_failures=ls_failures, energy_trace=[])


def full_space_reference_step(mesh: TetMesh, ops: FullSpaceOperators,
                              mat: MaterialField, cdata: ComplementarityData,
                              state: FullState, p_new: np.ndarray,
                              config: SolverConfig) -> StepInfo:
    """One-shot convenience wrapper around FullSpaceReference."""
    return FullSpaceReference(mesh, ops, mat, cdata, config).step(state, p_new)
