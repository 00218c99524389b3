"""Linear rigs, their constant Jacobian, and the complementarity matrix.

Rig parameters ``p`` are flattened *displacement* transforms: one 3x4
matrix per bone, row-major, bone-major, so ``p = 0`` leaves the mesh at
rest and the rigged displacement is ``u_r = J @ p`` with no rest offset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import splu

from .mesh import FullSpaceOperators, TetMesh
from .subspace import lbs_jacobian, weight_space_hessian

RIG_KINDS = ("affine_handle", "lbs_skeleton", "null_rig")


@dataclass
class LinearRig:
    """Rig weights plus kind; p_dim = 12 * bones."""

    kind: str
    weights: np.ndarray  # (n, b)

    def __post_init__(self):
        if self.kind not in RIG_KINDS:
            raise ValueError(f"unknown rig kind '{self.kind}'")
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=np.float64))
        if self.kind == "affine_handle":
            if self.weights.shape[1] != 1 or not (self.weights == 1.0).all():
                raise ValueError("affine_handle requires a single all-ones "
                                 "weight column")
        if self.kind == "null_rig" and self.weights.shape[1] != 0:
            raise ValueError("null_rig carries no weights")
        if not np.isfinite(self.weights).all():
            raise ValueError("rig weights must be finite")

    @property
    def bones(self) -> int:
        return self.weights.shape[1]

    @property
    def p_dim(self) -> int:
        return 12 * self.bones

    @classmethod
    def affine_handle(cls, n: int) -> "LinearRig":
        return cls("affine_handle", np.ones((n, 1)))

    @classmethod
    def null(cls, n: int) -> "LinearRig":
        return cls("null_rig", np.zeros((n, 0)))

    @classmethod
    def from_json(cls, path, n: int) -> "LinearRig":
        with open(path) as f:
            data = json.load(f)
        kind = data.get("kind")
        if kind == "null_rig":
            return cls.null(n)
        if kind == "affine_handle":
            return cls.affine_handle(n)
        if kind == "lbs_skeleton":
            w = np.asarray(data["weights"], dtype=np.float64)
            if w.shape[0] != n:
                raise ValueError(
                    f"rig weights have {w.shape[0]} rows, mesh has {n} vertices")
            return cls(kind, w)
        raise ValueError(f"unknown rig kind '{kind}'")


@dataclass
class ComplementarityData:
    """Rig Jacobian J, momentum-leak diagonal D and cJ = D M J."""

    J: np.ndarray        # (3n, p)
    D_diag: np.ndarray   # (3n,), entries in [0, 1]
    cJ: np.ndarray       # (3n, p)


def rig_jacobian(rig: LinearRig, mesh: TetMesh) -> np.ndarray:
    """Constant rig Jacobian: the LBS matrix of the rig weights (3n, 12b)."""
    if rig.weights.shape[0] not in (mesh.n, 0):
        raise ValueError(f"rig weights sized {rig.weights.shape}, "
                         f"mesh has {mesh.n} vertices")
    if rig.kind == "null_rig":
        return np.zeros((3 * mesh.n, 0))
    return lbs_jacobian(rig.weights, mesh)


def momentum_leak_field(mesh: TetMesh, ops: FullSpaceOperators,
                        user_field: np.ndarray | None = None) -> np.ndarray:
    """Diagonal of D (3n,): [0, 1] field shaping where rig momentum leaks.

    With no user field, runs one implicit diffusion step of the surface
    indicator into the interior, (M_w + s L_w) d = M_w chi_surface with
    s = (mean edge length)^2, then renormalizes affinely to [0, 1].
    Constant fields are kept as-is (renormalizing would divide by zero).
    """
    n = mesh.n
    if user_field is not None:
        d = np.asarray(user_field, dtype=np.float64)
        if d.shape != (n,):
            raise ValueError(f"user leak field sized {d.shape}, expected ({n},)")
        d = np.clip(d, 0.0, 1.0)
        return np.tile(d, 3)

    chi = np.zeros(n)
    chi[np.unique(mesh.surface_tris)] = 1.0
    s = mesh.mean_edge_length() ** 2
    L_w = weight_space_hessian(ops.L)
    A = (ops.M_w + s * L_w).tocsc()
    d = splu(A).solve(ops.M_w @ chi)

    lo, hi = d.min(), d.max()
    if hi - lo > 1e-14 * max(1.0, abs(hi)):
        d = (d - lo) / (hi - lo)
    d = np.clip(d, 0.0, 1.0)
    return np.tile(d, 3)


def complementarity_matrix(rig: LinearRig, mesh: TetMesh,
                           ops: FullSpaceOperators,
                           D_diag: np.ndarray) -> ComplementarityData:
    """Assemble cJ = D M J from the rig Jacobian and leak field."""
    J = rig_jacobian(rig, mesh)
    if D_diag.shape != (3 * mesh.n,):
        raise ValueError(f"leak diagonal sized {D_diag.shape}, "
                         f"expected ({3 * mesh.n},)")
    cJ = (D_diag[:, None] * (ops.M @ J)) if J.shape[1] else J.copy()
    return ComplementarityData(J=J, D_diag=D_diag, cJ=cJ)


def load_animation(path) -> tuple[float, np.ndarray]:
    """Animation JSON {dt: seconds, frames: [[p floats]]} -> (dt, (F, p))."""
    with open(path) as f:
        data = json.load(f)
    dt = float(data["dt"])
    frames = np.asarray(data["frames"], dtype=np.float64)
    if frames.size == 0 and frames.ndim < 2:
        raise ValueError("animation has no frames")
    if frames.ndim == 1:
        frames = frames.reshape(1, -1)
    if dt <= 0:
        raise ValueError("animation dt must be positive")
    return dt, frames


def save_animation(path, dt: float, frames: np.ndarray):
    with open(path, "w") as f:
        json.dump({"dt": dt, "frames": np.asarray(frames).tolist()}, f)
