"""End-to-end subspace construction: operators -> constraint -> GEVP ->
clusters, plus the reduced-operator build for a given solver config."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clusters import (Clustering, build_clustering, cluster_features,
                       kmeans_pp, split_cluster_components)
from .mesh import FullSpaceOperators, MaterialField, TetMesh, assemble_operators
from .rig import (ComplementarityData, LinearRig, complementarity_matrix,
                  momentum_leak_field)
from .solver import ReducedOperators, SolverConfig, precompute_reduced_operators
from .subspace import (SkinningSubspace, build_subspace, solve_constrained_gevp,
                       weight_space_constraint, weight_space_hessian)


@dataclass
class PrecomputeResult:
    """Everything the stepping runtime and exporters need."""

    mesh: TetMesh
    material: MaterialField
    rig: LinearRig
    ops: FullSpaceOperators
    cdata: ComplementarityData
    subspace: SkinningSubspace
    clustering: Clustering
    seed: int
    constraint_rank: int

    def constraint_residual(self) -> float:
        """Scaled max |cJ^T B|; ~0 by construction of the modes."""
        cJ, B = self.cdata.cJ, self.subspace.B
        if cJ.shape[1] == 0:
            return 0.0
        scale = np.linalg.norm(cJ) * np.linalg.norm(B)
        return float(np.abs(cJ.T @ B).max() / scale) if scale > 0 else 0.0

    def weight_constraint_residual(self) -> float:
        """Max |J_w W| over the stacked weight-space constraint rows."""
        J_w = weight_space_constraint(self.cdata.cJ, self.mesh)
        if J_w.shape[0] == 0:
            return 0.0
        scale = max(np.linalg.norm(J_w) * np.linalg.norm(self.subspace.W), 1e-300)
        return float(np.abs(J_w @ self.subspace.W).max() / scale)


def run_precompute(mesh: TetMesh, material: MaterialField, rig: LinearRig,
                   n_modes: int, n_clusters: int, seed: int,
                   subspace_energy: str = "arap",
                   leak_field: np.ndarray | None = None) -> PrecomputeResult:
    """Subspace construction: H_w, M_w, J_w, constrained GEVP, features,
    k-means++, component split, grouping matrices."""
    ops = assemble_operators(mesh, material, energy=subspace_energy)
    D = momentum_leak_field(mesh, ops, leak_field)
    cdata = complementarity_matrix(rig, mesh, ops, D)

    H_w = weight_space_hessian(ops.H)
    J_w = weight_space_constraint(cdata.cJ, mesh)
    W, lam = solve_constrained_gevp(H_w, ops.M_w, J_w, n_modes)
    subspace = build_subspace(mesh, W, lam)

    feats = cluster_features(W, lam, mesh)
    labels = kmeans_pp(feats, n_clusters, seed)
    labels = split_cluster_components(labels, mesh)
    clustering = build_clustering(labels, ops.volumes)

    return PrecomputeResult(mesh=mesh, material=material, rig=rig, ops=ops,
                            cdata=cdata, subspace=subspace,
                            clustering=clustering, seed=seed,
                            constraint_rank=J_w.shape[0])


def build_reduced(pre: PrecomputeResult, config: SolverConfig) -> ReducedOperators:
    """Reduced operators for one timestep/energy choice (h-dependent)."""
    return precompute_reduced_operators(pre.mesh, pre.ops, pre.cdata,
                                        pre.subspace, pre.clustering, config)
