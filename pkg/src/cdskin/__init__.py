"""Reduced-order complementary dynamics with skinning eigenmode subspaces."""

from .clusters import (Clustering, build_clustering, cluster_features,
                       grouping_matrices, kmeans_pp, split_cluster_components)
from .estimator import ComplementaryDynamics, NotFittedError
from .mesh import (DegenerateTetError, FullSpaceOperators, MaterialField,
                   MeshError, MeshParseError, TetMesh, assemble_operators,
                   load_tet_mesh, save_tet_mesh, tet_volumes, write_obj)
from .pipeline import PrecomputeResult, build_reduced, run_precompute
from .rig import (ComplementarityData, LinearRig, complementarity_matrix,
                  load_animation, momentum_leak_field, rig_jacobian,
                  save_animation)
from .solver import (FullSpaceReference, FullState, ReducedOperators,
                     SimState, SolverConfig, StepInfo,
                     complementarity_residual, full_space_reference_step,
                     global_step, local_step, polar_rotation, polar_rotations,
                     precompute_reduced_operators, project_full,
                     reduced_energy, simulation_step)
from .subspace import (SkinningSubspace, build_subspace, displacement_modes,
                       lbs_jacobian, rep_apply, rotate_reduced_coords,
                       solve_constrained_gevp, weight_space_constraint,
                       weight_space_hessian, weight_space_skinning_jacobians)

__version__ = "0.1.0"

__all__ = [
    "Clustering", "ComplementarityData", "ComplementaryDynamics",
    "DegenerateTetError", "FullSpaceOperators", "FullSpaceReference",
    "FullState", "LinearRig", "MaterialField", "MeshError", "MeshParseError",
    "NotFittedError", "PrecomputeResult", "ReducedOperators",
    "SimState", "SkinningSubspace", "SolverConfig", "StepInfo", "TetMesh",
    "assemble_operators", "build_clustering", "build_reduced",
    "build_subspace", "cluster_features", "complementarity_matrix",
    "complementarity_residual", "displacement_modes",
    "full_space_reference_step", "global_step", "grouping_matrices",
    "kmeans_pp", "lbs_jacobian", "load_animation", "load_tet_mesh",
    "local_step", "momentum_leak_field", "polar_rotation", "polar_rotations",
    "precompute_reduced_operators", "project_full", "reduced_energy",
    "rep_apply", "rig_jacobian", "rotate_reduced_coords", "run_precompute",
    "save_animation", "save_tet_mesh", "simulation_step",
    "solve_constrained_gevp", "split_cluster_components", "tet_volumes",
    "weight_space_constraint", "weight_space_hessian",
    "weight_space_skinning_jacobians", "write_obj",
]
