"""Estimator-style facade: fit a mesh + rig once, then step or transform.

Follows the scikit-learn parameter protocol (``get_params`` /
``set_params``, constructor arguments stored verbatim, fitted attributes
carrying a trailing underscore) so the engine composes with generic
model-selection tooling without depending on scikit-learn itself.
"""

from __future__ import annotations

import inspect

import numpy as np

from ._validation import check_array, check_choice, check_positive
from .mesh import MaterialField, TetMesh
from .pipeline import PrecomputeResult, build_reduced, run_precompute
from .rig import LinearRig
from .solver import (SimState, SolverConfig, complementarity_residual,
                     project_full, simulation_step)


class NotFittedError(RuntimeError):
    pass


class ComplementaryDynamics:
    """Reduced complementary-dynamics engine with a fit/step interface.

    Parameters
    ----------
    n_modes : number of secondary skinning eigenmodes (12 DOF each).
    n_clusters : requested tet cluster count (may grow when disconnected
        clusters are split).
    energy : "arap" or "corot" runtime elasticity.
    h : timestep in seconds.
    seed : k-means seeding; fixed seed gives bit-identical precomputes.
    subspace_energy : Hessian used for mode construction ("arap" default).
    """

    def __init__(self, n_modes: int = 8, n_clusters: int = 16,
                 energy: str = "arap", h: float = 1.0 / 60.0, seed: int = 0,
                 subspace_energy: str = "arap", max_iters: int = 30,
                 tol: float = 1e-6, ls_beta: float = 0.5, ls_c: float = 1e-4,
                 ls_max: int = 20, warm_start: bool = False):
        self.n_modes = n_modes
        self.n_clusters = n_clusters
        self.energy = energy
        self.h = h
        self.seed = seed
        self.subspace_energy = subspace_energy
        self.max_iters = max_iters
        self.tol = tol
        self.ls_beta = ls_beta
        self.ls_c = ls_c
        self.ls_max = ls_max
        self.warm_start = warm_start

    # -- sklearn parameter protocol ------------------------------------
    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "ComplementaryDynamics":
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for "
                                 f"{type(self).__name__}")
            setattr(self, key, value)
        return self

    # -- fitting ---------------------------------------------------------
    def fit(self, mesh: TetMesh, material: MaterialField | None = None,
            rig: LinearRig | None = None,
            leak_field: np.ndarray | None = None) -> "ComplementaryDynamics":
        """Precompute the subspace, clusters and reduced operators."""
        if not isinstance(mesh, TetMesh):
            raise TypeError("mesh must be a TetMesh")
        material = material or MaterialField.homogeneous(mesh.t)
        rig = rig or LinearRig.null(mesh.n)
        check_choice(self.energy, "energy", ("arap", "corot"))
        check_choice(self.subspace_energy, "subspace_energy",
                     ("arap", "corot"))
        check_positive(self.h, "h")
        if leak_field is not None:
            leak_field = check_array(leak_field, "leak_field",
                                     shape=(mesh.n,))

        self.precompute_ = run_precompute(
            mesh, material, rig, int(self.n_modes), int(self.n_clusters),
            int(self.seed), subspace_energy=self.subspace_energy,
            leak_field=leak_field)
        self.config_ = SolverConfig(
            h=self.h, energy=self.energy, max_iters=int(self.max_iters),
            tol=self.tol, ls_beta=self.ls_beta, ls_c=self.ls_c,
            ls_max=int(self.ls_max), warm_start=self.warm_start)
        self.reduced_ = build_reduced(self.precompute_, self.config_)
        self.state_ = SimState.rest(self.reduced_)
        self.n_modes_ = self.precompute_.subspace.m
        self.n_clusters_ = self.precompute_.clustering.r_eff
        self.p_dim_ = self.precompute_.rig.p_dim
        return self

    def _check_fitted(self):
        if not hasattr(self, "reduced_"):
            raise NotFittedError("call fit() before stepping")

    @classmethod
    def from_precompute(cls, pre: PrecomputeResult,
                        **params) -> "ComplementaryDynamics":
        """Wrap an existing precompute (e.g. a loaded cache) for stepping."""
        est = cls(**params)
        est.precompute_ = pre
        est.config_ = SolverConfig(
            h=est.h, energy=est.energy, max_iters=int(est.max_iters),
            tol=est.tol, ls_beta=est.ls_beta, ls_c=est.ls_c,
            ls_max=int(est.ls_max), warm_start=est.warm_start)
        est.reduced_ = build_reduced(pre, est.config_)
        est.state_ = SimState.rest(est.reduced_)
        est.n_modes_ = pre.subspace.m
        est.n_clusters_ = pre.clustering.r_eff
        est.p_dim_ = pre.rig.p_dim
        return est

    # -- stepping ----------------------------------------------------------
    def step(self, p: np.ndarray, track_energy: bool = False):
        """Advance one timestep under rig parameters p; returns (z, info)."""
        self._check_fitted()
        p = check_array(p, "p", shape=(self.p_dim_,))
        info = simulation_step(self.state_, p, self.reduced_, self.config_,
                               track_energy=track_energy)
        return self.state_.z.copy(), info

    def transform(self, P: np.ndarray) -> np.ndarray:
        """Batch-simulate a rig trajectory from rest; rows are frames."""
        self._check_fitted()
        P = check_array(np.atleast_2d(P), "P", shape=(-1, self.p_dim_))
        self.reset()
        Z = np.empty((P.shape[0], self.reduced_.k))
        for i, p in enumerate(P):
            Z[i], _ = self.step(p)
        return Z

    def fit_transform(self, mesh, P, material=None, rig=None) -> np.ndarray:
        return self.fit(mesh, material, rig).transform(P)

    def reset(self):
        self._check_fitted()
        self.state_.reset()

    def set_external_force(self, f_ext: np.ndarray):
        self._check_fitted()
        self.state_.f_ext = check_array(f_ext, "f_ext",
                                        shape=(self.reduced_.k,))

    def positions(self, z: np.ndarray | None = None,
                  p: np.ndarray | None = None) -> np.ndarray:
        """Full-space vertex positions for a reduced state (default: current)."""
        self._check_fitted()
        z = self.state_.z if z is None else check_array(z, "z")
        p = self.state_.p if p is None else check_array(p, "p")
        return project_full(z, p, self.precompute_.subspace,
                            self.precompute_.cdata.J, self.precompute_.mesh)

    def complementarity(self, z: np.ndarray | None = None) -> float:
        self._check_fitted()
        z = self.state_.z if z is None else z
        return complementarity_residual(self.reduced_, z)
