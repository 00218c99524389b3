"""Tet clustering from eigenvalue-scaled subspace features.

Clusters average per-tet deformation-gradient quantities; they inherit
the material- and rig-sensitivity of the skinning weights they are built
from.  Connectivity for the component-splitting pass is face adjacency
(two tets adjacent iff they share a triangular face).
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import TetMesh

LLOYD_MAX_ITERS = 100


@dataclass
class Clustering:
    """Per-tet labels plus the grouping operators G (r,t) and G9 (9r,9t)."""

    labels: np.ndarray
    r_eff: int
    G: sp.csr_matrix
    G9: sp.csr_matrix


def cluster_features(W: np.ndarray, eigenvalues: np.ndarray,
                     mesh: TetMesh) -> np.ndarray:
    """Per-tet features: vertex weights averaged onto tets, scaled 1/lam^2.

    The regularizer delta = (1e-6 * max(lam, 1e-30))^2 keeps near-zero
    constrained eigenvalues from overflowing the inverse-square scaling.
    """
    W = np.atleast_2d(W)
    lam = np.asarray(eigenvalues, dtype=np.float64)
    tet_avg = W[mesh.tets].mean(axis=1)  # (t, m)
    delta = (1e-6 * max(float(lam.max(initial=0.0)), 1e-30)) ** 2
    return tet_avg / (lam**2 + delta)[None, :]


def kmeans_pp(features: np.ndarray, r: int, seed: int) -> np.ndarray:
    """k-means++ seeding followed by Lloyd iterations; deterministic per seed.

    Empty clusters are repaired by reseeding at the point farthest from
    its assigned centroid.  Converges when no label changes (cap
    LLOYD_MAX_ITERS).
    """
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    t = X.shape[0]
    if r > t:
        raise ValueError(f"requested {r} clusters for {t} tets")
    if r == t:
        return np.arange(t, dtype=np.int64)
    if r == 1:
        return np.zeros(t, dtype=np.int64)

    rng = np.random.default_rng(seed)
    centers = np.empty((r, X.shape[1]))
    centers[0] = X[rng.integers(t)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for i in range(1, r):
        total = d2.sum()
        if total <= 0.0:
            pick = int(rng.integers(t))
        else:
            u = rng.random() * total
            pick = int(np.searchsorted(np.cumsum(d2), u))
            pick = min(pick, t - 1)
        centers[i] = X[pick]
        d2 = np.minimum(d2, ((X - centers[i]) ** 2).sum(axis=1))

    labels = np.zeros(t, dtype=np.int64)
    for _ in range(LLOYD_MAX_ITERS):
        dist = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(dist, axis=1)
        assigned_d2 = dist[np.arange(t), new_labels]

        counts = np.bincount(new_labels, minlength=r)
        for c in np.nonzero(counts == 0)[0]:
            far = int(np.argmax(assigned_d2))
            new_labels[far] = c
            assigned_d2[far] = 0.0
            counts = np.bincount(new_labels, minlength=r)

        for c in range(r):
            members = new_labels == c
            if members.any():
                centers[c] = X[members].mean(axis=0)

        if (new_labels == labels).all():
            break
        labels = new_labels
    return labels


def split_cluster_components(labels: np.ndarray, mesh: TetMesh) -> np.ndarray:
    """Split every cluster into its face-connected components.

    Output labels are compact, assigned in discovery order (scanning tets
    by index), so connected inputs come back unchanged up to renumbering.
    """
    labels = np.asarray(labels, dtype=np.int64)
    t = mesh.t
    if labels.shape != (t,):
        raise ValueError(f"labels sized {labels.shape}, expected ({t},)")

    local = [(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)]
    faces = np.sort(np.concatenate([mesh.tets[:, f] for f in local]), axis=1)
    owner = np.tile(np.arange(t), 4)
    groups = defaultdict(list)
    for face, tet in zip(map(tuple, faces), owner):
        groups[face].append(tet)
    adjacency = [[] for _ in range(t)]
    for tets_on_face in groups.values():
        if len(tets_on_face) == 2:
            a, b = tets_on_face
            adjacency[a].append(b)
            adjacency[b].append(a)

    out = np.full(t, -1, dtype=np.int64)
    next_label = 0
    for start in range(t):
        if out[start] >= 0:
            continue
        stack = [start]
        out[start] = next_label
        while stack:
            cur = stack.pop()
            for nb in adjacency[cur]:
                if out[nb] < 0 and labels[nb] == labels[cur]:
                    out[nb] = next_label
                    stack.append(nb)
        next_label += 1
    return out


def grouping_matrices(labels: np.ndarray,
                      volumes: np.ndarray) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Volume-weighted averaging G (r,t) and its 9-component expansion G9.

    G9 = kron(G, I_9) matches the tet-major, row-major flattening of the
    deformation-gradient operator.
    """
    labels = np.asarray(labels, dtype=np.int64)
    t = labels.shape[0]
    r = int(labels.max()) + 1
    if np.bincount(labels, minlength=r).min() == 0:
        raise ValueError("empty cluster")
    cluster_vol = np.bincount(labels, weights=volumes, minlength=r)
    w = volumes / cluster_vol[labels]
    G = sp.csr_matrix((w, (labels, np.arange(t))), shape=(r, t))
    G9 = sp.kron(G, sp.eye(9), format="csr")
    return G, G9


def build_clustering(labels: np.ndarray, volumes: np.ndarray) -> Clustering:
    G, G9 = grouping_matrices(labels, volumes)
    return Clustering(labels=np.asarray(labels, dtype=np.int64),
                      r_eff=G.shape[0], G=G, G9=G9)
