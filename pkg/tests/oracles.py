"""Independent brute-force oracles for expected values.

Everything here is deliberately written as explicit per-entity loops (or
textbook formulas) that share no assembly code with the package.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg


def lbs_displacement_loop(W, verts, transforms) -> np.ndarray:
    """Per-vertex LBS evaluation u_i = sum_b w_ib T_b X_i, axis-major (3n,).

    ``transforms`` is (m, 3, 4); X_i homogeneous.
    """
    n, m = W.shape
    u = np.zeros((n, 3))
    for i in range(n):
        Xh = np.append(verts[i], 1.0)
        for b in range(m):
            u[i] += W[i, b] * (transforms[b] @ Xh)
    return u.ravel(order="F")


def surface_integral_volume(verts, tris) -> float:
    """Divergence-theorem volume of a closed, outward-oriented surface."""
    total = 0.0
    for tri in tris:
        v0, v1, v2 = verts[tri]
        total += np.dot(v0, np.cross(v1, v2)) / 6.0
    return total


def tet_deformation_gradient(x, verts0, tet) -> np.ndarray:
    """F = Ds Dm^-1 from deformed positions x (n,3) and rest verts."""
    dm = np.stack([verts0[tet[k]] - verts0[tet[0]] for k in (1, 2, 3)], axis=1)
    ds = np.stack([x[tet[k]] - x[tet[0]] for k in (1, 2, 3)], axis=1)
    return ds @ np.linalg.inv(dm)


def polar_rotation_ref(F) -> np.ndarray:
    U, _, Vt = np.linalg.svd(F)
    d = np.linalg.det(U @ Vt)
    return U @ np.diag([1.0, 1.0, d]) @ Vt


def elastic_energy_loop(x, verts0, tets, vols, mu, lam) -> float:
    """Sum over tets of V [ (mu/2)|F - R|^2 + (lam/2) tr^2(R^T F - I) ]."""
    e = 0.0
    for j, tet in enumerate(tets):
        F = tet_deformation_gradient(x, verts0, tet)
        R = polar_rotation_ref(F)
        e += vols[j] * (0.5 * mu[j] * np.sum((F - R) ** 2)
                        + 0.5 * lam[j] * np.trace(R.T @ F - np.eye(3)) ** 2)
    return e


def elastic_gradient_fd(x_flat, verts0, tets, vols, mu, lam,
                        eps=1e-6) -> np.ndarray:
    """Central FD of the brute-force elastic energy w.r.t. flat positions."""
    n = verts0.shape[0]

    def at(xf):
        return elastic_energy_loop(xf.reshape(3, n).T, verts0, tets, vols,
                                   mu, lam)

    g = np.zeros_like(x_flat)
    for i in range(x_flat.size):
        xp = x_flat.copy()
        xm = x_flat.copy()
        xp[i] += eps
        xm[i] -= eps
        g[i] = (at(xp) - at(xm)) / (2 * eps)
    return g


def fd_gradient(fun, x, eps=1e-6) -> np.ndarray:
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += eps
        xm[i] -= eps
        g[i] = (fun(xp) - fun(xm)) / (2 * eps)
    return g


def cotan_laplacian(verts, tets) -> np.ndarray:
    """Classic 3D cotangent/stiffness Laplacian: per-edge dihedral formula.

    w_ij = (1/6) sum_tets l_kl cot(theta_kl), with (k, l) the edge opposite
    (i, j) and theta_kl its dihedral angle.  Dense (n, n), PSD.
    """
    n = verts.shape[0]
    L = np.zeros((n, n))
    edges = [(0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2),
             (1, 2, 0, 3), (1, 3, 0, 2), (2, 3, 0, 1)]
    for tet in tets:
        p = verts[tet]
        for (a, b, c, d) in edges:
            # dihedral angle along opposite edge (c, d)
            e = p[d] - p[c]
            n1 = np.cross(p[a] - p[c], e)
            n2 = np.cross(p[b] - p[c], e)
            cos = np.dot(n1, n2) / (np.linalg.norm(n1) * np.linalg.norm(n2))
            sin = np.linalg.norm(np.cross(n1, n2)) / (
                np.linalg.norm(n1) * np.linalg.norm(n2))
            cot = cos / sin
            w = np.linalg.norm(e) * cot / 6.0
            i, j = tet[a], tet[b]
            L[i, j] -= w
            L[j, i] -= w
            L[i, i] += w
            L[j, j] += w
    return L


def hw_trace_reduction(H_dense, A_list, C) -> np.ndarray:
    """Weight-space Hessian via the Kronecker trace reduction.

    sum_ij c_ij A_i^T H A_j over the 12 affine parameters with covariance
    C (12, 12); A_list holds the weight-space skinning Jacobians as dense
    arrays in the same parameter order as C's rows.
    """
    n = A_list[0].shape[1]
    Hw = np.zeros((n, n))
    for i in range(12):
        for j in range(12):
            if C[i, j] != 0.0:
                Hw += C[i, j] * (A_list[i].T @ H_dense @ A_list[j])
    return Hw


def translation_only_covariance() -> np.ndarray:
    """C prioritizing the three translation parameters (4th affine column)."""
    block = np.zeros((4, 4))
    block[3, 3] = 1.0
    return np.kron(np.eye(3), block)


def dense_constrained_eigs(H_w, M_w, J_w, m):
    """Full-spectrum dense solve of the projected pencil (oracle)."""
    if J_w.shape[0]:
        N = scipy.linalg.null_space(J_w)
    else:
        N = np.eye(H_w.shape[0])
    A = N.T @ H_w @ N
    B = N.T @ M_w @ N
    lam, U = scipy.linalg.eigh((A + A.T) / 2, (B + B.T) / 2)
    return lam[:m], N @ U[:, :m]


def random_rotation(rng) -> np.ndarray:
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def union_find_components(labels, tets):
    """Per-label face-connected components via union-find (oracle)."""
    t = len(tets)
    parent = list(range(t))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    faces = {}
    for idx, tet in enumerate(tets):
        for f in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
            key = tuple(sorted(int(tet[k]) for k in f))
            other = faces.get(key)
            if other is not None and labels[other] == labels[idx]:
                union(other, idx)
            faces[key] = idx

    roots = [find(i) for i in range(t)]
    remap = {}
    out = np.empty(t, dtype=np.int64)
    for i, root in enumerate(roots):
        if root not in remap:
            remap[root] = len(remap)
        out[i] = remap[root]
    return out
