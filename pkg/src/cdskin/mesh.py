"""Tetrahedral meshes, file I/O and full-space sparse operator assembly.

Degree-of-freedom convention used across the whole package: vertex
displacements/positions are flattened axis-major, ``u = [u_x(0..n-1),
u_y(0..n-1), u_z(0..n-1)]``, so the per-axis selector P_a is the
contiguous row range ``[a*n, (a+1)*n)``.

Deformation gradients are flattened tet-major and row-major within each
3x3 matrix: entry ``(a, b)`` of tet ``t`` sits at row ``9*t + 3*a + b`` of
the gradient operator K.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

DEGENERATE_REL_VOLUME = 1e-12


class MeshError(Exception):
    """Base error for mesh loading and validation."""


class MeshParseError(MeshError):
    """Malformed mesh file; message carries path and line number."""


class DegenerateTetError(MeshError):
    """Tets with (near-)zero volume; offending indices in ``tet_indices``."""

    def __init__(self, tet_indices):
        self.tet_indices = list(tet_indices)
        super().__init__(
            f"degenerate tets (|volume| < {DEGENERATE_REL_VOLUME} * bbox_diag^3): "
            f"{self.tet_indices}"
        )


@dataclass
class TetMesh:
    """Rest geometry: vertices (n,3), tets (t,4), derived boundary triangles.

    Tets are canonically oriented (positive signed volume); construction
    rejects degenerate tets outright rather than regularizing them.
    """

    vertices: np.ndarray
    tets: np.ndarray
    surface_tris: np.ndarray = field(init=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.tets = np.ascontiguousarray(self.tets, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError(f"vertices must be (n, 3), got {self.vertices.shape}")
        if self.tets.ndim != 2 or self.tets.shape[1] != 4:
            raise MeshError(f"tets must be (t, 4), got {self.tets.shape}")
        if not np.isfinite(self.vertices).all():
            raise MeshError("non-finite vertex coordinates")
        if self.tets.min(initial=0) < 0 or self.tets.max(initial=-1) >= self.n:
            raise MeshError("tet index out of range")

        # Orientation fix: swap two indices where the signed volume is negative.
        vols = _signed_volumes(self.vertices, self.tets)
        flip = vols < 0
        if flip.any():
            self.tets[flip] = self.tets[flip][:, [0, 1, 3, 2]]
            vols = np.abs(vols)

        bad = np.nonzero(vols < DEGENERATE_REL_VOLUME * self.bbox_diag**3)[0]
        if bad.size:
            raise DegenerateTetError(bad)

        self.surface_tris = _surface_triangles(self.tets)

    @property
    def n(self) -> int:
        return self.vertices.shape[0]

    @property
    def t(self) -> int:
        return self.tets.shape[0]

    @property
    def bbox_diag(self) -> float:
        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.linalg.norm(span))

    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted pairs, shape (e, 2)."""
        pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        e = np.concatenate([self.tets[:, p] for p in pairs])
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)

    def mean_edge_length(self) -> float:
        e = self.edges()
        d = self.vertices[e[:, 0]] - self.vertices[e[:, 1]]
        return float(np.linalg.norm(d, axis=1).mean())

    def positions_flat(self) -> np.ndarray:
        """Rest positions in the package's axis-major flattening (3n,)."""
        return self.vertices.ravel(order="F").copy()


@dataclass
class MaterialField:
    """Per-tet Lame parameters and density.

    ``lam`` is the second Lame parameter (JSON key "lambda"); ``lam = 0``
    reduces corotational elasticity to ARAP.
    """

    mu: np.ndarray
    lam: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        self.mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        self.lam = np.atleast_1d(np.asarray(self.lam, dtype=np.float64))
        self.density = np.atleast_1d(np.asarray(self.density, dtype=np.float64))
        if not (self.mu > 0).all():
            raise ValueError("mu must be positive per tet")
        if not (self.lam >= 0).all():
            raise ValueError("lambda must be nonnegative per tet")
        if not (self.density > 0).all():
            raise ValueError("density must be positive per tet")

    @classmethod
    def homogeneous(cls, t: int, mu: float = 1.0, lam: float = 0.0,
                    density: float = 1.0) -> "MaterialField":
        return cls(np.full(t, mu), np.full(t, lam), np.full(t, density))

    @classmethod
    def from_json(cls, path, t: int) -> "MaterialField":
        """Load a {mu, lambda, density} sidecar; scalars broadcast to t tets."""
        with open(path) as f:
            data = json.load(f)

        def expand(key, default=None):
            if key not in data:
                if default is None:
                    raise ValueError(f"material file missing '{key}'")
                return np.full(t, default)
            v = np.asarray(data[key], dtype=np.float64)
            if v.ndim == 0:
                return np.full(t, float(v))
            if v.shape != (t,):
                raise ValueError(
                    f"material '{key}' has length {v.shape[0]}, expected {t}")
            return v

        return cls(expand("mu"), expand("lambda"), expand("density"))

    def resize_check(self, t: int):
        for name, arr in (("mu", self.mu), ("lambda", self.lam),
                          ("density", self.density)):
            if arr.shape != (t,):
                raise ValueError(f"material '{name}' sized {arr.shape}, "
                                 f"expected ({t},)")


@dataclass
class FullSpaceOperators:
    """All full-space sparse operators assembled from a mesh + material.

    M : (3n, 3n) diagonal vector mass matrix (quarter-volume lumping).
    M_w : (n, n) diagonal weight-space mass matrix.
    K : (9t, 3n) deformation-gradient operator; K @ x0_flat = stacked identity.
    Vol : (9t, 9t) diagonal tet volumes (each volume repeated 9 times).
    U : (9t, 9t) diagonal first Lame parameter (repeated 9 times).
    L : (3n, 3n) heterogeneous Laplacian K^T U Vol K (mu-weighted, PSD).
    H : (3n, 3n) rest-state elastic Hessian for the configured energy.
    """

    M: sp.spmatrix
    M_w: sp.spmatrix
    K: sp.spmatrix
    Vol: sp.spmatrix
    U: sp.spmatrix
    L: sp.spmatrix
    H: sp.spmatrix
    volumes: np.ndarray
    lumped_mass: np.ndarray
    mu_per_tet: np.ndarray
    lam_per_tet: np.ndarray
    energy: str


def tet_volumes(mesh: TetMesh) -> np.ndarray:
    """Per-tet positive volumes; sum equals total mesh volume."""
    return np.abs(_signed_volumes(mesh.vertices, mesh.tets))


def _signed_volumes(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    d = vertices[tets[:, 1:]] - vertices[tets[:, :1]]
    return np.linalg.det(d) / 6.0


def _surface_triangles(tets: np.ndarray) -> np.ndarray:
    """Boundary faces (incident to exactly one tet), outward-oriented."""
    # Faces listed so the stored winding has an outward normal for a
    # positively oriented tet (opposite vertex behind the face).
    local = [(1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1)]
    faces = np.concatenate([tets[:, f] for f in local])
    key = np.sort(faces, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True,
                               return_counts=True)
    boundary = counts[inv] == 1
    return faces[boundary]


def deformation_gradient_operator(mesh: TetMesh) -> sp.csr_matrix:
    """Sparse K (9t, 3n): maps axis-major positions to per-tet F, row-major."""
    n, t = mesh.n, mesh.t
    verts, tets = mesh.vertices, mesh.tets
    dm = np.stack([verts[tets[:, k]] - verts[tets[:, 0]] for k in (1, 2, 3)],
                  axis=2)  # (t, 3, 3), column k is edge vector k
    bm = np.linalg.inv(dm)  # (t, 3, 3); F = Ds @ bm

    # F[a, b] = sum_k Ds[a, k] * bm[k, b]; Ds[a, k] = x^a_{i_k} - x^a_{i_0}.
    rows = np.empty((t, 3, 3, 4), dtype=np.int64)
    cols = np.empty((t, 3, 3, 4), dtype=np.int64)
    vals = np.empty((t, 3, 3, 4), dtype=np.float64)
    tet_base = 9 * np.arange(t)
    for a in range(3):
        for b in range(3):
            r = tet_base + 3 * a + b
            rows[:, a, b, :] = r[:, None]
            cols[:, a, b, 0] = a * n + tets[:, 0]
            vals[:, a, b, 0] = -bm[:, :, b].sum(axis=1)
            for k in range(3):
                cols[:, a, b, k + 1] = a * n + tets[:, k + 1]
                vals[:, a, b, k + 1] = bm[:, k, b]
    K = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())),
                      shape=(9 * t, 3 * n))
    return K.tocsr()


# Gram matrix of the symmetrized gradient: eps:eps = g^T SYM9 g for a
# row-major flattened 3x3 displacement gradient g.
_SYM9 = np.zeros((9, 9))
for _a in range(3):
    for _b in range(3):
        _SYM9[3 * _a + _b, 3 * _a + _b] += 0.5
        _SYM9[3 * _a + _b, 3 * _b + _a] += 0.5
_VEC_I9 = np.eye(3).ravel()


def assemble_operators(mesh: TetMesh, mat: MaterialField,
                       energy: str = "arap") -> FullSpaceOperators:
    """Assemble mass, gradient, Laplacian and rest-Hessian operators.

    The rest Hessian depends on the configured energy:
      * ``arap``: H = 2 L, the Hessian of the quadratic local-global term
        (the per-tet rotations equal the identity at rest).
      * ``corot``: exact linearization of the corotational energy density
        (mu/2)|F - R|^2 + (lambda/2) tr^2(R^T F - I) at F = I, i.e. the
        linear-elasticity stiffness with per-tet mu, lambda.
    """
    if energy not in ("arap", "corot"):
        raise ValueError(f"unknown energy '{energy}'")
    mat.resize_check(mesh.t)

    n, t = mesh.n, mesh.t
    vols = tet_volumes(mesh)

    # Quarter-volume mass lumping per incident tet.
    mw = np.zeros(n)
    np.add.at(mw, mesh.tets.ravel(),
              np.repeat(mat.density * vols / 4.0, 4))
    M_w = sp.diags(mw, format="csr")
    M = sp.diags(np.tile(mw, 3), format="csr")

    K = deformation_gradient_operator(mesh)
    Vol = sp.diags(np.repeat(vols, 9), format="csr")
    U = sp.diags(np.repeat(mat.mu, 9), format="csr")

    L = (K.T @ (U @ Vol) @ K).tocsr()
    L = ((L + L.T) * 0.5).tocsr()

    if energy == "arap":
        H = (2.0 * L).tocsr()
    else:
        D = sp.kron(sp.diags(mat.mu * vols), sp.csr_matrix(_SYM9)) \
            + sp.kron(sp.diags(mat.lam * vols),
                      sp.csr_matrix(np.outer(_VEC_I9, _VEC_I9)))
        H = (K.T @ D @ K).tocsr()
        H = ((H + H.T) * 0.5).tocsr()

    return FullSpaceOperators(M=M, M_w=M_w, K=K, Vol=Vol, U=U, L=L, H=H,
                              volumes=vols, lumped_mass=mw,
                              mu_per_tet=mat.mu.copy(),
                              lam_per_tet=mat.lam.copy(), energy=energy)


def load_tet_mesh(path) -> TetMesh:
    """Load a tet mesh from a plain ASCII ``.tet`` file or Gmsh MSH v2.2."""
    path = Path(path)
    if not path.exists():
        raise MeshError(f"mesh file not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".tet":
        return _load_tet_ascii(path)
    if suffix == ".msh":
        return _load_gmsh22(path)
    raise MeshError(f"unsupported mesh format '{suffix}' (use .tet or .msh)")


def _load_tet_ascii(path: Path) -> TetMesh:
    lines = path.read_text().splitlines()

    def fail(lineno, msg):
        raise MeshParseError(f"{path}:{lineno}: {msg}")

    if not lines:
        fail(1, "empty file")
    header = lines[0].split()
    if len(header) != 3 or header[0] != "tet":
        fail(1, "expected header 'tet <n> <t>'")
    try:
        n, t = int(header[1]), int(header[2])
    except ValueError:
        fail(1, "non-integer vertex/tet count")
    if len(lines) < 1 + n + t:
        fail(len(lines), f"expected {1 + n + t} lines, got {len(lines)}")

    verts = np.empty((n, 3))
    for i in range(n):
        tok = lines[1 + i].split()
        if len(tok) != 4 or tok[0] != "v":
            fail(2 + i, "expected 'v x y z'")
        try:
            verts[i] = [float(x) for x in tok[1:]]
        except ValueError:
            fail(2 + i, "non-numeric vertex coordinate")

    tets = np.empty((t, 4), dtype=np.int64)
    for j in range(t):
        tok = lines[1 + n + j].split()
        if len(tok) != 5 or tok[0] != "t":
            fail(2 + n + j, "expected 't i j k l'")
        try:
            tets[j] = [int(x) for x in tok[1:]]
        except ValueError:
            fail(2 + n + j, "non-integer tet index")

    return TetMesh(verts, tets)


def _load_gmsh22(path: Path) -> TetMesh:
    lines = path.read_text().splitlines()

    def fail(lineno, msg):
        raise MeshParseError(f"{path}:{lineno}: {msg}")

    i = 0
    nodes = {}
    tets = []
    while i < len(lines):
        line = lines[i].strip()
        if line == "$MeshFormat":
            tok = lines[i + 1].split()
            if not tok or not tok[0].startswith("2.2"):
                fail(i + 2, f"unsupported MSH version '{lines[i + 1].strip()}'"
                            " (need 2.2 ASCII)")
            i += 3
        elif line == "$Nodes":
            try:
                count = int(lines[i + 1])
            except ValueError:
                fail(i + 2, "bad node count")
            for k in range(count):
                tok = lines[i + 2 + k].split()
                if len(tok) != 4:
                    fail(i + 3 + k, "expected 'id x y z'")
                try:
                    nodes[int(tok[0])] = [float(x) for x in tok[1:]]
                except ValueError:
                    fail(i + 3 + k, "bad node line")
            i += 2 + count
            if i >= len(lines) or lines[i].strip() != "$EndNodes":
                fail(i + 1, "missing $EndNodes")
            i += 1
        elif line == "$Elements":
            try:
                count = int(lines[i + 1])
            except ValueError:
                fail(i + 2, "bad element count")
            for k in range(count):
                tok = lines[i + 2 + k].split()
                try:
                    etype = int(tok[1])
                    ntags = int(tok[2])
                    if etype == 4:  # 4-node tetrahedron
                        tets.append([int(x) for x in tok[3 + ntags:7 + ntags]])
                except (ValueError, IndexError):
                    fail(i + 3 + k, "bad element line")
            i += 2 + count
            if i >= len(lines) or lines[i].strip() != "$EndElements":
                fail(i + 1, "missing $EndElements")
            i += 1
        else:
            i += 1

    if not nodes:
        fail(len(lines), "no $Nodes section")
    if not tets:
        fail(len(lines), "no 4-node tet elements")

    ids = sorted(nodes)
    remap = {node_id: k for k, node_id in enumerate(ids)}
    verts = np.array([nodes[node_id] for node_id in ids])
    tet_arr = np.array([[remap[v] for v in tet] for tet in tets],
                       dtype=np.int64)
    return TetMesh(verts, tet_arr)


def save_tet_mesh(path, mesh: TetMesh):
    """Write the plain ASCII .tet format."""
    with open(path, "w") as f:
        f.write(f"tet {mesh.n} {mesh.t}\n")
        for v in mesh.vertices:
            f.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in mesh.tets:
            f.write(f"t {t[0]} {t[1]} {t[2]} {t[3]}\n")


def write_obj(path, vertices: np.ndarray, tris: np.ndarray):
    """Write a surface-only OBJ (1-based face indices)."""
    with open(path, "w") as f:
        for v in vertices:
            f.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for tri in tris:
            f.write(f"f {tri[0] + 1} {tri[1] + 1} {tri[2] + 1}\n")
