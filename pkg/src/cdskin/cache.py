"""CDSK binary cache: precomputed subspace + clustering, self-contained.

Layout (all little-endian):
  magic   4 bytes  b"CDSK"
  version u32
  meta    6 x i64: n, t, m, r_eff, bones, seed
  hash    32 bytes: SHA-256 over the canonical input sections
          (vertices, tets, mu, lambda, density, rig kind, rig weights)
  sections, each: u16 name length, ASCII name, u8 dtype (0 = f64,
          1 = i64), u8 ndim, ndim x u64 dims, raw values

Timestep- and energy-dependent matrices are rebuilt at load time, so one
cache serves any h.  W, eigenvalues and labels are stored as f64
sections; integer-valued sections (tets) use i64.
"""

from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass

import numpy as np

from .clusters import build_clustering
from .mesh import MaterialField, TetMesh, assemble_operators
from .pipeline import PrecomputeResult, run_precompute
from .rig import (RIG_KINDS, LinearRig, complementarity_matrix,
                  momentum_leak_field)
from .subspace import build_subspace, weight_space_constraint

MAGIC = b"CDSK"
VERSION = 1

_DTYPES = {0: "<f8", 1: "<i8"}
_DTYPE_CODES = {"<f8": 0, "<i8": 1}


class CacheError(Exception):
    pass


@dataclass
class CacheData:
    mesh: TetMesh
    material: MaterialField
    rig: LinearRig
    W: np.ndarray
    eigenvalues: np.ndarray
    labels: np.ndarray
    seed: int
    subspace_energy: str


def _input_hash(mesh: TetMesh, material: MaterialField,
                rig: LinearRig) -> bytes:
    h = hashlib.sha256()
    for arr in (mesh.vertices, np.asarray(mesh.tets, dtype=np.int64),
                material.mu, material.lam, material.density):
        h.update(np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<"))
                 .tobytes())
    h.update(rig.kind.encode())
    h.update(np.ascontiguousarray(rig.weights, dtype="<f8").tobytes())
    return h.digest()


def _write_section(buf, name: str, arr: np.ndarray):
    arr = np.ascontiguousarray(arr)
    code = 1 if arr.dtype.kind == "i" else 0
    arr = arr.astype(_DTYPES[code])
    nm = name.encode("ascii")
    buf.write(struct.pack("<H", len(nm)))
    buf.write(nm)
    buf.write(struct.pack("<BB", code, arr.ndim))
    for d in arr.shape:
        buf.write(struct.pack("<Q", d))
    buf.write(arr.tobytes())


def _read_section(buf) -> tuple[str, np.ndarray]:
    raw = buf.read(2)
    if len(raw) < 2:
        raise CacheError("truncated cache: missing section header")
    (nlen,) = struct.unpack("<H", raw)
    name = buf.read(nlen).decode("ascii")
    code, ndim = struct.unpack("<BB", buf.read(2))
    dims = [struct.unpack("<Q", buf.read(8))[0] for _ in range(ndim)]
    count = int(np.prod(dims)) if dims else 1
    dtype = np.dtype(_DTYPES[code])
    data = buf.read(count * dtype.itemsize)
    if len(data) != count * dtype.itemsize:
        raise CacheError(f"truncated cache: section '{name}'")
    return name, np.frombuffer(data, dtype=dtype).reshape(dims).copy()


def save_cache(path, pre: PrecomputeResult, subspace_energy: str):
    mesh, mat, rig = pre.mesh, pre.material, pre.rig
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    buf.write(struct.pack("<6q", mesh.n, mesh.t, pre.subspace.m,
                          pre.clustering.r_eff, rig.bones, pre.seed))
    buf.write(_input_hash(mesh, mat, rig))

    _write_section(buf, "vertices", mesh.vertices)
    _write_section(buf, "tets", mesh.tets)
    _write_section(buf, "mu", mat.mu)
    _write_section(buf, "lambda", mat.lam)
    _write_section(buf, "density", mat.density)
    _write_section(buf, "rig_kind",
                   np.array([RIG_KINDS.index(rig.kind)], dtype=np.int64))
    _write_section(buf, "rig_weights", rig.weights)
    _write_section(buf, "subspace_energy",
                   np.array([0 if subspace_energy == "arap" else 1],
                            dtype=np.int64))
    _write_section(buf, "W", pre.subspace.W)
    _write_section(buf, "eigenvalues", pre.subspace.eigenvalues)
    _write_section(buf, "labels",
                   pre.clustering.labels.astype(np.float64))

    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_cache(path) -> CacheData:
    with open(path, "rb") as f:
        buf = io.BytesIO(f.read())

    if buf.read(4) != MAGIC:
        raise CacheError(f"{path}: not a CDSK cache")
    (version,) = struct.unpack("<I", buf.read(4))
    if version != VERSION:
        raise CacheError(f"{path}: cache version {version} unsupported "
                         f"(expected {VERSION})")
    n, t, m, r_eff, bones, seed = struct.unpack("<6q", buf.read(48))
    stored_hash = buf.read(32)

    sections = {}
    while buf.tell() < len(buf.getbuffer()):
        name, arr = _read_section(buf)
        sections[name] = arr

    required = ["vertices", "tets", "mu", "lambda", "density", "rig_kind",
                "rig_weights", "subspace_energy", "W", "eigenvalues", "labels"]
    missing = [s for s in required if s not in sections]
    if missing:
        raise CacheError(f"{path}: missing sections {missing}")

    mesh = TetMesh(sections["vertices"], sections["tets"])
    mat = MaterialField(sections["mu"], sections["lambda"],
                        sections["density"])
    kind = RIG_KINDS[int(sections["rig_kind"][0])]
    rig = LinearRig(kind, sections["rig_weights"].reshape(n, bones))

    if _input_hash(mesh, mat, rig) != stored_hash:
        raise CacheError(f"{path}: SHA-256 mismatch between stored inputs "
                         "and hash; cache is corrupt or inconsistent")

    labels = sections["labels"].astype(np.int64)
    if int(labels.max(initial=-1)) + 1 != r_eff or labels.shape != (t,):
        raise CacheError(f"{path}: label section inconsistent with header")
    W = sections["W"].reshape(n, m)

    return CacheData(mesh=mesh, material=mat, rig=rig, W=W,
                     eigenvalues=sections["eigenvalues"], labels=labels,
                     seed=seed,
                     subspace_energy="arap"
                     if int(sections["subspace_energy"][0]) == 0 else "corot")


def restore_precompute(data: CacheData) -> PrecomputeResult:
    """Rebuild operators and grouping matrices from cached inputs + results.

    Deterministic: identical caches restore identical runtime state.
    """
    ops = assemble_operators(data.mesh, data.material,
                             energy=data.subspace_energy)
    D = momentum_leak_field(data.mesh, ops)
    cdata = complementarity_matrix(data.rig, data.mesh, ops, D)
    subspace = build_subspace(data.mesh, data.W, data.eigenvalues)
    clustering = build_clustering(data.labels, ops.volumes)
    rank = weight_space_constraint(cdata.cJ, data.mesh).shape[0]
    return PrecomputeResult(mesh=data.mesh, material=data.material,
                            rig=data.rig, ops=ops, cdata=cdata,
                            subspace=subspace, clustering=clustering,
                            seed=data.seed, constraint_rank=rank)


def precompute_and_save(path, mesh, material, rig, n_modes, n_clusters, seed,
                        subspace_energy="arap", leak_field=None
                        ) -> PrecomputeResult:
    pre = run_precompute(mesh, material, rig, n_modes, n_clusters, seed,
                         subspace_energy=subspace_energy,
                         leak_field=leak_field)
    save_cache(path, pre, subspace_energy)
    return pre
