"""Batch entry points: precompute caches, run animations, dump modes, serve.

Every command echoes its flags into a run-manifest JSON next to its
outputs, and all commands are deterministic given (inputs, seed).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import cache as cache_io
from .estimator import ComplementaryDynamics
from .mesh import (MaterialField, MeshError, TetMesh, load_tet_mesh,
                   save_tet_mesh, write_obj)
from .rig import LinearRig, load_animation
from .solver import (FullSpaceReference, FullState, complementarity_residual,
                     project_full)


def _write_manifest(out_dir: Path, args: argparse.Namespace):
    payload = {k: (str(v) if isinstance(v, Path) else v)
               for k, v in vars(args).items() if k != "func"}
    with open(out_dir / "run-manifest.json", "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)


def _load_inputs(args) -> tuple:
    mesh = load_tet_mesh(args.mesh)
    if args.material:
        mat = MaterialField.from_json(args.material, mesh.t)
    else:
        mat = MaterialField.homogeneous(mesh.t)
    if args.rig:
        rig = LinearRig.from_json(args.rig, mesh.n)
    else:
        rig = LinearRig.null(mesh.n)
    return mesh, mat, rig


def cmd_precompute(args) -> int:
    mesh, mat, rig = _load_inputs(args)
    leak = None
    if args.leak_field:
        with open(args.leak_field) as f:
            leak = np.asarray(json.load(f), dtype=np.float64)

    t0 = time.perf_counter()
    pre = cache_io.precompute_and_save(
        args.out, mesh, mat, rig, args.modes, args.clusters, args.seed,
        subspace_energy=args.subspace_energy, leak_field=leak)
    elapsed = time.perf_counter() - t0

    out = Path(args.out)
    manifest = {k: (str(v) if isinstance(v, Path) else v)
                for k, v in vars(args).items() if k != "func"}
    with open(out.with_suffix(out.suffix + ".manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)

    lam = pre.subspace.eigenvalues
    print(f"precompute: n={mesh.n} t={mesh.t} modes={pre.subspace.m} "
          f"r_eff={pre.clustering.r_eff} constraint_rows="
          f"{pre.constraint_rank} ({elapsed:.2f}s)")
    print("eigenvalues:", " ".join(f"{v:.6e}" for v in lam))
    print(f"constraint residual  max|cJ^T B| (scaled): "
          f"{pre.constraint_residual():.3e}")
    print(f"weight constraint    max|J_w W| (scaled): "
          f"{pre.weight_constraint_residual():.3e}")
    return 0


def _engine_from_cache(args) -> tuple[ComplementaryDynamics, cache_io.CacheData]:
    data = cache_io.load_cache(args.cache)
    pre = cache_io.restore_precompute(data)
    eng = ComplementaryDynamics.from_precompute(
        pre, n_modes=pre.subspace.m, n_clusters=pre.clustering.r_eff,
        energy=args.energy, h=args.h, seed=data.seed,
        subspace_energy=data.subspace_energy,
        tol=getattr(args, "tol", 1e-6),
        max_iters=getattr(args, "max_iters", 30))
    return eng, data


def cmd_simulate(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    eng, _ = _engine_from_cache(args)
    pre = eng.precompute_
    dt, frames = load_animation(args.anim)
    if frames.shape[1] != pre.rig.p_dim:
        raise SystemExit(f"animation frames carry {frames.shape[1]} rig "
                         f"parameters, rig expects {pre.rig.p_dim}")
    _write_manifest(out_dir, args)

    oracle = None
    full_state = None
    if args.oracle:
        oracle = FullSpaceReference(pre.mesh, pre.ops, pre.material,
                                    pre.cdata, eng.config_)
        full_state = FullState.rest(pre.mesh.n, pre.rig.p_dim)

    k = eng.reduced_.k
    Z = np.zeros((frames.shape[0], k))
    diag_rows = []
    max_oracle_err = 0.0
    for i, p in enumerate(frames):
        z, info = eng.step(p, track_energy=True)
        Z[i] = z
        row = {"frame": i, "iterations": info.iterations,
               "converged": int(info.converged),
               "energy": info.energy_trace[-1],
               "complementarity": complementarity_residual(eng.reduced_, z)}
        if oracle is not None:
            oracle.step(full_state, p)
            u_red = pre.subspace.B @ z
            denom = max(np.linalg.norm(full_state.u), 1e-30)
            err = float(np.linalg.norm(u_red - full_state.u) / denom)
            row["oracle_rel_l2"] = err
            max_oracle_err = max(max_oracle_err, err)
        diag_rows.append(row)

        if args.obj:
            pos = eng.positions()
            write_obj(out_dir / f"frame_{i:05d}.obj", pos,
                      pre.mesh.surface_tris)
        if args.dump_tet:
            pos = eng.positions()
            save_tet_mesh(out_dir / f"frame_{i:05d}.tet",
                          TetMesh(pos, pre.mesh.tets))

    np.savetxt(out_dir / "z.csv", Z, delimiter=",")
    Z.astype("<f8").tofile(out_dir / "z.bin")
    with open(out_dir / "diagnostics.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(diag_rows[0].keys()))
        writer.writeheader()
        writer.writerows(diag_rows)

    print(f"simulate: {frames.shape[0]} frames -> {out_dir}")
    if oracle is not None:
        print(f"oracle max rel L2: {max_oracle_err:.3e}")
    return 0


def cmd_modes(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    eng, _ = _engine_from_cache(args)
    pre = eng.precompute_
    _write_manifest(out_dir, args)

    if args.weights:
        np.savetxt(out_dir / "weights.csv", pre.subspace.W, delimiter=",")
    if args.labels:
        np.savetxt(out_dir / "labels.csv",
                   pre.clustering.labels[:, None], fmt="%d")

    B = pre.subspace.B
    mesh = pre.mesh
    target = args.amplitude * mesh.bbox_diag
    for b in range(pre.subspace.m):
        for param in range(12):
            col = 12 * b + param
            disp = B[:, col]
            peak = np.abs(disp.reshape(3, mesh.n)).sum(axis=0).max()
            scale = target / peak if peak > 0 else 0.0
            z = np.zeros(B.shape[1])
            z[col] = scale
            pos = project_full(z, np.zeros(pre.rig.p_dim), pre.subspace,
                               pre.cdata.J, mesh)
            write_obj(out_dir / f"mode_{b:03d}_param_{param:02d}.obj",
                      pos, mesh.surface_tris)
    print(f"modes: wrote {pre.subspace.m * 12} OBJ files -> {out_dir}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve_session  # deferred: pulls in fastapi/uvicorn
    serve_session(args.cache, h=args.h, energy=args.energy, port=args.port,
                  lockstep=args.lockstep)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdskin",
        description="Reduced-order complementary dynamics via skinning "
                    "eigenmode subspaces")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("precompute", help="build a subspace + cluster cache")
    p.add_argument("--mesh", required=True)
    p.add_argument("--material", default=None,
                   help="JSON {mu, lambda, density}; default homogeneous")
    p.add_argument("--rig", default=None,
                   help="JSON {kind, weights?}; default null rig")
    p.add_argument("--modes", type=int, required=True)
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="cache path (.cdsk)")
    p.add_argument("--subspace-energy", choices=("arap", "corot"),
                   default="arap", dest="subspace_energy")
    p.add_argument("--leak-field", default=None, dest="leak_field",
                   help="JSON array of n per-vertex leak values")
    p.set_defaults(func=cmd_precompute)

    p = sub.add_parser("simulate", help="run an animation offline")
    p.add_argument("--cache", required=True)
    p.add_argument("--anim", required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--energy", choices=("arap", "corot"), default="arap")
    p.add_argument("--out", required=True)
    p.add_argument("--oracle", action="store_true",
                   help="also run the full-space reference (small meshes)")
    p.add_argument("--tol", type=float, default=1e-6,
                   help="convergence threshold on |dz|_inf / bbox diagonal")
    p.add_argument("--max-iters", type=int, default=30, dest="max_iters")
    p.add_argument("--obj", action="store_true",
                   help="write per-frame surface OBJs")
    p.add_argument("--dump-tet", action="store_true", dest="dump_tet",
                   help="write per-frame full tet meshes")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("modes", help="export per-mode flexing meshes")
    p.add_argument("--cache", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--h", type=float, default=1.0 / 60.0)
    p.add_argument("--energy", choices=("arap", "corot"), default="arap")
    p.add_argument("--amplitude", type=float, default=0.1,
                   help="peak displacement as a fraction of the bbox diagonal")
    p.add_argument("--weights", action="store_true",
                   help="also export per-vertex mode weights (weights.csv)")
    p.add_argument("--labels", action="store_true",
                   help="also export per-tet cluster labels (labels.csv)")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("serve", help="run the live session service")
    p.add_argument("--cache", required=True)
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--h", type=float, default=1.0 / 60.0)
    p.add_argument("--energy", choices=("arap", "corot"), default="arap")
    p.add_argument("--lockstep", action="store_true",
                   help="step only on received rig updates (replay mode)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, MeshError, cache_io.CacheError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
