"""Acceptance criteria, one test per criterion at its stated tolerance.

Each test prints a [PASS]/[FAIL] line (visible with `pytest -s`); the
assertions carry the same tolerances, so the pytest verdicts double as
the acceptance report.
"""

import time

import numpy as np
import pytest

from meshgen import (bar_mesh, delaunay_mesh, hat_rig,
                     rotation_displacement_params, tapered_bar_mesh)
from oracles import (cotan_laplacian, dense_constrained_eigs, fd_gradient,
                     random_rotation, translation_only_covariance)
from setups import make_setup

from cdskin import (FullSpaceReference, FullState, LinearRig, MaterialField,
                    SimState, assemble_operators, displacement_modes,
                    lbs_jacobian, rep_apply, rotate_reduced_coords,
                    run_precompute, simulation_step, weight_space_constraint,
                    weight_space_hessian)
from cdskin.solver import assemble_force, cluster_deformation, local_step
from cdskin.solver import polar_rotations, reduced_energy


def _report(name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# -------------------------------------------------------------------------
def test_c01_constraint_satisfaction():
    """500-2000 vertex mesh, 3-bone LBS rig: constraint residuals < 1e-8."""
    mesh = bar_mesh(16, 5, 5)           # n = 612 vertices, t = 2400 tets
    assert 500 <= mesh.n <= 2000
    rig = hat_rig(mesh, 3)
    t0 = time.perf_counter()
    pre = run_precompute(mesh, MaterialField.homogeneous(mesh.t), rig,
                         n_modes=8, n_clusters=20, seed=0)
    elapsed = time.perf_counter() - t0

    r1 = pre.constraint_residual()           # max|cJ^T B|, scaled
    r2 = pre.weight_constraint_residual()    # max|J_w W|, scaled
    J_w = weight_space_constraint(pre.cdata.cJ, mesh)
    r2_abs = np.abs(J_w @ pre.subspace.W).max()
    ok = r1 < 1e-8 and r2 < 1e-8 and r2_abs < 1e-8 and elapsed < 60.0
    _report("C01 constraint satisfaction", ok,
            f"max|cJ^T B|={r1:.2e} max|J_w W|={r2:.2e} "
            f"(abs {r2_abs:.2e}), precompute {elapsed:.1f}s")


# -------------------------------------------------------------------------
def test_c02_gevp_matches_dense_oracle():
    """<=50 vertex mesh: constrained eigenpairs vs brute-force pencil."""
    mesh = delaunay_mesh(40, seed=21)
    assert mesh.n <= 50
    mat = MaterialField.homogeneous(mesh.t, mu=1.8)
    ops = assemble_operators(mesh, mat)
    from cdskin import complementarity_matrix, momentum_leak_field
    rig = LinearRig.affine_handle(mesh.n)
    cd = complementarity_matrix(rig, mesh, ops,
                                momentum_leak_field(mesh, ops))
    H_w = weight_space_hessian(ops.H)
    J_w = weight_space_constraint(cd.cJ, mesh)
    m = min(6, mesh.n - J_w.shape[0])
    from cdskin import solve_constrained_gevp
    W, lam = solve_constrained_gevp(H_w, ops.M_w, J_w, m)
    lam_ref, _ = dense_constrained_eigs(H_w.toarray(), ops.M_w.toarray(),
                                        J_w, m)
    rel = np.abs(lam - lam_ref) / np.maximum(np.abs(lam_ref), 1e-30)
    ok = rel.max() < 1e-8
    _report("C02 GEVP dense oracle", ok,
            f"max eigenvalue rel err {rel.max():.2e} over {m} modes")


# -------------------------------------------------------------------------
def test_c03_closure_under_rotations():
    """100 random (R, z): constructive preimage residual < 1e-12."""
    mesh = bar_mesh(4, 2, 2)
    pre, _, red = make_setup(mesh, rig=hat_rig(mesh, 2), m=4, r=6)
    B = pre.subspace.B
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        R = random_rotation(rng)
        z = rng.standard_normal(red.k)
        w = rotate_reduced_coords(R, z)
        lhs = rep_apply(R, B @ z)
        resid = np.linalg.norm(lhs - B @ w) / np.linalg.norm(lhs)
        worst = max(worst, resid)
    ok = worst < 1e-12
    _report("C03 closure under rotations", ok, f"worst residual {worst:.2e}")


# -------------------------------------------------------------------------
def test_c04_rotation_spanning_controls():
    """Constant skinning mode spans rotations; displacement modes do not."""
    mesh = tapered_bar_mesh(6, 2, 2)
    x0 = mesh.positions_flat()
    rng = np.random.default_rng(4)

    Bc = lbs_jacobian(np.ones((mesh.n, 1)), mesh)
    worst_pos = 0.0
    for _ in range(10):
        R = random_rotation(rng)
        target = rep_apply(R, x0) - x0
        coef, *_ = np.linalg.lstsq(Bc, target, rcond=None)
        worst_pos = max(worst_pos, np.linalg.norm(Bc @ coef - target)
                        / np.linalg.norm(target))

    ops = assemble_operators(mesh, MaterialField.homogeneous(mesh.t))
    V, _ = displacement_modes(ops.H, ops.M, 15)
    R = random_rotation(rng)
    target = rep_apply(R, x0) - x0
    coef, *_ = np.linalg.lstsq(V, target, rcond=None)
    neg = np.linalg.norm(V @ coef - target) / np.linalg.norm(target)

    ok = worst_pos < 1e-10 and neg > 0.1
    _report("C04 rotation spanning controls", ok,
            f"skinning fit {worst_pos:.2e} (<1e-10), "
            f"displacement-mode fit {neg:.3f} (>0.1)")


# -------------------------------------------------------------------------
def test_c05_end_to_end_equivariance():
    """20-frame rotating-rig trajectory vs its globally rotated copy."""
    mesh = bar_mesh(4, 2, 2)
    rig = hat_rig(mesh, 2)
    pre, config, red = make_setup(mesh, rig=rig, m=3, r=4, h=0.02,
                                  tol=0.0, max_iters=8)
    R = random_rotation(np.random.default_rng(17))

    def rotate_p(p):
        out = np.empty_like(p)
        for b in range(rig.bones):
            T = p[12 * b:12 * (b + 1)].reshape(3, 4)
            out[12 * b:12 * (b + 1)] = np.hstack(
                [R @ (T[:, :3] + np.eye(3)) - np.eye(3),
                 R @ T[:, 3:]]).ravel()
        return out

    state_a, state_b = SimState.rest(red), SimState.rest(red)
    p_rot_rest = rotate_p(np.zeros(red.p_dim))
    state_b.p = p_rot_rest.copy()
    state_b.p_prev = p_rot_rest.copy()
    B = pre.subspace.B
    err_sq = ref_sq = 0.0
    for k in range(20):
        angle = 0.5 * np.sin(0.6 * k)
        c, s = np.cos(angle), np.sin(angle)
        Rk = np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
        p = rotation_displacement_params(Rk, t=[0.05 * k, 0, 0], bones=2)
        ia = simulation_step(state_a, p, red, config)
        ib = simulation_step(state_b, rotate_p(p), red, config)
        assert ia.iterations == ib.iterations  # pinned iteration counts
        ua, ub = B @ state_a.z, B @ state_b.z
        err_sq += np.sum((rep_apply(R, ua) - ub) ** 2)
        ref_sq += np.sum(ua ** 2)
    rel = float(np.sqrt(err_sq / ref_sq))
    ok = rel < 1e-6
    _report("C05 end-to-end equivariance", ok,
            f"trajectory rel L2 {rel:.2e} over 20 frames")


# -------------------------------------------------------------------------
@pytest.mark.parametrize("energy", ["arap", "corot"])
def test_c06_gradient_fidelity(energy):
    """Local/global outputs vs FD of reduced_energy at 20 random states."""
    mesh = bar_mesh(3, 2, 1)
    mat = MaterialField.homogeneous(mesh.t, mu=1.5,
                                    lam=0.8 if energy == "corot" else 0.0)
    pre, config, red = make_setup(mesh, rig=LinearRig.affine_handle(mesh.n),
                                  mat=mat, m=3, r=4, h=0.02, energy=energy)
    rng = np.random.default_rng(6)
    scale = 0.05 * red.bbox_diag
    worst_local = worst_global = 0.0
    for _ in range(20):
        z = rng.standard_normal(red.k) * scale
        p = rng.standard_normal(red.p_dim) * scale
        z_hist = rng.standard_normal(red.k) * scale
        p_hist = rng.standard_normal(red.p_dim) * scale
        f_ext = rng.standard_normal(red.k) * scale

        def phi(ft):
            F = ft.reshape(-1, 3, 3)
            Rm = polar_rotations(F)
            tr = np.einsum("cab,cab->c", Rm, F)
            e = np.sum(red.cluster_mass * red.cluster_mu * (1.5 - tr))
            if red.energy == "corot":
                e += 0.5 * np.sum(red.cluster_mass * red.cluster_lambda
                                  * (tr - 3.0) ** 2)
            return e

        ft = cluster_deformation(z, p, red)
        dPhi = local_step(z, p, red)
        fd_local = fd_gradient(phi, ft, eps=1e-6)
        worst_local = max(worst_local,
                          np.abs(dPhi - fd_local).max()
                          / max(np.abs(fd_local).max(), 1e-30))

        f = assemble_force(p, z_hist, p_hist, f_ext, dPhi, red, config)
        analytic = red.A_sys @ z + f
        fd_global = fd_gradient(
            lambda zz: reduced_energy(zz, p, z_hist, p_hist, f_ext, red,
                                      config), z, eps=1e-6 * red.bbox_diag)
        worst_global = max(worst_global,
                           np.abs(analytic - fd_global).max()
                           / max(np.abs(fd_global).max(), 1e-30))
    ok = worst_local < 1e-5 and worst_global < 1e-5
    _report(f"C06 gradient fidelity ({energy})", ok,
            f"local rel err {worst_local:.2e}, "
            f"global rel err {worst_global:.2e} at 20 states")


# -------------------------------------------------------------------------
def test_c07_arap_monotonicity():
    """Energy non-increasing across every iteration in a 100-step run."""
    mesh = bar_mesh(3, 2, 1)
    pre, config, red = make_setup(mesh, rig=hat_rig(mesh, 2), m=3, r=4,
                                  h=0.02)
    state = SimState.rest(red)
    rng = np.random.default_rng(11)
    p = np.zeros(red.p_dim)
    violations = 0
    checked = 0
    for _ in range(100):
        p = p + rng.standard_normal(red.p_dim) * 0.03
        info = simulation_step(state, p, red, config, track_energy=True)
        trace = np.array(info.energy_trace)
        slack = 1e-12 * np.maximum(1.0, np.abs(trace[:-1]))
        violations += int((np.diff(trace) > slack).sum())
        checked += trace.size - 1
    ok = violations == 0
    _report("C07 ARAP monotonicity", ok,
            f"{violations} violations over {checked} iterations "
            "(1e-12 slack)")


# -------------------------------------------------------------------------
def test_c08_oracle_equivalence():
    """m = n, r = t, ARAP on a tiny mesh: matches the full-space oracle."""
    mesh = bar_mesh(3, 2, 1)  # n = 24 vertices <= 100
    assert mesh.n <= 100
    mat = MaterialField.homogeneous(mesh.t, mu=2.0)
    pre, config, red = make_setup(mesh, mat=mat, m=mesh.n, r=mesh.t,
                                  h=0.05, tol=0.0, max_iters=6)
    full = FullSpaceReference(mesh, pre.ops, mat, pre.cdata, config)
    state_r = SimState.rest(red)
    state_f = FullState.rest(mesh.n, 0)
    B = pre.subspace.B
    rng = np.random.default_rng(2)
    f_full = 0.5 * rng.standard_normal(3 * mesh.n)
    state_r.f_ext = B.T @ f_full
    worst = 0.0
    p_empty = np.zeros(0)
    for _ in range(20):
        simulation_step(state_r, p_empty, red, config)
        full.step(state_f, p_empty, f_ext=f_full)
        err = np.linalg.norm(B @ state_r.z - state_f.u) \
            / max(np.linalg.norm(state_f.u), 1e-30)
        worst = max(worst, err)
    ok = worst < 1e-6
    _report("C08 oracle equivalence", ok,
            f"worst per-step rel err {worst:.2e} over 20 steps")


# -------------------------------------------------------------------------
def test_c09_hw_cotan_proportionality():
    """Homogeneous ARAP H_w fits the cotan Laplacian to < 1e-8."""
    mesh = delaunay_mesh(30, seed=13)
    ops = assemble_operators(mesh, MaterialField.homogeneous(mesh.t, mu=2.5))
    Hw = weight_space_hessian(ops.H).toarray()
    C = cotan_laplacian(mesh.vertices, mesh.tets)
    scale = np.sum(Hw * C) / np.sum(C * C)
    resid = np.linalg.norm(Hw - scale * C) / np.linalg.norm(Hw)
    ok = resid < 1e-8
    _report("C09 H_w cotan proportionality", ok,
            f"best-scalar-fit Frobenius residual {resid:.2e}")


# -------------------------------------------------------------------------
def test_c10_resolution_decoupling():
    """Per-step time ratio (50k vs 1k tets) < 3x with m, r fixed."""
    times = {}
    for label, (npts, seed) in {"1k": (185, 1), "10k": (1550, 2),
                                "50k": (7600, 3)}.items():
        mesh = delaunay_mesh(npts, seed=seed)
        pre, config, red = make_setup(mesh, m=6, r=12, h=0.02)
        state = SimState.rest(red)
        rng = np.random.default_rng(0)
        state.f_ext = rng.standard_normal(red.k) * 0.01
        p_empty = np.zeros(0)
        for _ in range(3):  # warmup
            simulation_step(state, p_empty, red, config)
        samples = []
        for _ in range(30):
            t0 = time.perf_counter()
            simulation_step(state, p_empty, red, config)
            samples.append(time.perf_counter() - t0)
        times[label] = (np.median(samples), mesh.t)
    ratio = times["50k"][0] / times["1k"][0]
    ok = ratio < 3.0
    _report("C10 resolution decoupling", ok,
            "per-step median: "
            + ", ".join(f"{k}={v[0] * 1e3:.2f}ms (t={v[1]})"
                        for k, v in times.items())
            + f"; 50k/1k ratio {ratio:.2f} (<3)")


# -------------------------------------------------------------------------
def test_c11_determinism(tmp_path):
    """Bit-identical caches and z traces across identical runs."""
    import json

    from cdskin import save_animation, save_tet_mesh
    from cdskin.cli import main

    mesh = bar_mesh(3, 2, 2)
    rig = hat_rig(mesh, 3)
    mesh_path = tmp_path / "m.tet"
    save_tet_mesh(mesh_path, mesh)
    rig_path = tmp_path / "r.json"
    rig_path.write_text(json.dumps({"kind": rig.kind,
                                    "weights": rig.weights.tolist()}))
    rng = np.random.default_rng(1)
    frames = np.cumsum(rng.standard_normal((10, rig.p_dim)) * 0.01, axis=0)
    anim = tmp_path / "a.json"
    save_animation(anim, 0.02, frames)

    blobs = []
    for tag in ("one", "two"):
        cache = tmp_path / f"{tag}.cdsk"
        out = tmp_path / tag
        assert main(["precompute", "--mesh", str(mesh_path), "--rig",
                     str(rig_path), "--modes", "4", "--clusters", "5",
                     "--seed", "3", "--out", str(cache)]) == 0
        assert main(["simulate", "--cache", str(cache), "--anim", str(anim),
                     "--h", "0.02", "--out", str(out)]) == 0
        blobs.append((cache.read_bytes(), (out / "z.bin").read_bytes()))
    ok = blobs[0][0] == blobs[1][0] and blobs[0][1] == blobs[1][1]
    _report("C11 determinism", ok,
            f"cache bytes equal={blobs[0][0] == blobs[1][0]}, "
            f"z traces equal={blobs[0][1] == blobs[1][1]}")
