"""Cache round-trips and the batch CLI surface."""

import json

import numpy as np
import pytest

from meshgen import bar_mesh, hat_rig

from cdskin import MaterialField, save_animation, save_tet_mesh
from cdskin.cache import (CacheError, load_cache, precompute_and_save,
                          restore_precompute)
from cdskin.cli import main


def _write_inputs(tmp_path, mesh, rig=None, mat=None):
    mesh_path = tmp_path / "mesh.tet"
    save_tet_mesh(mesh_path, mesh)
    paths = {"mesh": mesh_path}
    if rig is not None:
        rig_path = tmp_path / "rig.json"
        rig_path.write_text(json.dumps(
            {"kind": rig.kind, "weights": rig.weights.tolist()}))
        paths["rig"] = rig_path
    if mat is not None:
        mat_path = tmp_path / "mat.json"
        mat_path.write_text(json.dumps(
            {"mu": mat.mu.tolist(), "lambda": mat.lam.tolist(),
             "density": mat.density.tolist()}))
        paths["material"] = mat_path
    return paths


@pytest.fixture(scope="module")
def cached(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cache")
    mesh = bar_mesh(3, 2, 2)
    rig = hat_rig(mesh, 2)
    mat = MaterialField.homogeneous(mesh.t, mu=2.0)
    path = tmp / "bar.cdsk"
    pre = precompute_and_save(path, mesh, mat, rig, 3, 4, seed=7)
    return path, mesh, rig, pre


def test_cache_roundtrip_bit_exact(cached, tmp_path):
    path, mesh, rig, pre = cached
    data = load_cache(path)
    np.testing.assert_array_equal(data.mesh.vertices, mesh.vertices)
    np.testing.assert_array_equal(data.mesh.tets, mesh.tets)
    np.testing.assert_array_equal(data.W, pre.subspace.W)
    np.testing.assert_array_equal(data.eigenvalues, pre.subspace.eigenvalues)
    np.testing.assert_array_equal(data.labels, pre.clustering.labels)
    assert data.seed == 7

    from cdskin.cache import save_cache
    out2 = tmp_path / "again.cdsk"
    save_cache(out2, restore_precompute(data), data.subspace_energy)
    assert out2.read_bytes() == path.read_bytes()


def test_cache_version_rejected(cached, tmp_path):
    path, *_ = cached
    raw = bytearray(path.read_bytes())
    raw[4] = 99  # bump version field
    bad = tmp_path / "bad.cdsk"
    bad.write_bytes(bytes(raw))
    with pytest.raises(CacheError, match="version"):
        load_cache(bad)
    with pytest.raises(CacheError, match="not a CDSK"):
        load_cache(__file__)


def test_cache_hash_mismatch_rejected(cached, tmp_path):
    path, *_ = cached
    raw = bytearray(path.read_bytes())
    # flip a vertex coordinate inside the first (input) section; the
    # stored SHA-256 of the inputs must then refuse the cache
    offset = raw.index(b"vertices") + len("vertices") + 2 + 16 + 4
    raw[offset] ^= 0x1F
    bad = tmp_path / "tampered.cdsk"
    bad.write_bytes(bytes(raw))
    from cdskin import MeshError
    with pytest.raises((CacheError, MeshError)):
        load_cache(bad)


def test_restored_precompute_matches(cached):
    path, mesh, rig, pre = cached
    again = restore_precompute(load_cache(path))
    np.testing.assert_array_equal(again.subspace.B, pre.subspace.B)
    np.testing.assert_array_equal(again.clustering.labels,
                                  pre.clustering.labels)
    assert again.constraint_rank == pre.constraint_rank


def test_cli_precompute_deterministic(tmp_path, capsys):
    mesh = bar_mesh(3, 1, 1)
    rig = hat_rig(mesh, 2)
    paths = _write_inputs(tmp_path, mesh, rig)
    args = ["precompute", "--mesh", str(paths["mesh"]), "--rig",
            str(paths["rig"]), "--modes", "2", "--clusters", "3",
            "--seed", "5"]
    assert main(args + ["--out", str(tmp_path / "a.cdsk")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.cdsk")]) == 0
    assert (tmp_path / "a.cdsk").read_bytes() == \
        (tmp_path / "b.cdsk").read_bytes()
    out = capsys.readouterr().out
    assert "eigenvalues:" in out and "constraint residual" in out
    assert (tmp_path / "a.cdsk.manifest.json").exists()


def test_cli_precompute_m_too_large(tmp_path, capsys):
    mesh = bar_mesh(2, 1, 1)
    paths = _write_inputs(tmp_path, mesh, hat_rig(mesh, 2))
    code = main(["precompute", "--mesh", str(paths["mesh"]), "--rig",
                 str(paths["rig"]), "--modes", "50", "--clusters", "2",
                 "--out", str(tmp_path / "x.cdsk")])
    assert code == 1
    assert "m too large" in capsys.readouterr().err


def test_cli_simulate_zero_animation(tmp_path, cached):
    cache_path, mesh, rig, pre = cached
    anim = tmp_path / "anim.json"
    save_animation(anim, 0.02, np.zeros((4, rig.p_dim)))
    out = tmp_path / "run"
    code = main(["simulate", "--cache", str(cache_path), "--anim", str(anim),
                 "--h", "0.02", "--energy", "arap", "--out", str(out),
                 "--obj"])
    assert code == 0
    Z = np.loadtxt(out / "z.csv", delimiter=",")
    assert np.abs(Z).max() < 1e-12

    diag = (out / "diagnostics.csv").read_text().splitlines()
    assert diag[0].split(",") == ["frame", "iterations", "converged",
                                  "energy", "complementarity"]
    comp = [float(row.split(",")[4]) for row in diag[1:]]
    assert max(comp) < 1e-8

    # rest-pose OBJ
    verts = [list(map(float, line.split()[1:]))
             for line in (out / "frame_00000.obj").read_text().splitlines()
             if line.startswith("v ")]
    surf_ids = np.arange(mesh.n)  # OBJ keeps all vertices
    np.testing.assert_allclose(np.array(verts), mesh.vertices[surf_ids],
                               atol=1e-6)
    assert json.loads((out / "run-manifest.json").read_text())["h"] == 0.02
    assert np.fromfile(out / "z.bin").shape == (4 * pre.subspace.m * 12,)


def test_cli_simulate_with_oracle(tmp_path, capsys):
    """Full-rank subspace + per-tet clusters reproduce the full-space
    reference through the CLI --oracle path."""
    from meshgen import delaunay_mesh
    from cdskin import LinearRig

    mesh = delaunay_mesh(14, seed=9)
    rig = LinearRig.affine_handle(mesh.n)
    paths = _write_inputs(tmp_path, mesh, rig)
    cache = tmp_path / "t.cdsk"
    # m = n - rank(J_w) = 4 spans the whole constraint null space here
    assert main(["precompute", "--mesh", str(paths["mesh"]), "--rig",
                 str(paths["rig"]), "--modes", "4", "--clusters",
                 str(mesh.t), "--out", str(cache)]) == 0
    rng = np.random.default_rng(0)
    frames = np.cumsum(rng.standard_normal((5, rig.p_dim)) * 0.02, axis=0)
    anim = tmp_path / "anim.json"
    save_animation(anim, 0.02, frames)
    out = tmp_path / "run"
    assert main(["simulate", "--cache", str(cache), "--anim", str(anim),
                 "--h", "0.02", "--out", str(out), "--oracle",
                 "--tol", "0", "--max-iters", "10"]) == 0
    rows = (out / "diagnostics.csv").read_text().splitlines()
    assert rows[0].endswith("oracle_rel_l2")
    errs = [float(r.split(",")[-1]) for r in rows[1:]]
    assert max(errs) < 1e-6


def test_cli_simulate_determinism(tmp_path, cached):
    cache_path, mesh, rig, pre = cached
    rng = np.random.default_rng(3)
    frames = np.cumsum(rng.standard_normal((6, rig.p_dim)) * 0.01, axis=0)
    anim = tmp_path / "anim.json"
    save_animation(anim, 0.02, frames)
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        assert main(["simulate", "--cache", str(cache_path), "--anim",
                     str(anim), "--h", "0.02", "--out", str(out)]) == 0
        outs.append((out / "z.csv").read_bytes())
    assert outs[0] == outs[1]


def test_cli_modes(tmp_path, cached):
    cache_path, mesh, rig, pre = cached
    out = tmp_path / "modes"
    assert main(["modes", "--cache", str(cache_path), "--out",
                 str(out)]) == 0
    files = sorted(out.glob("mode_*.obj"))
    assert len(files) == pre.subspace.m * 12

    # cross-check one emitted file against the projection operator
    from cdskin import project_full
    B = pre.subspace.B
    col = 12 * 0 + 3  # first mode, x translation
    peak = np.abs(B[:, col].reshape(3, mesh.n)).sum(axis=0).max()
    scale = 0.1 * mesh.bbox_diag / peak
    z = np.zeros(B.shape[1])
    z[col] = scale
    expect = project_full(z, np.zeros(rig.p_dim), pre.subspace,
                          pre.cdata.J, mesh)
    got = [list(map(float, line.split()[1:]))
           for line in files[3].read_text().splitlines()
           if line.startswith("v ")]
    np.testing.assert_allclose(np.array(got), expect, atol=1e-6)


def test_cli_modes_weight_and_label_export(tmp_path, cached):
    cache_path, mesh, rig, pre = cached
    out = tmp_path / "viz"
    assert main(["modes", "--cache", str(cache_path), "--out", str(out),
                 "--weights", "--labels"]) == 0
    W = np.loadtxt(out / "weights.csv", delimiter=",")
    np.testing.assert_allclose(W, pre.subspace.W, atol=1e-12)
    labels = np.loadtxt(out / "labels.csv", dtype=np.int64)
    np.testing.assert_array_equal(labels, pre.clustering.labels)


def test_cli_modes_zero_amplitude(tmp_path, cached):
    cache_path, mesh, *_ = cached
    out = tmp_path / "modes0"
    assert main(["modes", "--cache", str(cache_path), "--out", str(out),
                 "--amplitude", "0"]) == 0
    got = [list(map(float, line.split()[1:]))
           for line in sorted(out.glob("*.obj"))[0].read_text().splitlines()
           if line.startswith("v ")]
    np.testing.assert_allclose(np.array(got), mesh.vertices, atol=1e-9)


def test_cli_precompute_unit_tet_constant_mode(tmp_path):
    from meshgen import unit_tet
    mesh = unit_tet()
    paths = _write_inputs(tmp_path, mesh)
    cache = tmp_path / "one.cdsk"
    assert main(["precompute", "--mesh", str(paths["mesh"]), "--modes", "1",
                 "--clusters", "1", "--out", str(cache)]) == 0
    data = load_cache(cache)
    w = data.W[:, 0]
    assert np.abs(w - w[0]).max() < 1e-10 * abs(w[0])  # constant first weight


def test_cli_error_paths(tmp_path, capsys):
    assert main(["precompute", "--mesh", str(tmp_path / "nope.tet"),
                 "--modes", "1", "--clusters", "1",
                 "--out", str(tmp_path / "x.cdsk")]) == 1
    assert "not found" in capsys.readouterr().err
