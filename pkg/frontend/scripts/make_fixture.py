"""Regenerate test/fixtures/session.json from the Python engine.

Captures genuine wire bytes (setup + one frame) and reference surface
positions for a handful of reduced states, so the viewer tests hold the
protocol decoder and the shader-math mirror to the backend's outputs.

Run from the repository root:  python3 frontend/scripts/make_fixture.py
"""

import base64
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "tests"))

import numpy as np

from meshgen import bar_mesh, hat_rig
from cdskin import ComplementaryDynamics, MaterialField, project_full
from cdskin.service import LiveSession


def main():
    mesh = bar_mesh(4, 2, 2)
    rig = hat_rig(mesh, 3)
    eng = ComplementaryDynamics(n_modes=4, n_clusters=6, h=0.02, seed=0)
    eng.fit(mesh, MaterialField.homogeneous(mesh.t), rig)
    session = LiveSession(eng, lockstep=True)

    header = json.loads(session.setup_header())
    setup = session.setup_binary()

    rng = np.random.default_rng(42)
    p_drive = rng.standard_normal(eng.p_dim_) * 0.1
    session.latest_p = p_drive
    frame, _ = session.step_once()

    pre = eng.precompute_
    surf = session.surf_ids
    states = []
    for _ in range(4):
        z = rng.standard_normal(eng.reduced_.k) * 0.05
        p = rng.standard_normal(eng.p_dim_) * 0.05
        pos = project_full(z, p, pre.subspace, pre.cdata.J, mesh)
        states.append({
            "z": z.tolist(),
            "p": p.tolist(),
            "expected_surface_positions": pos[surf].ravel().tolist(),
        })

    out = {
        "header": header,
        "setup_b64": base64.b64encode(setup).decode(),
        "frame_b64": base64.b64encode(frame).decode(),
        "frame_p": session.engine.state_.p.tolist(),
        "bbox_diag": mesh.bbox_diag,
        "states": states,
    }
    dest = Path(__file__).resolve().parents[1] / "test" / "fixtures" / "session.json"
    dest.write_text(json.dumps(out))
    print(f"wrote {dest} (n_surface={header['n_surface']}, m={header['m']}, "
          f"b={header['b']})")


if __name__ == "__main__":
    main()
