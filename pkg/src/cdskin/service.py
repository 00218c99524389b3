"""Real-time session service: fixed-timestep stepping over a websocket.

Protocol (version 1)
--------------------
Client -> server: JSON text messages
  {"type": "set_params", "p": [p_dim floats]}
  {"type": "set_force",  "f": [12m floats]}
  {"type": "reset"}

Server -> client: one JSON text setup header, then binary messages.
Binary framing (little-endian): u8 tag, then sections of
[u8 dtype (0=f32, 1=u32)] [u32 count] [payload].
  tag 1 (setup): surface vertex ids, rest positions (3 per vertex),
      surface triangles (surface-local ids), secondary weights (m per
      vertex), rig weights (b per vertex)
  tag 2 (frame): [step index], z (12m), p echo (p_dim)
Errors and warnings are JSON text frames ({"type": "error"|"warning"}).

The simulation loop is the sole owner of the state; rig updates land in a
single-slot mailbox (last writer wins) and are applied only at step
boundaries.  In lockstep mode each received set_params advances exactly
one step, which makes scripted replays reproduce the batch pipeline
bit-for-bit; the default mode free-runs at the fixed timestep h.
"""

from __future__ import annotations

import asyncio
import json
import logging
import struct
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .cache import load_cache, restore_precompute
from .estimator import ComplementaryDynamics

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
TAG_SETUP = 1
TAG_FRAME = 2
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<u4")}


def encode_sections(tag: int, sections) -> bytes:
    out = [struct.pack("<B", tag)]
    for dtype_code, arr in sections:
        arr = np.ascontiguousarray(arr, dtype=_DTYPES[dtype_code])
        out.append(struct.pack("<BI", dtype_code, arr.size))
        out.append(arr.tobytes())
    return b"".join(out)


def decode_sections(payload: bytes):
    tag = payload[0]
    offset = 1
    sections = []
    while offset < len(payload):
        code, count = struct.unpack_from("<BI", payload, offset)
        offset += 5
        dtype = _DTYPES[code]
        arr = np.frombuffer(payload, dtype=dtype, count=count, offset=offset)
        offset += count * dtype.itemsize
        sections.append(arr.copy())
    return tag, sections


def decode_frame(payload: bytes):
    tag, sections = decode_sections(payload)
    if tag != TAG_FRAME:
        raise ValueError(f"expected frame message, got tag {tag}")
    step = int(sections[0][0])
    return step, sections[1].astype(np.float64), sections[2].astype(np.float64)


class LiveSession:
    """Owns the simulation state; steps and broadcasts frames."""

    def __init__(self, engine: ComplementaryDynamics, lockstep: bool = False):
        self.engine = engine
        self.lockstep = lockstep
        self.step_index = 0
        self.latest_p = np.zeros(engine.p_dim_)
        self.pending_reset = False
        self.clients: set[asyncio.Queue] = set()

        pre = engine.precompute_
        mesh = pre.mesh
        self.surf_ids = np.unique(mesh.surface_tris)
        local = {int(v): i for i, v in enumerate(self.surf_ids)}
        self.surf_tris_local = np.vectorize(local.__getitem__)(
            mesh.surface_tris).astype(np.uint32)

    def setup_header(self) -> str:
        eng = self.engine
        return json.dumps({
            "type": "setup", "version": PROTOCOL_VERSION,
            "n": eng.precompute_.mesh.n, "m": eng.n_modes_,
            "b": eng.precompute_.rig.bones, "p_dim": eng.p_dim_,
            "n_surface": int(self.surf_ids.size),
            "n_tris": int(self.surf_tris_local.shape[0]),
            "h": eng.config_.h, "energy": eng.config_.energy,
            "mode": "lockstep" if self.lockstep else "realtime",
        })

    def setup_binary(self) -> bytes:
        pre = self.engine.precompute_
        ids = self.surf_ids
        return encode_sections(TAG_SETUP, [
            (1, ids.astype(np.uint32)),
            (0, pre.mesh.vertices[ids].ravel()),
            (1, self.surf_tris_local.ravel()),
            (0, pre.subspace.W[ids].ravel()),
            (0, pre.rig.weights[ids].ravel()
                if pre.rig.bones else np.zeros(0)),
        ])

    def frame_binary(self) -> bytes:
        state = self.engine.state_
        return encode_sections(TAG_FRAME, [
            (1, np.array([self.step_index], dtype=np.uint32)),
            (0, state.z), (0, state.p),
        ])

    def step_once(self) -> tuple[bytes, str | None]:
        """Apply mailbox inputs, advance one step, build the frame."""
        warning = None
        if self.pending_reset:
            self.engine.state_.reset()
            self.latest_p = np.zeros(self.engine.p_dim_)
            self.pending_reset = False
        try:
            self.engine.step(self.latest_p)
            diverged = not np.isfinite(self.engine.state_.z).all()
        except ValueError as exc:  # non-finite state inside the solver
            logger.warning("simulation step failed: %s", exc)
            diverged = True
        if diverged:
            self.engine.state_.reset()
            warning = "simulation diverged (non-finite z); state reset"
            logger.warning(warning)
        self.step_index += 1
        return self.frame_binary(), warning

    def broadcast(self, frame: bytes):
        for queue in self.clients:
            queue.put_nowait(frame)

    def handle_message(self, text: str) -> str | None:
        """Apply one client message; returns an error string if malformed."""
        try:
            msg = json.loads(text)
        except json.JSONDecodeError as exc:
            return f"malformed JSON: {exc}"
        kind = msg.get("type")
        if kind == "set_params":
            p = np.asarray(msg.get("p", []), dtype=np.float64)
            if p.shape != (self.engine.p_dim_,):
                return (f"set_params carries {p.size} values, "
                        f"expected {self.engine.p_dim_}")
            self.latest_p = p
            if self.lockstep:
                frame, warning = self.step_once()
                self.broadcast(frame)
                if warning:
                    self.broadcast(json.dumps({"type": "warning",
                                               "message": warning}))
        elif kind == "set_force":
            f = np.asarray(msg.get("f", []), dtype=np.float64)
            if f.shape != (self.engine.reduced_.k,):
                return (f"set_force carries {f.size} values, "
                        f"expected {self.engine.reduced_.k}")
            self.engine.state_.f_ext = f
        elif kind == "reset":
            if self.lockstep:
                self.engine.state_.reset()
                self.latest_p = np.zeros(self.engine.p_dim_)
            else:
                self.pending_reset = True
        else:
            return f"unknown message type {kind!r}"
        return None


async def _run_realtime(session: LiveSession):
    loop = asyncio.get_running_loop()
    h = session.engine.config_.h
    deadline = loop.time()
    while True:
        deadline += h
        delay = deadline - loop.time()
        if delay > 0:
            await asyncio.sleep(delay)
        else:
            logger.warning("tick overran the timestep by %.3f ms",
                           -delay * 1e3)
            deadline = loop.time()
            await asyncio.sleep(0)
        frame, warning = session.step_once()
        session.broadcast(frame)
        if warning:
            session.broadcast(json.dumps({"type": "warning",
                                          "message": warning}))


def create_app(engine: ComplementaryDynamics,
               lockstep: bool = False) -> FastAPI:
    session = LiveSession(engine, lockstep=lockstep)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = None
        if not lockstep:
            task = asyncio.create_task(_run_realtime(session))
        yield
        if task is not None:
            task.cancel()

    app = FastAPI(lifespan=lifespan)
    app.state.session = session

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        await ws.send_text(session.setup_header())
        await ws.send_bytes(session.setup_binary())
        queue: asyncio.Queue = asyncio.Queue()
        session.clients.add(queue)

        async def sender():
            while True:
                item = await queue.get()
                if isinstance(item, bytes):
                    await ws.send_bytes(item)
                else:
                    await ws.send_text(item)

        send_task = asyncio.create_task(sender())
        try:
            while True:
                text = await ws.receive_text()
                error = session.handle_message(text)
                if error:
                    await ws.send_text(json.dumps({"type": "error",
                                                   "message": error}))
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            session.clients.discard(queue)

    return app


def app_from_cache(cache_path, h: float, energy: str,
                   lockstep: bool = False) -> FastAPI:
    data = load_cache(cache_path)
    pre = restore_precompute(data)
    engine = ComplementaryDynamics.from_precompute(
        pre, n_modes=pre.subspace.m, n_clusters=pre.clustering.r_eff,
        energy=energy, h=h, seed=data.seed,
        subspace_energy=data.subspace_energy)
    return create_app(engine, lockstep=lockstep)


def serve_session(cache_path, h: float, energy: str, port: int,
                  lockstep: bool = False):
    """Blocking entry point used by `cdskin serve`."""
    import uvicorn

    app = app_from_cache(cache_path, h=h, energy=energy, lockstep=lockstep)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="info")
