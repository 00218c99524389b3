// Viewer entry point: connect to `cdskin serve`, render the streamed
// frames with GPU dual skinning, and turn pointer input into rig updates.
//
// URL query parameters: ?host=127.0.0.1&port=8787

import { GizmoController, Vec3, boneCentroids } from './arcball.js';
import { SessionClient } from './client.js';
import { OrbitCamera } from './camera.js';
import { Frame, SetupHeader, SetupPayload } from './protocol.js';
import { Renderer } from './renderer.js';
import { ViewerState } from './state.js';

const params = new URLSearchParams(window.location.search);
const host = params.get('host') ?? '127.0.0.1';
const port = params.get('port') ?? '8787';

const canvas = document.getElementById('view') as HTMLCanvasElement;
const statusEl = document.getElementById('status')!;
const modeSelect = document.getElementById('weight-mode') as HTMLSelectElement;
const wireframeBox = document.getElementById('wireframe') as HTMLInputElement;
const resetBtn = document.getElementById('reset') as HTMLButtonElement;

const state = new ViewerState();
const camera = new OrbitCamera();
let renderer: Renderer | null = null;
let gizmos: GizmoController | null = null;
let gl: WebGL2RenderingContext | null = null;

function status(text: string): void {
    statusEl.textContent = [text, ...state.warnings].join(' | ');
}

function rebuildGl(): void {
    gl = canvas.getContext('webgl2');
    if (!gl) {
        status('WebGL2 unavailable');
        return;
    }
    if (state.header && state.payload) {
        renderer = new Renderer(gl, state.header, state.payload);
    }
}

const client = new SessionClient(`ws://${host}:${port}/ws`, {
    onSetup(header: SetupHeader, payload: SetupPayload) {
        state.applySetup(header, payload);
        camera.fit(payload.restPositions);
        gizmos = new GizmoController(
            boneCentroids(payload.restPositions, payload.rigWeights, header.b));
        modeSelect.innerHTML = '<option value="-1">shading</option>'
            + Array.from({ length: state.drawnModes },
                         (_, k) => `<option value="${k}">mode ${k}</option>`)
                   .join('');
        rebuildGl();
        status(`n=${header.n} m=${header.m} bones=${header.b} `
               + `h=${header.h}s (${header.mode})`);
    },
    onFrame(frame: Frame) {
        state.offerFrame(frame);
    },
    onNotice(kind, message) {
        status(kind === 'status' ? message : `${kind}: ${message}`);
    },
});
client.connect();

canvas.addEventListener('webglcontextlost', (ev) => {
    ev.preventDefault();
    status('GL context lost; rebuilding');
});
canvas.addEventListener('webglcontextrestored', () => rebuildGl());

// --- pointer interaction ---------------------------------------------------
// left drag: translate the picked handle; shift+drag: arcball-rotate it;
// alt/middle drag: orbit the camera; wheel: zoom.
let dragging: 'handle' | 'rotate' | 'orbit' | null = null;
let lastX = 0;
let lastY = 0;

function ndc(ev: PointerEvent): [number, number] {
    const rect = canvas.getBoundingClientRect();
    return [((ev.clientX - rect.left) / rect.width) * 2 - 1,
            1 - ((ev.clientY - rect.top) / rect.height) * 2];
}

function pickHandle(nx: number, ny: number): number {
    if (!gizmos || gizmos.boneCount === 0) return -1;
    const aspect = canvas.width / canvas.height;
    let best = -1;
    let bestD = 0.15 * 0.15; // pick radius in NDC
    gizmos.centroids.forEach((c, b) => {
        const [px, py] = camera.project(c, aspect);
        const d = (px - nx) ** 2 + (py - ny) ** 2;
        if (d < bestD) { bestD = d; best = b; }
    });
    return best;
}

canvas.addEventListener('pointerdown', (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    const [nx, ny] = ndc(ev);
    lastX = ev.clientX;
    lastY = ev.clientY;
    if (ev.button === 1 || ev.altKey || !gizmos || gizmos.boneCount === 0) {
        dragging = 'orbit';
        return;
    }
    const handle = pickHandle(nx, ny);
    if (handle < 0) {
        dragging = 'orbit';
        return;
    }
    gizmos.beginDrag(handle, nx, ny);
    dragging = ev.shiftKey ? 'rotate' : 'handle';
});

canvas.addEventListener('pointermove', (ev) => {
    if (!dragging) return;
    const dx = ev.clientX - lastX;
    const dy = ev.clientY - lastY;
    lastX = ev.clientX;
    lastY = ev.clientY;
    if (dragging === 'orbit') {
        camera.theta -= dx * 0.01;
        camera.phi = Math.max(-1.4, Math.min(1.4, camera.phi + dy * 0.01));
        return;
    }
    if (!gizmos) return;
    if (dragging === 'handle') {
        const scale = camera.worldPerPixel(canvas.height);
        const { right, up } = camera.basis();
        const delta: Vec3 = [
            (right[0] * dx - up[0] * dy) * scale,
            (right[1] * dx - up[1] * dy) * scale,
            (right[2] * dx - up[2] * dy) * scale,
        ];
        gizmos.translateBy(delta);
    } else {
        const [nx, ny] = ndc(ev);
        gizmos.rotateTo(nx, ny);
    }
    client.sendParams(gizmos.params());
});

canvas.addEventListener('pointerup', () => {
    gizmos?.endDrag();
    dragging = null;
});

canvas.addEventListener('wheel', (ev) => {
    ev.preventDefault();
    camera.zoom *= Math.exp(-ev.deltaY * 0.001);
});

modeSelect.addEventListener('change', () => {
    state.setWeightMode(parseInt(modeSelect.value, 10));
});
wireframeBox.addEventListener('change', () => {
    state.settings.wireframe = wireframeBox.checked;
});
resetBtn.addEventListener('click', () => {
    gizmos?.reset();
    client.sendReset();
});

function resize(): void {
    const dpr = window.devicePixelRatio || 1;
    canvas.width = canvas.clientWidth * dpr;
    canvas.height = canvas.clientHeight * dpr;
    gl?.viewport(0, 0, canvas.width, canvas.height);
}
window.addEventListener('resize', resize);
resize();

function tick(): void {
    if (renderer && gl) {
        renderer.draw(state.latest, camera.viewProj(canvas.width / canvas.height),
                      state.settings);
        if (state.latest) {
            statusEl.dataset.step = String(state.latest.step);
        }
    }
    requestAnimationFrame(tick);
}
requestAnimationFrame(tick);
