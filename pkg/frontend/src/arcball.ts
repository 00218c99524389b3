// Rig-handle gizmo math: arcball rotations, drag translations, and the
// assembly of displacement-transform rig parameters.
//
// Each bone carries a rotation quaternion and a translation applied about
// the bone's weighted rest centroid c, so the wire parameters encode
// x' = R (x - c) + c + t, i.e. the 3x4 displacement transform
// [R - I | c - R c + t].

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number]; // w, x, y, z

export const QUAT_IDENTITY: Quat = [1, 0, 0, 0];

export function quatMultiply(a: Quat, b: Quat): Quat {
    const [aw, ax, ay, az] = a;
    const [bw, bx, by, bz] = b;
    return [
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ];
}

export function quatNormalize(q: Quat): Quat {
    const n = Math.hypot(q[0], q[1], q[2], q[3]);
    return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

/** Row-major 3x3 rotation matrix. */
export function quatToMatrix(q: Quat): number[] {
    const [w, x, y, z] = quatNormalize(q);
    return [
        1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
    ];
}

/** Project normalized screen coords ([-1,1]^2) onto the arcball sphere. */
export function arcballPoint(x: number, y: number): Vec3 {
    const d2 = x * x + y * y;
    if (d2 <= 0.5) return [x, y, Math.sqrt(1 - d2)];
    // outside the sphere: hyperbolic sheet keeps the mapping continuous
    return [x, y, 0.5 / Math.sqrt(d2)];
}

/** Quaternion rotating arcball point a onto b. */
export function arcballRotation(a: Vec3, b: Vec3): Quat {
    const cross: Vec3 = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    const dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    const na = Math.hypot(...a);
    const nb = Math.hypot(...b);
    return quatNormalize([na * nb + dot, cross[0], cross[1], cross[2]]);
}

/** Weighted rest centroid of each bone's region of influence. */
export function boneCentroids(restPositions: Float32Array,
                              rigWeights: Float32Array,
                              nBones: number): Vec3[] {
    const n = restPositions.length / 3;
    const out: Vec3[] = [];
    for (let b = 0; b < nBones; b++) {
        let wx = 0, wy = 0, wz = 0, ws = 0;
        for (let i = 0; i < n; i++) {
            const w = rigWeights[i * nBones + b];
            ws += w;
            wx += w * restPositions[3 * i];
            wy += w * restPositions[3 * i + 1];
            wz += w * restPositions[3 * i + 2];
        }
        out.push(ws > 0 ? [wx / ws, wy / ws, wz / ws] : [0, 0, 0]);
    }
    return out;
}

export interface HandleState {
    rotation: Quat;
    translation: Vec3;
}

export class GizmoController {
    readonly handles: HandleState[];
    private dragHandle = -1;
    private lastArcball: Vec3 | null = null;

    constructor(readonly centroids: Vec3[]) {
        this.handles = centroids.map(() => ({
            rotation: [...QUAT_IDENTITY] as Quat,
            translation: [0, 0, 0] as Vec3,
        }));
    }

    get boneCount(): number {
        return this.handles.length;
    }

    beginDrag(bone: number, nx = 0, ny = 0): void {
        this.dragHandle = bone;
        this.lastArcball = arcballPoint(nx, ny);
    }

    endDrag(): void {
        this.dragHandle = -1;
        this.lastArcball = null;
    }

    /** Plain drag: translate the handle by a world-space delta. */
    translateBy(delta: Vec3): void {
        if (this.dragHandle < 0) return;
        const t = this.handles[this.dragHandle].translation;
        t[0] += delta[0];
        t[1] += delta[1];
        t[2] += delta[2];
    }

    /** Modifier drag: arcball-rotate the handle (normalized screen coords). */
    rotateTo(nx: number, ny: number): void {
        if (this.dragHandle < 0 || !this.lastArcball) return;
        const cur = arcballPoint(nx, ny);
        const dq = arcballRotation(this.lastArcball, cur);
        const h = this.handles[this.dragHandle];
        h.rotation = quatNormalize(quatMultiply(dq, h.rotation));
        this.lastArcball = cur;
    }

    reset(): void {
        for (const h of this.handles) {
            h.rotation = [...QUAT_IDENTITY] as Quat;
            h.translation = [0, 0, 0];
        }
    }

    /** Flattened displacement transforms [R - I | c - R c + t] per bone. */
    params(): Float64Array {
        const p = new Float64Array(12 * this.handles.length);
        this.handles.forEach((h, b) => {
            const R = quatToMatrix(h.rotation);
            const c = this.centroids[b];
            const rc = [
                R[0] * c[0] + R[1] * c[1] + R[2] * c[2],
                R[3] * c[0] + R[4] * c[1] + R[5] * c[2],
                R[6] * c[0] + R[7] * c[1] + R[8] * c[2],
            ];
            for (let row = 0; row < 3; row++) {
                const base = 12 * b + 4 * row;
                p[base] = R[3 * row] - (row === 0 ? 1 : 0);
                p[base + 1] = R[3 * row + 1] - (row === 1 ? 1 : 0);
                p[base + 2] = R[3 * row + 2] - (row === 2 ? 1 : 0);
                p[base + 3] = c[row] - rc[row] + h.translation[row];
            }
        });
        return p;
    }
}
