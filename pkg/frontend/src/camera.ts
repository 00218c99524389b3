// Minimal orbiting orthographic camera with the 4x4 helpers the viewer
// needs; column-major matrices as WebGL expects.

import { Vec3 } from './arcball.js';

export class OrbitCamera {
    theta = 0.5;
    phi = 0.35;
    zoom = 1.0;
    center: Vec3 = [0, 0, 0];
    radius = 1.0;

    fit(restPositions: Float32Array): void {
        const lo = [Infinity, Infinity, Infinity];
        const hi = [-Infinity, -Infinity, -Infinity];
        for (let i = 0; i < restPositions.length; i += 3) {
            for (let a = 0; a < 3; a++) {
                lo[a] = Math.min(lo[a], restPositions[i + a]);
                hi[a] = Math.max(hi[a], restPositions[i + a]);
            }
        }
        this.center = [(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2,
                       (lo[2] + hi[2]) / 2];
        this.radius = Math.max(1e-6, Math.hypot(hi[0] - lo[0], hi[1] - lo[1],
                                                hi[2] - lo[2]) / 2);
    }

    basis(): { right: Vec3; up: Vec3; forward: Vec3 } {
        const ct = Math.cos(this.theta), st = Math.sin(this.theta);
        const cp = Math.cos(this.phi), sp = Math.sin(this.phi);
        const forward: Vec3 = [-cp * st, -sp, -cp * ct];
        const right: Vec3 = [ct, 0, -st];
        const up: Vec3 = [
            right[1] * forward[2] - right[2] * forward[1],
            right[2] * forward[0] - right[0] * forward[2],
            right[0] * forward[1] - right[1] * forward[0],
        ];
        return { right, up: [-up[0], -up[1], -up[2]], forward };
    }

    worldPerPixel(viewportHeight: number): number {
        return (2 * this.radius * 1.2) / (this.zoom * viewportHeight);
    }

    viewProj(aspect: number): Float32Array {
        const { right, up, forward } = this.basis();
        const ext = (this.radius * 1.2) / this.zoom;
        const sx = 1 / (ext * aspect), sy = 1 / ext, sz = 1 / (this.radius * 8);
        const c = this.center;
        const m = new Float32Array(16);
        const rows = [
            [right[0] * sx, right[1] * sx, right[2] * sx],
            [up[0] * sy, up[1] * sy, up[2] * sy],
            [-forward[0] * sz, -forward[1] * sz, -forward[2] * sz],
        ];
        for (let r = 0; r < 3; r++) {
            m[r] = rows[r][0];
            m[4 + r] = rows[r][1];
            m[8 + r] = rows[r][2];
            m[12 + r] = -(rows[r][0] * c[0] + rows[r][1] * c[1]
                          + rows[r][2] * c[2]);
        }
        m[15] = 1;
        return m;
    }

    /** World coordinates -> normalized device coordinates (for picking). */
    project(p: Vec3, aspect: number): [number, number] {
        const m = this.viewProj(aspect);
        const x = m[0] * p[0] + m[4] * p[1] + m[8] * p[2] + m[12];
        const y = m[1] * p[0] + m[5] * p[1] + m[9] * p[2] + m[13];
        return [x, y];
    }
}
