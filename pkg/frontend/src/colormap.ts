// CPU twin of the shader's symmetric diverging colormap, plus the
// per-mode normalization used for weight visualization: each mode is
// independently scaled by 1 / max|W_k| so the color endpoints land at
// +-max|W_k|.

export type RGB = [number, number, number];

const LO: RGB = [0.19, 0.31, 0.97];
const MID: RGB = [0.95, 0.95, 0.95];
const HI: RGB = [0.86, 0.15, 0.15];

function mix(a: RGB, b: RGB, t: number): RGB {
    return [a[0] + (b[0] - a[0]) * t,
            a[1] + (b[1] - a[1]) * t,
            a[2] + (b[2] - a[2]) * t];
}

export function diverging(t: number): RGB {
    t = Math.min(1, Math.max(-1, t));
    return t < 0 ? mix(MID, LO, -t) : mix(MID, HI, t);
}

/** 1 / max|weights| over one mode's column; 0 for an all-zero mode. */
export function modeScale(weights: Float32Array, nModes: number, mode: number): number {
    let peak = 0;
    for (let i = mode; i < weights.length; i += nModes) {
        const a = Math.abs(weights[i]);
        if (a > peak) peak = a;
    }
    return peak > 0 ? 1 / peak : 0;
}

export function weightColors(weights: Float32Array, nModes: number,
                             mode: number): Float32Array {
    const scale = modeScale(weights, nModes, mode);
    const n = weights.length / nModes;
    const out = new Float32Array(3 * n);
    for (let i = 0; i < n; i++) {
        const c = diverging(weights[i * nModes + mode] * scale);
        out.set(c, 3 * i);
    }
    return out;
}
