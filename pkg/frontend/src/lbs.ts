// Dual linear-blend skinning math.
//
// skinVertexF32 mirrors the vertex shader arithmetic (same operation
// order, every intermediate rounded to f32 via Math.fround) so tests can
// hold the GPU path to the CPU reference without a GL context.

const fr = Math.fround;

/** Transforms are flattened 3x4 row-major, one per bone/mode. */
export function skinVertexF64(
    rest: [number, number, number],
    rigWeights: ArrayLike<number>, rigT: ArrayLike<number>,
    secWeights: ArrayLike<number>, secT: ArrayLike<number>,
): [number, number, number] {
    const out: [number, number, number] = [rest[0], rest[1], rest[2]];
    accumulate(out, rest, rigWeights, rigT, (x) => x);
    accumulate(out, rest, secWeights, secT, (x) => x);
    return out;
}

export function skinVertexF32(
    rest: [number, number, number],
    rigWeights: ArrayLike<number>, rigT: ArrayLike<number>,
    secWeights: ArrayLike<number>, secT: ArrayLike<number>,
): [number, number, number] {
    const out: [number, number, number] = [fr(rest[0]), fr(rest[1]), fr(rest[2])];
    accumulate(out, rest, rigWeights, rigT, fr);
    accumulate(out, rest, secWeights, secT, fr);
    return out;
}

function accumulate(
    out: [number, number, number], rest: [number, number, number],
    weights: ArrayLike<number>, transforms: ArrayLike<number>,
    round: (x: number) => number,
): void {
    for (let b = 0; b < weights.length; b++) {
        const w = round(weights[b]);
        if (w === 0) continue;
        const base = 12 * b;
        for (let axis = 0; axis < 3; axis++) {
            const r = base + 4 * axis;
            // rows dotted with the homogeneous rest position, as the
            // shader does: w * (T[r0]*x + T[r1]*y + T[r2]*z + T[r3])
            const dot = round(
                round(round(round(transforms[r] * rest[0])
                    + round(transforms[r + 1] * rest[1]))
                    + round(transforms[r + 2] * rest[2]))
                + transforms[r + 3]);
            out[axis] = round(out[axis] + round(w * dot));
        }
    }
}

/** Deformed positions for every surface vertex; layout [x y z x y z ...]. */
export function skinAllF32(
    rest: Float32Array, rigWeights: Float32Array, nBones: number,
    rigT: Float32Array, secWeights: Float32Array, nModes: number,
    secT: Float32Array,
): Float32Array {
    const n = rest.length / 3;
    const out = new Float32Array(rest.length);
    const rw = new Float32Array(nBones);
    const sw = new Float32Array(nModes);
    for (let i = 0; i < n; i++) {
        const r: [number, number, number] = [rest[3 * i], rest[3 * i + 1], rest[3 * i + 2]];
        for (let b = 0; b < nBones; b++) rw[b] = rigWeights[i * nBones + b];
        for (let k = 0; k < nModes; k++) sw[k] = secWeights[i * nModes + k];
        const p = skinVertexF32(r, rw, rigT, sw, secT);
        out[3 * i] = p[0];
        out[3 * i + 1] = p[1];
        out[3 * i + 2] = p[2];
    }
    return out;
}
