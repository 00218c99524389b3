// Wire protocol (v1) shared with the session service.
//
// Server -> client: one JSON setup header, then binary messages framed as
// [u8 tag] followed by sections of [u8 dtype (0=f32, 1=u32)] [u32 count]
// [payload], all little-endian.  Tag 1 = setup, tag 2 = frame.

export const PROTOCOL_VERSION = 1;
export const TAG_SETUP = 1;
export const TAG_FRAME = 2;

export interface SetupHeader {
    type: 'setup';
    version: number;
    n: number;
    m: number;
    b: number;
    p_dim: number;
    n_surface: number;
    n_tris: number;
    h: number;
    energy: string;
    mode: 'lockstep' | 'realtime';
}

export interface SetupPayload {
    surfaceIds: Uint32Array;
    restPositions: Float32Array;    // 3 per surface vertex
    triangles: Uint32Array;         // surface-local ids, 3 per tri
    secondaryWeights: Float32Array; // m per surface vertex
    rigWeights: Float32Array;       // b per surface vertex
}

export interface Frame {
    step: number;
    z: Float32Array;  // 12m
    p: Float32Array;  // p_dim
}

type Section = Float32Array | Uint32Array;

export function decodeSections(buffer: ArrayBuffer): { tag: number; sections: Section[] } {
    const view = new DataView(buffer);
    const tag = view.getUint8(0);
    const sections: Section[] = [];
    let offset = 1;
    while (offset < buffer.byteLength) {
        const dtype = view.getUint8(offset);
        const count = view.getUint32(offset + 1, true);
        offset += 5;
        // copy out: the source buffer offset may not be 4-byte aligned
        const bytes = buffer.slice(offset, offset + 4 * count);
        sections.push(dtype === 0 ? new Float32Array(bytes) : new Uint32Array(bytes));
        offset += 4 * count;
    }
    return { tag, sections };
}

export function encodeSections(tag: number, sections: Section[]): ArrayBuffer {
    let size = 1;
    for (const s of sections) size += 5 + 4 * s.length;
    const out = new ArrayBuffer(size);
    const view = new DataView(out);
    view.setUint8(0, tag);
    let offset = 1;
    for (const s of sections) {
        view.setUint8(offset, s instanceof Float32Array ? 0 : 1);
        view.setUint32(offset + 1, s.length, true);
        offset += 5;
        new Uint8Array(out, offset, 4 * s.length)
            .set(new Uint8Array(s.buffer, s.byteOffset, 4 * s.length));
        offset += 4 * s.length;
    }
    return out;
}

export function decodeSetup(header: SetupHeader, buffer: ArrayBuffer): SetupPayload {
    const { tag, sections } = decodeSections(buffer);
    if (tag !== TAG_SETUP) throw new Error(`expected setup message, got tag ${tag}`);
    const [ids, rest, tris, secW, rigW] = sections;
    const ns = header.n_surface;
    if (ids.length !== ns || rest.length !== 3 * ns
        || tris.length !== 3 * header.n_tris
        || secW.length !== header.m * ns
        || rigW.length !== header.b * ns) {
        throw new Error('setup payload lengths do not match the header');
    }
    return {
        surfaceIds: ids as Uint32Array,
        restPositions: rest as Float32Array,
        triangles: tris as Uint32Array,
        secondaryWeights: secW as Float32Array,
        rigWeights: rigW as Float32Array,
    };
}

export function decodeFrame(header: SetupHeader, buffer: ArrayBuffer): Frame {
    const { tag, sections } = decodeSections(buffer);
    if (tag !== TAG_FRAME) throw new Error(`expected frame message, got tag ${tag}`);
    const [step, z, p] = sections;
    if (z.length !== 12 * header.m || p.length !== header.p_dim) {
        throw new Error('frame payload lengths do not match the header');
    }
    return { step: step[0], z: z as Float32Array, p: p as Float32Array };
}

export function setParamsMessage(p: Float64Array | number[]): string {
    return JSON.stringify({ type: 'set_params', p: Array.from(p) });
}

export function setForceMessage(f: Float64Array | number[]): string {
    return JSON.stringify({ type: 'set_force', f: Array.from(f) });
}

export function resetMessage(): string {
    return JSON.stringify({ type: 'reset' });
}
