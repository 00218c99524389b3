// Protocol decoding against genuine bytes captured from the session
// service (test/fixtures/session.json; regenerate with
// frontend/scripts/make_fixture.py).

import { describe, expect, it } from 'vitest';

import {
    TAG_FRAME, decodeFrame, decodeSections, decodeSetup, encodeSections,
    resetMessage, setParamsMessage,
} from '../src/protocol.js';
import { frameBytes, fixture, header, setupBytes } from './fixture.js';

describe('binary sections', () => {
    it('round-trips mixed f32/u32 sections', () => {
        const z = new Float32Array([1.5, -2.25, 3.125]);
        const ids = new Uint32Array([7, 9]);
        const buf = encodeSections(9, [z, ids]);
        const { tag, sections } = decodeSections(buf);
        expect(tag).toBe(9);
        expect(Array.from(sections[0] as Float32Array)).toEqual([1.5, -2.25, 3.125]);
        expect(Array.from(sections[1] as Uint32Array)).toEqual([7, 9]);
    });
});

describe('setup decoding (server bytes)', () => {
    it('matches the JSON header', () => {
        const payload = decodeSetup(header, setupBytes);
        expect(payload.surfaceIds.length).toBe(header.n_surface);
        expect(payload.restPositions.length).toBe(3 * header.n_surface);
        expect(payload.triangles.length).toBe(3 * header.n_tris);
        expect(payload.secondaryWeights.length).toBe(header.m * header.n_surface);
        expect(payload.rigWeights.length).toBe(header.b * header.n_surface);
        // triangles are surface-local
        for (const idx of payload.triangles) {
            expect(idx).toBeLessThan(header.n_surface);
        }
        // partition-of-unity rig weights survive the trip
        for (let i = 0; i < header.n_surface; i++) {
            let sum = 0;
            for (let b = 0; b < header.b; b++) {
                sum += payload.rigWeights[i * header.b + b];
            }
            expect(sum).toBeCloseTo(1.0, 5);
        }
    });

    it('rejects payloads inconsistent with the header', () => {
        const bad = { ...header, n_surface: header.n_surface + 1 };
        expect(() => decodeSetup(bad, setupBytes)).toThrow(/lengths/);
    });
});

describe('frame decoding (server bytes)', () => {
    it('carries step, z and the p echo', () => {
        const frame = decodeFrame(header, frameBytes);
        expect(frame.step).toBe(1);
        expect(frame.z.length).toBe(12 * header.m);
        expect(frame.p.length).toBe(header.p_dim);
        const expectedP = fixture.frame_p as number[];
        frame.p.forEach((v, i) => expect(v).toBeCloseTo(expectedP[i], 5));
        expect(new DataView(frameBytes).getUint8(0)).toBe(TAG_FRAME);
        expect(() => decodeFrame(header, setupBytes)).toThrow(/expected frame/);
    });
});

describe('outgoing messages', () => {
    it('serializes rig updates and resets', () => {
        const msg = JSON.parse(setParamsMessage(new Float64Array([0.5, -1])));
        expect(msg).toEqual({ type: 'set_params', p: [0.5, -1] });
        expect(JSON.parse(resetMessage())).toEqual({ type: 'reset' });
    });
});
