// Viewer state: latest-frame slot, truncation warnings, weight-mode
// clamping, colormap normalization, attribute packing.

import { describe, expect, it } from 'vitest';

import { diverging, modeScale, weightColors } from '../src/colormap.js';
import { decodeSetup } from '../src/protocol.js';
import { packWeights } from '../src/renderer.js';
import { MAX_MODES } from '../src/shaders.js';
import { ViewerState } from '../src/state.js';
import { fixture, header, setupBytes } from './fixture.js';

const payload = decodeSetup(header, setupBytes);

function frame(step: number) {
    return {
        step,
        z: new Float32Array(12 * header.m),
        p: new Float32Array(header.p_dim),
    };
}

describe('latest-frame slot', () => {
    it('keeps only the newest frame and drops stale ones', () => {
        const state = new ViewerState();
        state.applySetup(header, payload);
        expect(state.offerFrame(frame(3))).toBe(true);
        expect(state.offerFrame(frame(5))).toBe(true);
        expect(state.offerFrame(frame(4))).toBe(false); // stale, dropped
        expect(state.offerFrame(frame(5))).toBe(false); // duplicate
        expect(state.latest!.step).toBe(5);
        expect(state.framesDropped).toBe(2);
    });

    it('warns visibly when the service sends more modes than the cap', () => {
        const state = new ViewerState();
        const big = { ...header, m: MAX_MODES + 4 };
        state.applySetup(big, payload);
        expect(state.drawnModes).toBe(MAX_MODES);
        expect(state.warnings.some((w) => w.includes('attribute cap'))).toBe(true);
    });

    it('clamps out-of-range weight-mode indices', () => {
        const state = new ViewerState();
        state.applySetup(header, payload);
        state.setWeightMode(999);
        expect(state.settings.weightMode).toBe(header.m - 1);
        state.setWeightMode(-5);
        expect(state.settings.weightMode).toBe(-1);
    });
});

describe('weight visualization', () => {
    it('colormap endpoints sit at +-max|W_k|', () => {
        const scale = modeScale(payload.secondaryWeights, header.m, 0);
        let peak = 0;
        for (let i = 0; i < payload.secondaryWeights.length; i += header.m) {
            peak = Math.max(peak, Math.abs(payload.secondaryWeights[i]));
        }
        expect(scale).toBeCloseTo(1 / peak, 10);
        const close = (got: number[], want: number[]) =>
            got.forEach((v, i) => expect(v).toBeCloseTo(want[i], 12));
        close(diverging(1), [0.86, 0.15, 0.15]);
        close(diverging(-1), [0.19, 0.31, 0.97]);
        close(diverging(0), [0.95, 0.95, 0.95]);
        expect(diverging(7)).toEqual(diverging(1)); // clamped
    });

    it('a constant mode renders a single flat color', () => {
        const n = 5;
        const weights = new Float32Array(n).fill(0.42); // one mode, constant
        const colors = weightColors(weights, 1, 0);
        for (let i = 0; i < n; i++) {
            expect(colors[3 * i]).toBeCloseTo(colors[0], 12);
            expect(colors[3 * i + 1]).toBeCloseTo(colors[1], 12);
            expect(colors[3 * i + 2]).toBeCloseTo(colors[2], 12);
        }
    });
});

describe('attribute packing', () => {
    it('packs m weights per vertex into zero-padded vec4 blocks', () => {
        const w = new Float32Array([1, 2, 3, 4, 5, 6]); // 2 verts x 3 modes
        const packed = packWeights(w, 3, 2); // 2 blocks = 8 slots per vertex
        expect(Array.from(packed.subarray(0, 8))).toEqual(
            [1, 2, 3, 0, 0, 0, 0, 0]);
        expect(Array.from(packed.subarray(8, 16))).toEqual(
            [4, 5, 6, 0, 0, 0, 0, 0]);
    });

    it('truncates beyond the attribute capacity', () => {
        const w = Float32Array.from({ length: 20 }, (_, i) => i + 1);
        const packed = packWeights(w, 20, 1); // one vertex, one vec4 block
        expect(Array.from(packed)).toEqual([1, 2, 3, 4]);
    });
});

describe('fixture sanity', () => {
    it('reference states carry matching sizes', () => {
        for (const s of fixture.states) {
            expect(s.z.length).toBe(12 * header.m);
            expect(s.p.length).toBe(header.p_dim);
            expect(s.expected_surface_positions.length)
                .toBe(3 * header.n_surface);
        }
    });
});
