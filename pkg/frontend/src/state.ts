// Viewer state: setup payload, the latest-frame slot, render settings.
//
// Exactly the newest received frame is bound each draw; stale or
// reordered frames are dropped, never drawn.

import { Frame, SetupHeader, SetupPayload } from './protocol.js';
import { MAX_BONES, MAX_MODES } from './shaders.js';

export interface RenderSettings {
    wireframe: boolean;
    weightMode: number; // -1 = off, else secondary mode index
}

export class ViewerState {
    header: SetupHeader | null = null;
    payload: SetupPayload | null = null;
    latest: Frame | null = null;
    framesDropped = 0;
    warnings: string[] = [];
    settings: RenderSettings = { wireframe: false, weightMode: -1 };

    /** Modes/bones drawn, after the attribute-packing caps. */
    get drawnModes(): number {
        return this.header ? Math.min(this.header.m, MAX_MODES) : 0;
    }

    get drawnBones(): number {
        return this.header ? Math.min(this.header.b, MAX_BONES) : 0;
    }

    applySetup(header: SetupHeader, payload: SetupPayload): void {
        this.header = header;
        this.payload = payload;
        this.latest = null;
        this.framesDropped = 0;
        if (header.m > MAX_MODES) {
            this.warnings.push(
                `service sent ${header.m} modes; viewer draws the first `
                + `${MAX_MODES} (attribute cap)`);
        }
        if (header.b > MAX_BONES) {
            this.warnings.push(
                `service sent ${header.b} bones; viewer draws the first `
                + `${MAX_BONES} (attribute cap)`);
        }
    }

    /** Keep only the newest frame; returns true when the slot changed. */
    offerFrame(frame: Frame): boolean {
        if (this.latest && frame.step <= this.latest.step) {
            this.framesDropped++;
            return false;
        }
        this.latest = frame;
        return true;
    }

    setWeightMode(mode: number): void {
        // out-of-range indices clamp rather than error
        const top = this.drawnModes - 1;
        this.settings.weightMode = mode < 0 ? -1 : Math.min(mode, top);
    }
}
