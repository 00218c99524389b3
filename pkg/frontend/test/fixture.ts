// Shared access to the backend-generated fixture.

import { readFileSync } from 'node:fs';
import { fileURLToPath } from 'node:url';

import { SetupHeader } from '../src/protocol.js';

const path = fileURLToPath(new URL('./fixtures/session.json', import.meta.url));
export const fixture = JSON.parse(readFileSync(path, 'utf-8'));

export const header: SetupHeader = fixture.header;

function b64ToBuffer(b64: string): ArrayBuffer {
    const raw = Buffer.from(b64, 'base64');
    return raw.buffer.slice(raw.byteOffset, raw.byteOffset + raw.byteLength);
}

export const setupBytes = b64ToBuffer(fixture.setup_b64);
export const frameBytes = b64ToBuffer(fixture.frame_b64);
