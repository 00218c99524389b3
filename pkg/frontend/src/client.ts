// Websocket session client: setup handshake, frame stream, outgoing rig
// updates throttled to one per animation frame.

import {
    Frame, SetupHeader, SetupPayload, TAG_FRAME, TAG_SETUP,
    decodeFrame, decodeSetup, resetMessage, setParamsMessage,
} from './protocol.js';

export interface ClientCallbacks {
    onSetup(header: SetupHeader, payload: SetupPayload): void;
    onFrame(frame: Frame): void;
    onNotice(kind: 'error' | 'warning' | 'status', message: string): void;
}

export class SessionClient {
    private ws: WebSocket | null = null;
    private header: SetupHeader | null = null;
    private pendingParams: Float64Array | null = null;
    private sendScheduled = false;
    private closed = false;

    constructor(private url: string, private callbacks: ClientCallbacks) {}

    connect(): void {
        this.closed = false;
        this.header = null;
        const ws = new WebSocket(this.url);
        ws.binaryType = 'arraybuffer';
        this.ws = ws;
        ws.onopen = () => this.callbacks.onNotice('status', `connected to ${this.url}`);
        ws.onmessage = (ev) => this.handleMessage(ev.data);
        ws.onerror = () => this.callbacks.onNotice('error', 'websocket error');
        ws.onclose = () => {
            this.callbacks.onNotice('status', 'disconnected');
            if (!this.closed) setTimeout(() => this.connect(), 1000);
        };
    }

    close(): void {
        this.closed = true;
        this.ws?.close();
    }

    private handleMessage(data: string | ArrayBuffer): void {
        if (typeof data === 'string') {
            const msg = JSON.parse(data);
            if (msg.type === 'setup') {
                this.header = msg as SetupHeader;
            } else if (msg.type === 'error' || msg.type === 'warning') {
                this.callbacks.onNotice(msg.type, msg.message);
            }
            return;
        }
        if (!this.header) return;
        const tag = new DataView(data).getUint8(0);
        if (tag === TAG_SETUP) {
            this.callbacks.onSetup(this.header, decodeSetup(this.header, data));
        } else if (tag === TAG_FRAME) {
            this.callbacks.onFrame(decodeFrame(this.header, data));
        }
        // unknown tags are ignored
    }

    /** Queue rig parameters; at most one set_params goes out per rAF. */
    sendParams(p: Float64Array): void {
        this.pendingParams = p;
        if (this.sendScheduled) return;
        this.sendScheduled = true;
        requestAnimationFrame(() => {
            this.sendScheduled = false;
            if (this.pendingParams && this.ws?.readyState === WebSocket.OPEN) {
                this.ws.send(setParamsMessage(this.pendingParams));
                this.pendingParams = null;
            }
        });
    }

    sendReset(): void {
        if (this.ws?.readyState === WebSocket.OPEN) this.ws.send(resetMessage());
    }
}
