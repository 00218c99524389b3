// WebGL2 surface renderer: both skinning passes live in the vertex
// shader; per-frame CPU work is limited to uploading z/p as uniform rows.

import { Frame, SetupHeader, SetupPayload } from './protocol.js';
import { modeScale } from './colormap.js';
import {
    MAX_BONES, MAX_MODES, RIG_ATTRIBS, SEC_ATTRIBS,
    fragmentShaderSource, vertexShaderSource,
} from './shaders.js';
import { RenderSettings } from './state.js';

function compile(gl: WebGL2RenderingContext, type: number, src: string): WebGLShader {
    const shader = gl.createShader(type)!;
    gl.shaderSource(shader, src);
    gl.compileShader(shader);
    if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
        throw new Error(`shader compile failed: ${gl.getShaderInfoLog(shader)}`);
    }
    return shader;
}

/** Zero-padded packing of per-vertex weights into vec4 attribute blocks. */
export function packWeights(weights: Float32Array, perVertex: number,
                            blocks: number): Float32Array {
    const n = perVertex > 0 ? weights.length / perVertex : weights.length;
    const out = new Float32Array(4 * blocks * n);
    const kept = Math.min(perVertex, 4 * blocks);
    for (let i = 0; i < n; i++) {
        for (let k = 0; k < kept; k++) {
            out[4 * blocks * i + k] = weights[i * perVertex + k];
        }
    }
    return out;
}

export class Renderer {
    private program: WebGLProgram;
    private vao: WebGLVertexArrayObject;
    private triCount = 0;
    private lineCount = 0;
    private lineIndexBuffer: WebGLBuffer;
    private triIndexBuffer: WebGLBuffer;
    private uniforms: Record<string, WebGLUniformLocation | null> = {};
    private secRows = new Float32Array(4 * 3 * MAX_MODES);
    private rigRows = new Float32Array(4 * 3 * MAX_BONES);
    private nModes: number;
    private nBones: number;
    private weightScales: number[] = [];

    constructor(private gl: WebGL2RenderingContext,
                header: SetupHeader, payload: SetupPayload) {
        this.nModes = Math.min(header.m, MAX_MODES);
        this.nBones = Math.min(header.b, MAX_BONES);

        const vs = compile(gl, gl.VERTEX_SHADER, vertexShaderSource());
        const fs = compile(gl, gl.FRAGMENT_SHADER, fragmentShaderSource());
        this.program = gl.createProgram()!;
        gl.attachShader(this.program, vs);
        gl.attachShader(this.program, fs);
        gl.linkProgram(this.program);
        if (!gl.getProgramParameter(this.program, gl.LINK_STATUS)) {
            throw new Error(`program link failed: ${gl.getProgramInfoLog(this.program)}`);
        }
        for (const name of ['uSecRows', 'uRigRows', 'uNumModes', 'uNumBones',
                            'uViewProj', 'uWeightMode', 'uWeightScale',
                            'uBaseColor']) {
            this.uniforms[name] = gl.getUniformLocation(this.program, name);
        }

        this.vao = gl.createVertexArray()!;
        gl.bindVertexArray(this.vao);
        this.attrib('aRest', payload.restPositions, 3);
        const sec = packWeights(payload.secondaryWeights, header.m, SEC_ATTRIBS);
        const rig = packWeights(payload.rigWeights, header.b, RIG_ATTRIBS);
        const ns = header.n_surface;
        for (let blk = 0; blk < SEC_ATTRIBS; blk++) {
            this.attribStrided(`aSecW${blk}`, sec, 4 * SEC_ATTRIBS, 4 * blk, ns);
        }
        for (let blk = 0; blk < RIG_ATTRIBS; blk++) {
            this.attribStrided(`aRigW${blk}`, rig, 4 * RIG_ATTRIBS, 4 * blk, ns);
        }

        this.triIndexBuffer = gl.createBuffer()!;
        gl.bindBuffer(gl.ELEMENT_ARRAY_BUFFER, this.triIndexBuffer);
        gl.bufferData(gl.ELEMENT_ARRAY_BUFFER, payload.triangles, gl.STATIC_DRAW);
        this.triCount = payload.triangles.length;

        const lines = new Uint32Array(2 * payload.triangles.length);
        for (let t = 0; t < payload.triangles.length / 3; t++) {
            const [a, b, c] = payload.triangles.subarray(3 * t, 3 * t + 3);
            lines.set([a, b, b, c, c, a], 6 * t);
        }
        this.lineIndexBuffer = gl.createBuffer()!;
        gl.bindBuffer(gl.ELEMENT_ARRAY_BUFFER, this.lineIndexBuffer);
        gl.bufferData(gl.ELEMENT_ARRAY_BUFFER, lines, gl.STATIC_DRAW);
        this.lineCount = lines.length;

        for (let k = 0; k < this.nModes; k++) {
            this.weightScales.push(modeScale(payload.secondaryWeights, header.m, k));
        }
        gl.bindVertexArray(null);
        gl.enable(gl.DEPTH_TEST);
    }

    private attrib(name: string, data: Float32Array, size: number): void {
        const gl = this.gl;
        const loc = gl.getAttribLocation(this.program, name);
        if (loc < 0) return;
        const buf = gl.createBuffer()!;
        gl.bindBuffer(gl.ARRAY_BUFFER, buf);
        gl.bufferData(gl.ARRAY_BUFFER, data, gl.STATIC_DRAW);
        gl.enableVertexAttribArray(loc);
        gl.vertexAttribPointer(loc, size, gl.FLOAT, false, 0, 0);
    }

    private attribStrided(name: string, data: Float32Array, stride: number,
                          offset: number, _count: number): void {
        const gl = this.gl;
        const loc = gl.getAttribLocation(this.program, name);
        if (loc < 0) return;
        const buf = gl.createBuffer()!;
        gl.bindBuffer(gl.ARRAY_BUFFER, buf);
        gl.bufferData(gl.ARRAY_BUFFER, data, gl.STATIC_DRAW);
        gl.enableVertexAttribArray(loc);
        gl.vertexAttribPointer(loc, 4, gl.FLOAT, false, 4 * stride, 4 * offset);
    }

    /** Bind the newest frame's reduced coordinates as uniforms and draw. */
    draw(frame: Frame | null, viewProj: Float32Array,
         settings: RenderSettings): void {
        const gl = this.gl;
        gl.clearColor(0.08, 0.09, 0.11, 1.0);
        gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
        gl.useProgram(this.program);
        gl.bindVertexArray(this.vao);

        this.secRows.fill(0);
        this.rigRows.fill(0);
        if (frame) {
            this.secRows.set(frame.z.subarray(0, 12 * this.nModes));
            this.rigRows.set(frame.p.subarray(0, 12 * this.nBones));
        }
        gl.uniform4fv(this.uniforms.uSecRows, this.secRows);
        gl.uniform4fv(this.uniforms.uRigRows, this.rigRows);
        gl.uniform1i(this.uniforms.uNumModes, this.nModes);
        gl.uniform1i(this.uniforms.uNumBones, this.nBones);
        gl.uniformMatrix4fv(this.uniforms.uViewProj, false, viewProj);
        const mode = settings.weightMode;
        gl.uniform1i(this.uniforms.uWeightMode, mode);
        gl.uniform1f(this.uniforms.uWeightScale,
                     mode >= 0 ? this.weightScales[mode] : 0);
        gl.uniform3f(this.uniforms.uBaseColor, 0.55, 0.65, 0.8);

        if (settings.wireframe) {
            gl.bindBuffer(gl.ELEMENT_ARRAY_BUFFER, this.lineIndexBuffer);
            gl.drawElements(gl.LINES, this.lineCount, gl.UNSIGNED_INT, 0);
        } else {
            gl.bindBuffer(gl.ELEMENT_ARRAY_BUFFER, this.triIndexBuffer);
            gl.drawElements(gl.TRIANGLES, this.triCount, gl.UNSIGNED_INT, 0);
        }
        gl.bindVertexArray(null);
    }
}
