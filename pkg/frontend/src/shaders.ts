// GLSL ES 3.0 sources for the dual-LBS vertex program.
//
// Both skinning passes run on the GPU: the CPU never touches per-vertex
// positions.  Secondary weights arrive packed four per vec4 attribute
// (MAX_MODES = 16 -> 4 attributes); rig weights use up to 2 attributes.
// Transforms are uniform vec4 rows (3 rows per 3x4 displacement
// transform), refreshed once per draw call from the latest frame's z/p.

export const MAX_MODES = 16;
export const MAX_BONES = 8;
export const SEC_ATTRIBS = MAX_MODES / 4;
export const RIG_ATTRIBS = MAX_BONES / 4;

export function vertexShaderSource(): string {
    return `#version 300 es
precision highp float;

in vec3 aRest;
in vec4 aSecW0;
in vec4 aSecW1;
in vec4 aSecW2;
in vec4 aSecW3;
in vec4 aRigW0;
in vec4 aRigW1;

uniform vec4 uSecRows[${3 * MAX_MODES}];
uniform vec4 uRigRows[${3 * MAX_BONES}];
uniform int uNumModes;
uniform int uNumBones;
uniform mat4 uViewProj;
uniform int uWeightMode;      // -1 = material shading, else mode index
uniform float uWeightScale;   // 1 / max|W_k| for the selected mode

out vec3 vWorld;
out float vWeight;

float secWeight(int k) {
    vec4 block = k < 4 ? aSecW0 : k < 8 ? aSecW1 : k < 12 ? aSecW2 : aSecW3;
    return block[k & 3];
}

float rigWeight(int b) {
    vec4 block = b < 4 ? aRigW0 : aRigW1;
    return block[b & 3];
}

vec3 applyRows(int row, vec4 X) {
    return vec3(dot(uSecRows[row], X), dot(uSecRows[row + 1], X),
                dot(uSecRows[row + 2], X));
}

vec3 applyRigRows(int row, vec4 X) {
    return vec3(dot(uRigRows[row], X), dot(uRigRows[row + 1], X),
                dot(uRigRows[row + 2], X));
}

void main() {
    vec4 X = vec4(aRest, 1.0);
    vec3 pos = aRest;
    for (int b = 0; b < ${MAX_BONES}; b++) {
        if (b >= uNumBones) break;
        pos += rigWeight(b) * applyRigRows(3 * b, X);
    }
    for (int k = 0; k < ${MAX_MODES}; k++) {
        if (k >= uNumModes) break;
        pos += secWeight(k) * applyRows(3 * k, X);
    }
    vWorld = pos;
    vWeight = uWeightMode >= 0 ? secWeight(uWeightMode) * uWeightScale : 0.0;
    gl_Position = uViewProj * vec4(pos, 1.0);
}
`;
}

export function fragmentShaderSource(): string {
    return `#version 300 es
precision highp float;

in vec3 vWorld;
in float vWeight;
uniform int uWeightMode;
uniform vec3 uBaseColor;
out vec4 fragColor;

// symmetric blue-white-red map over [-1, 1]
vec3 diverging(float t) {
    t = clamp(t, -1.0, 1.0);
    vec3 lo = vec3(0.19, 0.31, 0.97);
    vec3 mid = vec3(0.95, 0.95, 0.95);
    vec3 hi = vec3(0.86, 0.15, 0.15);
    return t < 0.0 ? mix(mid, lo, -t) : mix(mid, hi, t);
}

void main() {
    vec3 normal = normalize(cross(dFdx(vWorld), dFdy(vWorld)));
    float light = 0.35 + 0.65 * abs(normal.z);
    vec3 base = uWeightMode >= 0 ? diverging(vWeight) : uBaseColor;
    fragColor = vec4(light * base, 1.0);
}
`;
}
