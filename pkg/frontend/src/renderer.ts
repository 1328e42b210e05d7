/**
 * WebGL2 view of the solved surface plus the skeleton overlay.
 *
 * The mesh vertex buffer is uploaded exactly as received from the wire;
 * all display transforms happen in the shader. Faceted shading comes from
 * screen-space derivatives so no per-frame normal computation touches the
 * buffer either.
 */

import type { Vec3 } from "./quat.js";

const MESH_VS = `#version 300 es
layout(location = 0) in vec3 position;
uniform mat4 uProj;
uniform mat4 uView;
out vec3 vViewPos;
void main() {
  vec4 p = uView * vec4(position, 1.0);
  vViewPos = p.xyz;
  gl_Position = uProj * p;
}`;

const MESH_FS = `#version 300 es
precision highp float;
in vec3 vViewPos;
uniform vec3 uColor;
out vec4 outColor;
void main() {
  vec3 n = normalize(cross(dFdx(vViewPos), dFdy(vViewPos)));
  float diffuse = abs(n.z);
  vec3 shaded = uColor * (0.25 + 0.75 * diffuse);
  outColor = vec4(shaded, 1.0);
}`;

const OVERLAY_VS = `#version 300 es
layout(location = 0) in vec3 position;
uniform mat4 uProj;
uniform mat4 uView;
uniform float uPointSize;
void main() {
  gl_Position = uProj * uView * vec4(position, 1.0);
  gl_PointSize = uPointSize;
}`;

const OVERLAY_FS = `#version 300 es
precision highp float;
uniform vec3 uColor;
out vec4 outColor;
void main() { outColor = vec4(uColor, 1.0); }`;

function compile(gl: WebGL2RenderingContext, type: number, source: string): WebGLShader {
  const shader = gl.createShader(type)!;
  gl.shaderSource(shader, source);
  gl.compileShader(shader);
  if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
    throw new Error(`shader compile failed: ${gl.getShaderInfoLog(shader)}`);
  }
  return shader;
}

function link(gl: WebGL2RenderingContext, vs: string, fs: string): WebGLProgram {
  const program = gl.createProgram()!;
  gl.attachShader(program, compile(gl, gl.VERTEX_SHADER, vs));
  gl.attachShader(program, compile(gl, gl.FRAGMENT_SHADER, fs));
  gl.linkProgram(program);
  if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
    throw new Error(`program link failed: ${gl.getProgramInfoLog(program)}`);
  }
  return program;
}

function perspective(out: Float32Array, fovY: number, aspect: number, near: number, far: number) {
  const f = 1 / Math.tan(fovY / 2);
  out.fill(0);
  out[0] = f / aspect;
  out[5] = f;
  out[10] = (far + near) / (near - far);
  out[11] = -1;
  out[14] = (2 * far * near) / (near - far);
}

function lookAt(out: Float32Array, eye: Vec3, target: Vec3, up: Vec3) {
  let zx = eye[0] - target[0], zy = eye[1] - target[1], zz = eye[2] - target[2];
  const zl = Math.hypot(zx, zy, zz) || 1;
  zx /= zl; zy /= zl; zz /= zl;
  let xx = up[1] * zz - up[2] * zy;
  let xy = up[2] * zx - up[0] * zz;
  let xz = up[0] * zy - up[1] * zx;
  const xl = Math.hypot(xx, xy, xz) || 1;
  xx /= xl; xy /= xl; xz /= xl;
  const yx = zy * xz - zz * xy;
  const yy = zz * xx - zx * xz;
  const yz = zx * xy - zy * xx;
  out.set([
    xx, yx, zx, 0,
    xy, yy, zy, 0,
    xz, yz, zz, 0,
    -(xx * eye[0] + xy * eye[1] + xz * eye[2]),
    -(yx * eye[0] + yy * eye[1] + yz * eye[2]),
    -(zx * eye[0] + zy * eye[1] + zz * eye[2]),
    1,
  ]);
}

interface Orbit {
  yaw: number;
  pitch: number;
  distance: number;
  target: Vec3;
}

export class Renderer {
  private gl: WebGL2RenderingContext;
  private canvas: HTMLCanvasElement;
  private meshProgram: WebGLProgram;
  private overlayProgram: WebGLProgram;
  private meshVao: WebGLVertexArrayObject;
  private meshVbo: WebGLBuffer;
  private meshIbo: WebGLBuffer;
  private indexCount = 0;
  private jointVao: WebGLVertexArrayObject;
  private jointVbo: WebGLBuffer;
  private jointCount = 0;
  private boneVao: WebGLVertexArrayObject;
  private boneVbo: WebGLBuffer;
  private boneVertexCount = 0;
  private proj = new Float32Array(16);
  private view = new Float32Array(16);
  private orbit: Orbit = { yaw: 0.6, pitch: 0.35, distance: 8, target: [0, 0, 0] };

  constructor(canvas: HTMLCanvasElement) {
    const gl = canvas.getContext("webgl2", { antialias: true });
    if (!gl) {
      throw new Error("WebGL2 is not available in this browser");
    }
    this.gl = gl;
    this.canvas = canvas;
    this.meshProgram = link(gl, MESH_VS, MESH_FS);
    this.overlayProgram = link(gl, OVERLAY_VS, OVERLAY_FS);
    this.meshVao = gl.createVertexArray()!;
    this.meshVbo = gl.createBuffer()!;
    this.meshIbo = gl.createBuffer()!;
    this.jointVao = gl.createVertexArray()!;
    this.jointVbo = gl.createBuffer()!;
    this.boneVao = gl.createVertexArray()!;
    this.boneVbo = gl.createBuffer()!;
    gl.enable(gl.DEPTH_TEST);
    gl.clearColor(0.02, 0.02, 0.03, 1);
    this.installControls();
  }

  /** Upload the surface topology once and the rest positions. */
  setMesh(positions: Float32Array, indices: Uint32Array): void {
    const gl = this.gl;
    gl.bindVertexArray(this.meshVao);
    gl.bindBuffer(gl.ARRAY_BUFFER, this.meshVbo);
    gl.bufferData(gl.ARRAY_BUFFER, positions, gl.DYNAMIC_DRAW);
    gl.enableVertexAttribArray(0);
    gl.vertexAttribPointer(0, 3, gl.FLOAT, false, 0, 0);
    gl.bindBuffer(gl.ELEMENT_ARRAY_BUFFER, this.meshIbo);
    gl.bufferData(gl.ELEMENT_ARRAY_BUFFER, indices, gl.STATIC_DRAW);
    gl.bindVertexArray(null);
    this.indexCount = indices.length;
    this.frameMesh(positions);
  }

  /** Swap in a solved frame, bytes exactly as received. */
  updatePositions(positions: Float32Array): void {
    const gl = this.gl;
    gl.bindBuffer(gl.ARRAY_BUFFER, this.meshVbo);
    gl.bufferSubData(gl.ARRAY_BUFFER, 0, positions);
  }

  setSkeleton(joints: Vec3[], bones: [number, number][]): void {
    const gl = this.gl;
    const jointData = new Float32Array(joints.length * 3);
    joints.forEach((p, i) => jointData.set(p, 3 * i));
    gl.bindVertexArray(this.jointVao);
    gl.bindBuffer(gl.ARRAY_BUFFER, this.jointVbo);
    gl.bufferData(gl.ARRAY_BUFFER, jointData, gl.DYNAMIC_DRAW);
    gl.enableVertexAttribArray(0);
    gl.vertexAttribPointer(0, 3, gl.FLOAT, false, 0, 0);
    this.jointCount = joints.length;

    const boneData = new Float32Array(bones.length * 6);
    bones.forEach(([a, b], i) => {
      boneData.set(joints[a], 6 * i);
      boneData.set(joints[b], 6 * i + 3);
    });
    gl.bindVertexArray(this.boneVao);
    gl.bindBuffer(gl.ARRAY_BUFFER, this.boneVbo);
    gl.bufferData(gl.ARRAY_BUFFER, boneData, gl.DYNAMIC_DRAW);
    gl.enableVertexAttribArray(0);
    gl.vertexAttribPointer(0, 3, gl.FLOAT, false, 0, 0);
    gl.bindVertexArray(null);
    this.boneVertexCount = bones.length * 2;
  }

  draw(): void {
    const gl = this.gl;
    this.resizeToDisplay();
    gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);

    const aspect = this.canvas.width / Math.max(this.canvas.height, 1);
    perspective(this.proj, Math.PI / 4, aspect, 0.01, 200);
    const { yaw, pitch, distance, target } = this.orbit;
    const eye: Vec3 = [
      target[0] + distance * Math.cos(pitch) * Math.sin(yaw),
      target[1] + distance * Math.sin(pitch),
      target[2] + distance * Math.cos(pitch) * Math.cos(yaw),
    ];
    lookAt(this.view, eye, target, [0, 1, 0]);

    gl.useProgram(this.meshProgram);
    gl.uniformMatrix4fv(gl.getUniformLocation(this.meshProgram, "uProj"), false, this.proj);
    gl.uniformMatrix4fv(gl.getUniformLocation(this.meshProgram, "uView"), false, this.view);
    gl.uniform3f(gl.getUniformLocation(this.meshProgram, "uColor"), 0.42, 0.72, 0.92);
    gl.bindVertexArray(this.meshVao);
    gl.drawElements(gl.TRIANGLES, this.indexCount, gl.UNSIGNED_INT, 0);

    gl.useProgram(this.overlayProgram);
    gl.uniformMatrix4fv(gl.getUniformLocation(this.overlayProgram, "uProj"), false, this.proj);
    gl.uniformMatrix4fv(gl.getUniformLocation(this.overlayProgram, "uView"), false, this.view);
    gl.disable(gl.DEPTH_TEST);
    gl.uniform1f(gl.getUniformLocation(this.overlayProgram, "uPointSize"), 1);
    gl.uniform3f(gl.getUniformLocation(this.overlayProgram, "uColor"), 1.0, 1.0, 1.0);
    gl.bindVertexArray(this.boneVao);
    gl.drawArrays(gl.LINES, 0, this.boneVertexCount);
    gl.uniform1f(gl.getUniformLocation(this.overlayProgram, "uPointSize"), 9);
    gl.uniform3f(gl.getUniformLocation(this.overlayProgram, "uColor"), 1.0, 0.78, 0.35);
    gl.bindVertexArray(this.jointVao);
    gl.drawArrays(gl.POINTS, 0, this.jointCount);
    gl.enable(gl.DEPTH_TEST);
    gl.bindVertexArray(null);
  }

  private frameMesh(positions: Float32Array): void {
    const lo = [Infinity, Infinity, Infinity];
    const hi = [-Infinity, -Infinity, -Infinity];
    for (let i = 0; i < positions.length; i += 3) {
      for (let k = 0; k < 3; k++) {
        lo[k] = Math.min(lo[k], positions[i + k]);
        hi[k] = Math.max(hi[k], positions[i + k]);
      }
    }
    this.orbit.target = [
      (lo[0] + hi[0]) / 2,
      (lo[1] + hi[1]) / 2,
      (lo[2] + hi[2]) / 2,
    ];
    const span = Math.hypot(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]) || 1;
    this.orbit.distance = 1.6 * span;
  }

  private resizeToDisplay(): void {
    const dpr = Math.min(window.devicePixelRatio || 1, 2);
    const width = Math.max(1, Math.round(this.canvas.clientWidth * dpr));
    const height = Math.max(1, Math.round(this.canvas.clientHeight * dpr));
    if (this.canvas.width !== width || this.canvas.height !== height) {
      this.canvas.width = width;
      this.canvas.height = height;
      this.gl.viewport(0, 0, width, height);
    }
  }

  private installControls(): void {
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    this.canvas.addEventListener("pointerdown", (e) => {
      dragging = true;
      lastX = e.clientX;
      lastY = e.clientY;
      this.canvas.setPointerCapture(e.pointerId);
    });
    this.canvas.addEventListener("pointermove", (e) => {
      if (!dragging) return;
      this.orbit.yaw -= (e.clientX - lastX) * 0.008;
      this.orbit.pitch = Math.min(
        1.5,
        Math.max(-1.5, this.orbit.pitch + (e.clientY - lastY) * 0.008),
      );
      lastX = e.clientX;
      lastY = e.clientY;
    });
    const stop = (e: PointerEvent) => {
      dragging = false;
      if (this.canvas.hasPointerCapture(e.pointerId)) {
        this.canvas.releasePointerCapture(e.pointerId);
      }
    };
    this.canvas.addEventListener("pointerup", stop);
    this.canvas.addEventListener("pointercancel", stop);
    this.canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.orbit.distance *= Math.exp(e.deltaY * 0.001);
      this.orbit.distance = Math.min(100, Math.max(0.2, this.orbit.distance));
    }, { passive: false });
  }
}
