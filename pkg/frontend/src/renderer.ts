// WebGL drawing: one unlit vertex-colored program shared by the coarse
// grid (triangle soup, editing mode) and the generated surface (indexed
// mesh, viewing mode).

import { OrbitCamera } from "./camera.js";
import { DecodedMesh } from "./protocol.js";
import { GridMesh } from "./voxmesh.js";

const VS = `
attribute vec3 aPos;
attribute vec3 aColor;
uniform mat4 uViewProj;
varying vec3 vColor;
void main() {
  vColor = aColor;
  gl_Position = uViewProj * vec4(aPos, 1.0);
}
`;

const FS = `
precision mediump float;
varying vec3 vColor;
void main() {
  gl_FragColor = vec4(vColor, 1.0);
}
`;

function compile(gl: WebGLRenderingContext, kind: number, src: string): WebGLShader {
  const shader = gl.createShader(kind);
  if (!shader) throw new Error("createShader failed");
  gl.shaderSource(shader, src);
  gl.compileShader(shader);
  if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
    throw new Error(`shader compile failed: ${gl.getShaderInfoLog(shader)}`);
  }
  return shader;
}

interface Batch {
  pos: WebGLBuffer;
  color: WebGLBuffer;
  index: WebGLBuffer | null;
  count: number; // vertices (index null) or indices
}

export class Renderer {
  private readonly gl: WebGLRenderingContext;
  private readonly canvas: HTMLCanvasElement;
  private readonly program: WebGLProgram;
  private readonly aPos: number;
  private readonly aColor: number;
  private readonly uViewProj: WebGLUniformLocation;
  private grid: Batch | null = null;
  private detail: Batch | null = null;

  constructor(canvas: HTMLCanvasElement) {
    this.canvas = canvas;
    // WebGL2 gives u32 indices for free; fall back to WebGL1 + extension
    const gl = (canvas.getContext("webgl2") ??
      canvas.getContext("webgl")) as WebGLRenderingContext | null;
    if (!gl) throw new Error("WebGL unavailable");
    if (!(typeof WebGL2RenderingContext !== "undefined" && gl instanceof WebGL2RenderingContext)) {
      if (!gl.getExtension("OES_element_index_uint")) {
        throw new Error("32-bit mesh indices unsupported here");
      }
    }
    this.gl = gl;
    const program = gl.createProgram();
    if (!program) throw new Error("createProgram failed");
    gl.attachShader(program, compile(gl, gl.VERTEX_SHADER, VS));
    gl.attachShader(program, compile(gl, gl.FRAGMENT_SHADER, FS));
    gl.linkProgram(program);
    if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
      throw new Error(`program link failed: ${gl.getProgramInfoLog(program)}`);
    }
    this.program = program;
    this.aPos = gl.getAttribLocation(program, "aPos");
    this.aColor = gl.getAttribLocation(program, "aColor");
    const loc = gl.getUniformLocation(program, "uViewProj");
    if (!loc) throw new Error("uViewProj missing");
    this.uViewProj = loc;
    gl.enable(gl.DEPTH_TEST);
    gl.clearColor(0.09, 0.1, 0.12, 1.0);
  }

  private upload(data: Float32Array | Uint32Array, target: number): WebGLBuffer {
    const gl = this.gl;
    const buf = gl.createBuffer();
    if (!buf) throw new Error("createBuffer failed");
    gl.bindBuffer(target, buf);
    gl.bufferData(target, data, gl.STATIC_DRAW);
    return buf;
  }

  private dropBatch(batch: Batch | null): void {
    if (!batch) return;
    this.gl.deleteBuffer(batch.pos);
    this.gl.deleteBuffer(batch.color);
    if (batch.index) this.gl.deleteBuffer(batch.index);
  }

  setGridMesh(mesh: GridMesh): void {
    this.dropBatch(this.grid);
    this.grid = {
      pos: this.upload(mesh.positions, this.gl.ARRAY_BUFFER),
      color: this.upload(mesh.colors, this.gl.ARRAY_BUFFER),
      index: null,
      count: mesh.vertexCount,
    };
  }

  /** Upload the generated surface.  `scale` maps fine-grid vertex units
   * into coarse voxel units so both modes share one world space. */
  setDetailMesh(mesh: DecodedMesh, scale: number): void {
    const pos = new Float32Array(mesh.vertices.length);
    for (let i = 0; i < pos.length; i++) pos[i] = mesh.vertices[i] * scale;
    const color = new Float32Array(mesh.colors.length);
    for (let i = 0; i < color.length; i++) color[i] = mesh.colors[i] / 255;
    this.dropBatch(this.detail);
    this.detail = {
      pos: this.upload(pos, this.gl.ARRAY_BUFFER),
      color: this.upload(color, this.gl.ARRAY_BUFFER),
      index: this.upload(mesh.triangles, this.gl.ELEMENT_ARRAY_BUFFER),
      count: mesh.triangles.length,
    };
  }

  get hasDetailMesh(): boolean {
    return this.detail !== null;
  }

  resize(): boolean {
    const dpr = window.devicePixelRatio || 1;
    const w = Math.max(1, Math.round(this.canvas.clientWidth * dpr));
    const h = Math.max(1, Math.round(this.canvas.clientHeight * dpr));
    if (this.canvas.width === w && this.canvas.height === h) return false;
    this.canvas.width = w;
    this.canvas.height = h;
    return true;
  }

  aspect(): number {
    return this.canvas.width / Math.max(1, this.canvas.height);
  }

  draw(camera: OrbitCamera, mode: "editing" | "viewing"): void {
    const gl = this.gl;
    gl.viewport(0, 0, this.canvas.width, this.canvas.height);
    gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
    const batch = mode === "editing" ? this.grid : this.detail;
    if (!batch || batch.count === 0) return;
    gl.useProgram(this.program);
    gl.uniformMatrix4fv(this.uViewProj, false, camera.viewProj(this.aspect()));
    gl.bindBuffer(gl.ARRAY_BUFFER, batch.pos);
    gl.enableVertexAttribArray(this.aPos);
    gl.vertexAttribPointer(this.aPos, 3, gl.FLOAT, false, 0, 0);
    gl.bindBuffer(gl.ARRAY_BUFFER, batch.color);
    gl.enableVertexAttribArray(this.aColor);
    gl.vertexAttribPointer(this.aColor, 3, gl.FLOAT, false, 0, 0);
    if (batch.index) {
      gl.bindBuffer(gl.ELEMENT_ARRAY_BUFFER, batch.index);
      gl.drawElements(gl.TRIANGLES, batch.count, gl.UNSIGNED_INT, 0);
    } else {
      gl.drawArrays(gl.TRIANGLES, 0, batch.count);
    }
  }
}
