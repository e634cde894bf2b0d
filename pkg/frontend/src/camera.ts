// Orbit camera over the voxel box plus the small amount of column-major
// mat4 arithmetic the renderer needs.  Y is up; the camera rides a sphere
// around a pannable target point.

import { Vec3 } from "./pick.js";

export function cross(a: Vec3, b: Vec3): [number, number, number] {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

export function normalize(v: Vec3): [number, number, number] {
  const n = Math.hypot(v[0], v[1], v[2]);
  return n === 0 ? [0, 0, 0] : [v[0] / n, v[1] / n, v[2] / n];
}

export function lookAt(eye: Vec3, target: Vec3, up: Vec3): Float32Array {
  const f = normalize([target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]]);
  const r = normalize(cross(f, up));
  const u = cross(r, f);
  const dot = (a: Vec3, b: Vec3) => a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  // prettier-ignore
  return new Float32Array([
    r[0], u[0], -f[0], 0,
    r[1], u[1], -f[1], 0,
    r[2], u[2], -f[2], 0,
    -dot(r, eye), -dot(u, eye), dot(f, eye), 1,
  ]);
}

export function perspective(fovY: number, aspect: number, near: number, far: number): Float32Array {
  const f = 1 / Math.tan(fovY / 2);
  const d = 1 / (near - far);
  // prettier-ignore
  return new Float32Array([
    f / aspect, 0, 0, 0,
    0, f, 0, 0,
    0, 0, (near + far) * d, -1,
    0, 0, 2 * near * far * d, 0,
  ]);
}

export function mat4mul(a: Float32Array, b: Float32Array): Float32Array {
  const out = new Float32Array(16);
  for (let c = 0; c < 4; c++) {
    for (let r = 0; r < 4; r++) {
      let s = 0;
      for (let k = 0; k < 4; k++) s += a[k * 4 + r] * b[c * 4 + k];
      out[c * 4 + r] = s;
    }
  }
  return out;
}

const MIN_PHI = 0.05;
const ORBIT_RATE = 0.008; // radians per pixel
const PAN_RATE = 0.0016; // fraction of radius per pixel
const ZOOM_RATE = 0.0012;

export class OrbitCamera {
  theta = 0.7; // azimuth around +y
  phi = 1.1; // polar angle from +y, clamped off the poles
  radius: number;
  target: [number, number, number];
  readonly fovY = (45 * Math.PI) / 180;
  readonly minRadius: number;
  readonly maxRadius: number;

  constructor(target: Vec3, radius: number) {
    this.target = [target[0], target[1], target[2]];
    this.radius = radius;
    this.minRadius = radius * 0.1;
    this.maxRadius = radius * 8;
  }

  eye(): [number, number, number] {
    const s = Math.sin(this.phi) * this.radius;
    return [
      this.target[0] + s * Math.cos(this.theta),
      this.target[1] + Math.cos(this.phi) * this.radius,
      this.target[2] + s * Math.sin(this.theta),
    ];
  }

  basis(): { forward: Vec3; right: Vec3; up: Vec3 } {
    const e = this.eye();
    const forward = normalize([
      this.target[0] - e[0],
      this.target[1] - e[1],
      this.target[2] - e[2],
    ]);
    const right = normalize(cross(forward, [0, 1, 0]));
    const up = cross(right, forward);
    return { forward, right, up };
  }

  orbit(dxPx: number, dyPx: number): void {
    this.theta += dxPx * ORBIT_RATE;
    this.phi = Math.min(Math.PI - MIN_PHI, Math.max(MIN_PHI, this.phi + dyPx * ORBIT_RATE));
  }

  pan(dxPx: number, dyPx: number): void {
    const { right, up } = this.basis();
    const s = this.radius * PAN_RATE;
    // dragging pulls the scene with the cursor, so the target moves opposite
    this.target[0] -= (right[0] * dxPx - up[0] * dyPx) * s;
    this.target[1] -= (right[1] * dxPx - up[1] * dyPx) * s;
    this.target[2] -= (right[2] * dxPx - up[2] * dyPx) * s;
  }

  zoom(deltaY: number): void {
    this.radius = Math.min(
      this.maxRadius,
      Math.max(this.minRadius, this.radius * Math.exp(deltaY * ZOOM_RATE)),
    );
  }

  viewProj(aspect: number): Float32Array {
    const near = Math.max(0.01, this.minRadius * 0.1);
    const far = this.maxRadius * 4;
    return mat4mul(
      perspective(this.fovY, aspect, near, far),
      lookAt(this.eye(), this.target, [0, 1, 0]),
    );
  }

  /** World-space picking ray through normalized device coords
   * (ndcX, ndcY both in [-1, 1], +y up). */
  rayThrough(ndcX: number, ndcY: number, aspect: number): { origin: Vec3; dir: Vec3 } {
    const { forward, right, up } = this.basis();
    const h = Math.tan(this.fovY / 2);
    const dir = normalize([
      forward[0] + (ndcX * aspect * right[0] + ndcY * up[0]) * h,
      forward[1] + (ndcX * aspect * right[1] + ndcY * up[1]) * h,
      forward[2] + (ndcX * aspect * right[2] + ndcY * up[2]) * h,
    ]);
    return { origin: this.eye(), dir };
  }
}
