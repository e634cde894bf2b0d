// Local mirror of the server's coarse occupancy grid.  Layout is C order
// over dims (X, Y, Z) so digests and brush edits agree with the server
// exactly; every divergence shows up as a digest mismatch on the next ack.

import { BRUSH_SIZES, BrushSize, Dims, bytesFromBase64, gridDigest } from "./protocol.js";

export class VoxelGrid {
  readonly dims: Dims;
  readonly data: Uint8Array;

  constructor(dims: Dims, data?: Uint8Array) {
    const [x, y, z] = dims;
    if (!Number.isInteger(x) || !Number.isInteger(y) || !Number.isInteger(z)
        || x <= 0 || y <= 0 || z <= 0) {
      throw new RangeError(`bad grid dims ${JSON.stringify(dims)}`);
    }
    this.dims = [x, y, z];
    if (data !== undefined) {
      if (data.length !== x * y * z) {
        throw new RangeError(`expected ${x * y * z} voxel bytes, got ${data.length}`);
      }
      this.data = data;
    } else {
      this.data = new Uint8Array(x * y * z);
    }
  }

  static fromBase64(dims: Dims, b64: string): VoxelGrid {
    return new VoxelGrid(dims, bytesFromBase64(b64));
  }

  index(x: number, y: number, z: number): number {
    return (x * this.dims[1] + y) * this.dims[2] + z;
  }

  inBounds(x: number, y: number, z: number): boolean {
    return x >= 0 && x < this.dims[0]
        && y >= 0 && y < this.dims[1]
        && z >= 0 && z < this.dims[2];
  }

  get(x: number, y: number, z: number): number {
    return this.data[this.index(x, y, z)];
  }

  set(x: number, y: number, z: number, value: 0 | 1): void {
    this.data[this.index(x, y, z)] = value;
  }

  count(): number {
    let n = 0;
    for (let i = 0; i < this.data.length; i++) n += this.data[i];
    return n;
  }

  digest(): string {
    return gridDigest(this.dims, this.data);
  }

  clone(): VoxelGrid {
    return new VoxelGrid(this.dims, this.data.slice());
  }

  // adopt an authoritative snapshot (session create or reconnect refetch)
  setFromBytes(bytes: Uint8Array): void {
    if (bytes.length !== this.data.length) {
      throw new RangeError(`expected ${this.data.length} voxel bytes, got ${bytes.length}`);
    }
    this.data.set(bytes);
  }
}

/** Set or clear the cubic block of edge `brush` centered on `center`,
 * clipped to the grid.  The center itself must be in bounds.  Mirrors the
 * server's edit semantics, including its validation. */
export function applyBrush(
  grid: VoxelGrid,
  op: "add" | "remove",
  center: readonly [number, number, number],
  brush: BrushSize,
): void {
  if (op !== "add" && op !== "remove") {
    throw new RangeError(`unknown edit op ${JSON.stringify(op)}`);
  }
  if (!BRUSH_SIZES.includes(brush)) {
    throw new RangeError(`brush size must be one of ${BRUSH_SIZES.join(",")}, got ${brush}`);
  }
  const [cx, cy, cz] = center;
  if (!Number.isInteger(cx) || !Number.isInteger(cy) || !Number.isInteger(cz)) {
    throw new RangeError(`center must be three integers, got ${JSON.stringify(center)}`);
  }
  if (!grid.inBounds(cx, cy, cz)) {
    throw new RangeError(`center ${JSON.stringify(center)} outside grid ${JSON.stringify(grid.dims)}`);
  }
  const half = brush >> 1;
  const value = op === "add" ? 1 : 0;
  const x0 = Math.max(0, cx - half);
  const x1 = Math.min(grid.dims[0], cx + half + 1);
  const y0 = Math.max(0, cy - half);
  const y1 = Math.min(grid.dims[1], cy + half + 1);
  const z0 = Math.max(0, cz - half);
  const z1 = Math.min(grid.dims[2], cz + half + 1);
  for (let x = x0; x < x1; x++) {
    for (let y = y0; y < y1; y++) {
      grid.data.fill(value, grid.index(x, y, z0), grid.index(x, y, z1));
    }
  }
}
