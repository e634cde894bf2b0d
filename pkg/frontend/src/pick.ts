// Ray-grid voxel picking.  Voxel (x, y, z) occupies the unit cube
// [x, x+1) x [y, y+1) x [z, z+1) in world space, so picks index the local
// mirror exactly the way the server indexes its grid.  Standard DDA
// traversal: clip the ray to the grid box, then step cell by cell.

import { VoxelGrid } from "./grid.js";

export type Vec3 = readonly [number, number, number];

export interface PickHit {
  /** first occupied cell along the ray (remove target) */
  voxel: [number, number, number];
  /** empty cell the ray crossed just before the hit (add target), or
   * null when the ray started inside the hit voxel or entered the grid
   * straight into it from outside */
  prev: [number, number, number] | null;
  /** ray parameter at the hit cell's entry face */
  t: number;
}

export function pickVoxel(
  grid: VoxelGrid,
  origin: Vec3,
  dir: Vec3,
  maxT: number = Infinity,
): PickHit | null {
  const dims = grid.dims;

  // slab clip against [0, X] x [0, Y] x [0, Z]
  let tEnter = 0;
  let tExit = maxT;
  for (let a = 0; a < 3; a++) {
    if (dir[a] !== 0) {
      let lo = (0 - origin[a]) / dir[a];
      let hi = (dims[a] - origin[a]) / dir[a];
      if (lo > hi) [lo, hi] = [hi, lo];
      if (lo > tEnter) tEnter = lo;
      if (hi < tExit) tExit = hi;
    } else if (origin[a] < 0 || origin[a] >= dims[a]) {
      return null;
    }
  }
  if (tEnter > tExit) return null;

  const px = origin[0] + dir[0] * tEnter;
  const py = origin[1] + dir[1] * tEnter;
  const pz = origin[2] + dir[2] * tEnter;
  let x = Math.min(dims[0] - 1, Math.max(0, Math.floor(px)));
  let y = Math.min(dims[1] - 1, Math.max(0, Math.floor(py)));
  let z = Math.min(dims[2] - 1, Math.max(0, Math.floor(pz)));

  const stepX = dir[0] > 0 ? 1 : -1;
  const stepY = dir[1] > 0 ? 1 : -1;
  const stepZ = dir[2] > 0 ? 1 : -1;
  // t at which the ray crosses the next cell boundary on each axis
  let tMaxX = dir[0] !== 0 ? (x + (stepX > 0 ? 1 : 0) - origin[0]) / dir[0] : Infinity;
  let tMaxY = dir[1] !== 0 ? (y + (stepY > 0 ? 1 : 0) - origin[1]) / dir[1] : Infinity;
  let tMaxZ = dir[2] !== 0 ? (z + (stepZ > 0 ? 1 : 0) - origin[2]) / dir[2] : Infinity;
  const tDeltaX = dir[0] !== 0 ? stepX / dir[0] : Infinity;
  const tDeltaY = dir[1] !== 0 ? stepY / dir[1] : Infinity;
  const tDeltaZ = dir[2] !== 0 ? stepZ / dir[2] : Infinity;

  let prev: [number, number, number] | null = null;
  let t = tEnter;
  while (true) {
    if (grid.get(x, y, z) !== 0) {
      return { voxel: [x, y, z], prev, t };
    }
    prev = [x, y, z];
    if (tMaxX <= tMaxY && tMaxX <= tMaxZ) {
      t = tMaxX;
      tMaxX += tDeltaX;
      x += stepX;
      if (x < 0 || x >= dims[0]) return null;
    } else if (tMaxY <= tMaxZ) {
      t = tMaxY;
      tMaxY += tDeltaY;
      y += stepY;
      if (y < 0 || y >= dims[1]) return null;
    } else {
      t = tMaxZ;
      tMaxZ += tDeltaZ;
      z += stepZ;
      if (z < 0 || z >= dims[2]) return null;
    }
    if (t > tExit) return null;
  }
}

/** Where a click should sculpt: removes hit the picked voxel itself, adds
 * go in the empty cell in front of the face that was clicked (always a
 * traversed in-bounds cell; null when the ray began inside the voxel or
 * hit it straight from outside the grid). */
export function editTarget(hit: PickHit, op: "add" | "remove"): [number, number, number] | null {
  return op === "remove" ? hit.voxel : hit.prev;
}
