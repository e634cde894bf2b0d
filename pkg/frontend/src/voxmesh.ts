// Triangle soup for the coarse grid: one shaded quad per exposed cube
// face, interior faces culled.  Unlit rendering, so legibility comes from
// baking a per-face brightness into the vertex color.

import { VoxelGrid } from "./grid.js";

export interface GridMesh {
  positions: Float32Array; // xyz per vertex, voxel units
  colors: Float32Array; // rgb per vertex, 0..1
  vertexCount: number;
}

interface Face {
  nx: number;
  ny: number;
  nz: number;
  corners: readonly (readonly [number, number, number])[];
  shade: number;
}

// corners wind consistently but culling stays off in the renderer, so
// only the coordinates and the shade matter
const FACES: readonly Face[] = [
  { nx: 1, ny: 0, nz: 0, shade: 0.8, corners: [[1, 0, 0], [1, 1, 0], [1, 1, 1], [1, 0, 1]] },
  { nx: -1, ny: 0, nz: 0, shade: 0.68, corners: [[0, 0, 0], [0, 0, 1], [0, 1, 1], [0, 1, 0]] },
  { nx: 0, ny: 1, nz: 0, shade: 1.0, corners: [[0, 1, 0], [0, 1, 1], [1, 1, 1], [1, 1, 0]] },
  { nx: 0, ny: -1, nz: 0, shade: 0.45, corners: [[0, 0, 0], [1, 0, 0], [1, 0, 1], [0, 0, 1]] },
  { nx: 0, ny: 0, nz: 1, shade: 0.6, corners: [[0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]] },
  { nx: 0, ny: 0, nz: -1, shade: 0.52, corners: [[0, 0, 0], [0, 1, 0], [1, 1, 0], [1, 0, 0]] },
];

const QUAD = [0, 1, 2, 0, 2, 3];

export function exposedFaceCount(grid: VoxelGrid): number {
  let faces = 0;
  const [X, Y, Z] = grid.dims;
  for (let x = 0; x < X; x++) {
    for (let y = 0; y < Y; y++) {
      for (let z = 0; z < Z; z++) {
        if (grid.get(x, y, z) === 0) continue;
        for (const f of FACES) {
          const nx = x + f.nx;
          const ny = y + f.ny;
          const nz = z + f.nz;
          if (!grid.inBounds(nx, ny, nz) || grid.get(nx, ny, nz) === 0) faces++;
        }
      }
    }
  }
  return faces;
}

export function buildGridMesh(
  grid: VoxelGrid,
  baseColor: readonly [number, number, number] = [0.74, 0.76, 0.8],
): GridMesh {
  const faces = exposedFaceCount(grid);
  const positions = new Float32Array(faces * 6 * 3);
  const colors = new Float32Array(faces * 6 * 3);
  let at = 0;
  const [X, Y, Z] = grid.dims;
  for (let x = 0; x < X; x++) {
    for (let y = 0; y < Y; y++) {
      for (let z = 0; z < Z; z++) {
        if (grid.get(x, y, z) === 0) continue;
        for (const f of FACES) {
          const nx = x + f.nx;
          const ny = y + f.ny;
          const nz = z + f.nz;
          if (grid.inBounds(nx, ny, nz) && grid.get(nx, ny, nz) !== 0) continue;
          for (const corner of QUAD) {
            const c = f.corners[corner];
            positions[at] = x + c[0];
            colors[at++] = baseColor[0] * f.shade;
            positions[at] = y + c[1];
            colors[at++] = baseColor[1] * f.shade;
            positions[at] = z + c[2];
            colors[at++] = baseColor[2] * f.shade;
          }
        }
      }
    }
  }
  return { positions, colors, vertexCount: faces * 6 };
}
