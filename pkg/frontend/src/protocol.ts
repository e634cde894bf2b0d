// Wire protocol for the sculpt-and-detailize service: grid digests,
// client/server message shapes, and mesh payload decoding.
//
// The digest must match the server byte for byte: FNV-1a 64-bit over the
// grid dims as three little-endian u32 followed by one byte per voxel in
// C order, rendered as 16 lowercase hex chars.

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const MASK64 = 0xffffffffffffffffn;

export function fnv1a64(data: Uint8Array, seed: bigint = FNV_OFFSET): bigint {
  let h = seed;
  for (let i = 0; i < data.length; i++) {
    h = ((h ^ BigInt(data[i])) * FNV_PRIME) & MASK64;
  }
  return h;
}

export type Dims = readonly [number, number, number];

export function gridDigest(dims: Dims, voxels: Uint8Array): string {
  const head = new Uint8Array(12);
  const view = new DataView(head.buffer);
  view.setUint32(0, dims[0], true);
  view.setUint32(4, dims[1], true);
  view.setUint32(8, dims[2], true);
  const h = fnv1a64(voxels, fnv1a64(head));
  return h.toString(16).padStart(16, "0");
}

export function bytesFromBase64(b64: string): Uint8Array {
  const bin = atob(b64);
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
  return out;
}

export type BrushSize = 1 | 3 | 5 | 7;
export const BRUSH_SIZES: readonly BrushSize[] = [1, 3, 5, 7];

export interface EditMessage {
  type: "edit";
  op: "add" | "remove";
  center: [number, number, number];
  brush: BrushSize;
}

export interface GenerateMessage {
  type: "generate";
}

export type ClientMessage = EditMessage | GenerateMessage;

export interface AckMessage {
  type: "ack";
  digest: string;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export interface MeshMessage {
  type: "mesh";
  digest: string;
  style: number;
  vertex_count: number;
  triangle_count: number;
  vertices: string; // base64 <f4, 3 per vertex
  colors: string; // base64 u8, 3 per vertex
  triangles: string; // base64 <u4, 3 per triangle
}

export type ServerMessage = AckMessage | ErrorMessage | MeshMessage;

export function parseServerMessage(text: string): ServerMessage {
  const msg: unknown = JSON.parse(text);
  if (typeof msg !== "object" || msg === null || Array.isArray(msg)) {
    throw new Error("server message must be a JSON object");
  }
  const m = msg as Record<string, unknown>;
  if (m.type === "ack" && typeof m.digest === "string") {
    return { type: "ack", digest: m.digest };
  }
  if (m.type === "error" && typeof m.message === "string") {
    return { type: "error", message: m.message };
  }
  if (m.type === "mesh") {
    for (const key of ["vertices", "colors", "triangles", "digest"]) {
      if (typeof m[key] !== "string") throw new Error(`mesh message lacks ${key}`);
    }
    for (const key of ["style", "vertex_count", "triangle_count"]) {
      if (typeof m[key] !== "number") throw new Error(`mesh message lacks ${key}`);
    }
    return m as unknown as MeshMessage;
  }
  throw new Error(`unrecognized server message type ${JSON.stringify(m.type)}`);
}

export interface DecodedMesh {
  digest: string;
  style: number;
  vertexCount: number;
  triangleCount: number;
  vertices: Float32Array; // xyz per vertex, fine-grid units
  colors: Uint8Array; // rgb per vertex
  triangles: Uint32Array; // vertex indices, 3 per face
}

// payload buffers are little-endian; typed arrays use platform order,
// which in practice is also little-endian, but don't bet the decode on it
const PLATFORM_LE = new Uint8Array(new Uint16Array([1]).buffer)[0] === 1;

function decodeF32(bytes: Uint8Array): Float32Array {
  if (bytes.length % 4 !== 0) throw new Error("f32 buffer length not a multiple of 4");
  if (PLATFORM_LE) return new Float32Array(bytes.buffer, bytes.byteOffset, bytes.length / 4);
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.length);
  const out = new Float32Array(bytes.length / 4);
  for (let i = 0; i < out.length; i++) out[i] = view.getFloat32(4 * i, true);
  return out;
}

function decodeU32(bytes: Uint8Array): Uint32Array {
  if (bytes.length % 4 !== 0) throw new Error("u32 buffer length not a multiple of 4");
  if (PLATFORM_LE) return new Uint32Array(bytes.buffer, bytes.byteOffset, bytes.length / 4);
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.length);
  const out = new Uint32Array(bytes.length / 4);
  for (let i = 0; i < out.length; i++) out[i] = view.getUint32(4 * i, true);
  return out;
}

export function decodeMesh(msg: MeshMessage): DecodedMesh {
  const vertices = decodeF32(bytesFromBase64(msg.vertices));
  const colors = bytesFromBase64(msg.colors);
  const triangles = decodeU32(bytesFromBase64(msg.triangles));
  if (vertices.length !== 3 * msg.vertex_count) {
    throw new Error(`expected ${3 * msg.vertex_count} vertex floats, got ${vertices.length}`);
  }
  if (colors.length !== 3 * msg.vertex_count) {
    throw new Error(`expected ${3 * msg.vertex_count} color bytes, got ${colors.length}`);
  }
  if (triangles.length !== 3 * msg.triangle_count) {
    throw new Error(`expected ${3 * msg.triangle_count} indices, got ${triangles.length}`);
  }
  for (let i = 0; i < triangles.length; i++) {
    if (triangles[i] >= msg.vertex_count) {
      throw new Error(`triangle index ${triangles[i]} out of range`);
    }
  }
  return {
    digest: msg.digest,
    style: msg.style,
    vertexCount: msg.vertex_count,
    triangleCount: msg.triangle_count,
    vertices,
    colors,
    triangles,
  };
}
