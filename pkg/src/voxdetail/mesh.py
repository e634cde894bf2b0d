"""Isosurface extraction with vertex colors, symmetry mirroring, PLY/OBJ I/O.

Vertices live in voxel-index coordinates: grid sample (i,j,k) sits at
position (i,j,k), so a mesh lines up with the color grid it is queried
against.  Extraction is the classic 256-case marching cubes; vertices on
shared cell edges are welded through a global edge key, which makes the
output watertight wherever the volume is closed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import ColorGrid
from .mc_tables import CORNER_OFFSETS, EDGE_CORNERS, EDGE_TABLE, TRI_TABLE


@dataclass
class ColoredMesh:
    """Triangle soup with per-vertex RGB in [0, 1]."""

    vertices: np.ndarray            # (n, 3) float32
    triangles: np.ndarray           # (m, 3) int32
    colors: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, np.float32).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, np.int32).reshape(-1, 3)
        if self.colors is None:
            self.colors = np.zeros_like(self.vertices)
        self.colors = np.asarray(self.colors, np.float32).reshape(-1, 3)
        if len(self.colors) != len(self.vertices):
            raise ValueError(f"{len(self.colors)} colors for "
                             f"{len(self.vertices)} vertices")
        if not np.isfinite(self.vertices).all():
            raise ValueError("non-finite vertex coordinates")
        if self.triangles.size and (self.triangles.min() < 0 or
                                    self.triangles.max() >= len(self.vertices)):
            raise ValueError("triangle index out of range")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)


def _empty_mesh() -> ColoredMesh:
    return ColoredMesh(np.zeros((0, 3), np.float32), np.zeros((0, 3), np.int32))


# axis along which each edge runs, and the lattice offset of its lower end
_EDGE_LO = []
_EDGE_AXIS = []
for _a, _b in EDGE_CORNERS:
    _oa = np.array(CORNER_OFFSETS[_a])
    _ob = np.array(CORNER_OFFSETS[_b])
    _EDGE_LO.append(np.minimum(_oa, _ob))
    _EDGE_AXIS.append(int(np.nonzero(_oa != _ob)[0][0]))

_EDGE_TABLE = np.array(EDGE_TABLE, np.uint16)
_TRI_TABLE = np.array(TRI_TABLE, np.int8)


def marching_cubes(d, iso: float = 0.5, pad: bool = False) -> ColoredMesh:
    """Extract the iso-level surface of a density grid (colors left zero).

    Normals face the higher-density side outward.  The surface is only
    closed where the volume is: pass pad=True to wrap a zero shell around
    the data (coordinates stay in the input frame) when the shape touches
    the boundary."""
    if not 0.0 < iso < 1.0:
        raise ValueError(f"iso level must lie in (0, 1), got {iso}")
    vol = np.asarray(d.data, np.float32)
    shift = 0.0
    if pad:
        vol = np.pad(vol, 1)
        shift = 1.0
    X, Y, Z = vol.shape
    if min(X, Y, Z) < 2:
        return _empty_mesh()
    below = vol < iso
    cases = np.zeros((X - 1, Y - 1, Z - 1), np.uint8)
    for i, (ox, oy, oz) in enumerate(CORNER_OFFSETS):
        corner = below[ox:ox + X - 1, oy:oy + Y - 1, oz:oz + Z - 1]
        cases |= corner.astype(np.uint8) << i
    ci, cj, ck = np.nonzero((cases != 0) & (cases != 255))
    if ci.size == 0:
        return _empty_mesh()
    cell_case = cases[ci, cj, ck]

    # global key per cell edge: lattice index of the low end plus the axis,
    # identical for the up-to-four cells sharing the edge
    n = ci.size
    keys = np.empty((n, 12), np.int64)
    for e in range(12):
        lo = _EDGE_LO[e]
        keys[:, e] = ((((ci + lo[0]) * Y + (cj + lo[1])) * Z + (ck + lo[2]))
                      * 3 + _EDGE_AXIS[e])
    flags = _EDGE_TABLE[cell_case]
    needed = ((flags[:, None] >> np.arange(12)) & 1).astype(bool)
    uniq = np.unique(keys[needed])

    # one interpolated vertex per unique edge key
    lin, axis = uniq // 3, uniq % 3
    flat = vol.ravel()
    step = np.array([Y * Z, Z, 1], np.int64)[axis]
    d0 = flat[lin].astype(np.float64)
    d1 = flat[lin + step].astype(np.float64)
    t = (iso - d0) / (d1 - d0)
    pos = np.stack([lin // (Y * Z), (lin // Z) % Y, lin % Z], axis=1
                   ).astype(np.float64)
    pos[np.arange(len(uniq)), axis] += t
    pos -= shift

    ids = np.searchsorted(uniq, keys)
    tri_edges = _TRI_TABLE[cell_case][:, :15].reshape(n, 5, 3)
    valid = tri_edges[:, :, 0] >= 0
    rows = np.arange(n)[:, None, None]
    gathered = ids[rows, np.clip(tri_edges, 0, 11)]
    triangles = gathered[valid]
    return ColoredMesh(pos.astype(np.float32), triangles.astype(np.int32))


def colorize(mesh: ColoredMesh, tex: ColorGrid,
             interpolate: bool = False) -> ColoredMesh:
    """Vertex colors queried from the color grid: nearest voxel center by
    default (coordinates exactly halfway round up), clamped trilinear when
    `interpolate` is set."""
    v = mesh.vertices.astype(np.float64)
    X, Y, Z, _ = tex.data.shape
    dims = np.array([X, Y, Z])
    if interpolate:
        base = np.clip(np.floor(v), 0, dims - 2).astype(np.int64)
        f = np.clip(v - base, 0.0, 1.0)
        cols = np.zeros((len(v), 3))
        for corner in range(8):
            off = np.array([(corner >> a) & 1 for a in range(3)])
            w = np.prod(np.where(off, f, 1.0 - f), axis=1)
            p = base + off
            cols += w[:, None] * tex.data[p[:, 0], p[:, 1], p[:, 2]]
    else:
        p = np.floor(v + 0.5).astype(np.int64)
        p = np.clip(p, 0, dims - 1)
        cols = tex.data[p[:, 0], p[:, 1], p[:, 2]]
    return ColoredMesh(mesh.vertices.copy(), mesh.triangles.copy(),
                       cols.astype(np.float32))


def mirror_symmetric(mesh: ColoredMesh, plane: tuple[int, float],
                     weld_eps: float = 1e-6) -> ColoredMesh:
    """Append the mesh's reflection across plane (axis, coordinate), welding
    vertices that already lie on the plane and flipping the winding of the
    reflected triangles."""
    axis, pc = plane
    if axis not in (0, 1, 2):
        raise ValueError(f"plane axis must be 0, 1 or 2, got {axis}")
    v = mesh.vertices
    on_plane = np.abs(v[:, axis].astype(np.float64) - pc) < weld_eps
    off = np.nonzero(~on_plane)[0]
    mirrored = v[off].copy()
    mirrored[:, axis] = np.float32(2.0 * pc) - mirrored[:, axis]
    remap = np.empty(len(v), np.int64)
    remap[on_plane] = np.nonzero(on_plane)[0]
    remap[off] = len(v) + np.arange(len(off))
    flipped = remap[mesh.triangles][:, ::-1]
    return ColoredMesh(
        np.vstack([v, mirrored]),
        np.vstack([mesh.triangles, flipped.astype(np.int32)]),
        np.vstack([mesh.colors, mesh.colors[off]]))


# ---------------------------------------------------------------------------
# file formats

_PLY_PROPS = ["property float x", "property float y", "property float z",
              "property uchar red", "property uchar green", "property uchar blue"]

_VERT_DTYPE = np.dtype([("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
                        ("red", "u1"), ("green", "u1"), ("blue", "u1")])
_FACE_DTYPE = np.dtype([("n", "u1"), ("a", "<i4"), ("b", "<i4"), ("c", "<i4")])


def _color_bytes(colors: np.ndarray) -> np.ndarray:
    return np.round(np.clip(colors, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_mesh(mesh: ColoredMesh, fmt: str, path) -> None:
    """PLY is binary little-endian with uchar vertex colors; OBJ extends
    each `v` line with the color triple, a convention most viewers read."""
    if fmt == "ply":
        _write_ply(mesh, path)
    elif fmt == "obj":
        _write_obj(mesh, path)
    else:
        raise ValueError(f"unknown mesh format {fmt!r}")


def _write_ply(mesh: ColoredMesh, path) -> None:
    header = "\n".join(
        ["ply", "format binary_little_endian 1.0",
         f"element vertex {mesh.n_vertices}", *_PLY_PROPS,
         f"element face {mesh.n_triangles}",
         "property list uchar int vertex_indices", "end_header", ""])
    verts = np.empty(mesh.n_vertices, _VERT_DTYPE)
    verts["x"], verts["y"], verts["z"] = mesh.vertices.T
    rgb = _color_bytes(mesh.colors)
    verts["red"], verts["green"], verts["blue"] = rgb.T
    faces = np.empty(mesh.n_triangles, _FACE_DTYPE)
    faces["n"] = 3
    faces["a"], faces["b"], faces["c"] = mesh.triangles.T
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(verts.tobytes())
        f.write(faces.tobytes())


def _write_obj(mesh: ColoredMesh, path) -> None:
    with open(path, "w") as f:
        for (x, y, z), (r, g, b) in zip(mesh.vertices, mesh.colors):
            f.write(f"v {x:.9g} {y:.9g} {z:.9g} {r:.9g} {g:.9g} {b:.9g}\n")
        for a, b, c in mesh.triangles + 1:
            f.write(f"f {a} {b} {c}\n")


def read_mesh(path) -> ColoredMesh:
    """Reads meshes written by write_mesh (either format, sniffed)."""
    with open(path, "rb") as f:
        magic = f.read(3)
    return _read_ply(path) if magic == b"ply" else _read_obj(path)


def _read_ply(path) -> ColoredMesh:
    with open(path, "rb") as f:
        header = []
        while True:
            line = f.readline().decode("ascii").strip()
            header.append(line)
            if line == "end_header":
                break
        n_vert = n_face = None
        for line in header:
            if line.startswith("element vertex"):
                n_vert = int(line.split()[-1])
            elif line.startswith("element face"):
                n_face = int(line.split()[-1])
        if ("format binary_little_endian 1.0" not in header
                or n_vert is None or n_face is None):
            raise ValueError(f"unsupported PLY layout in {path}")
        verts = np.frombuffer(f.read(n_vert * _VERT_DTYPE.itemsize), _VERT_DTYPE)
        faces = np.frombuffer(f.read(n_face * _FACE_DTYPE.itemsize), _FACE_DTYPE)
    if faces.size and not (faces["n"] == 3).all():
        raise ValueError("only triangle faces are supported")
    vertices = np.stack([verts["x"], verts["y"], verts["z"]], axis=1)
    colors = np.stack([verts["red"], verts["green"], verts["blue"]],
                      axis=1).astype(np.float32) / 255.0
    tris = np.stack([faces["a"], faces["b"], faces["c"]], axis=1) \
        if faces.size else np.zeros((0, 3), np.int32)
    return ColoredMesh(vertices, tris, colors)


def _read_obj(path) -> ColoredMesh:
    vertices, colors, tris = [], [], []
    with open(path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vals = [float(p) for p in parts[1:7]]
                vertices.append(vals[:3])
                colors.append(vals[3:6] if len(vals) == 6 else [0.0] * 3)
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:4]]
                tris.append(idx)
    if not vertices:
        return _empty_mesh()
    return ColoredMesh(np.array(vertices, np.float32),
                       np.array(tris or np.zeros((0, 3)), np.int32),
                       np.array(colors, np.float32))
