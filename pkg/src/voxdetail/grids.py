"""Dense 3D grid containers and the deterministic transforms built on them.

Memory order is canonical everywhere: x slowest, z fastest, i.e. a C-order
numpy array indexed [x, y, z].  All operations are pure.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


class OccupancyGrid:
    """Binary occupancy over an (X, Y, Z) box; values are exactly 0 or 1."""

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        arr = np.asarray(data)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(f"occupancy grid needs 3 positive dims, got {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("occupancy values must be exactly 0 or 1")
        self.data = np.ascontiguousarray(arr, dtype=np.uint8)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    def count(self) -> int:
        return int(self.data.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, OccupancyGrid) and np.array_equal(self.data, other.data)


class DensityGrid:
    """Real-valued grid with every cell in [0, 1]."""

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        arr = np.asarray(data, dtype=np.float32)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(f"density grid needs 3 positive dims, got {arr.shape}")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("density values must lie in [0, 1]")
        self.data = np.ascontiguousarray(arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape


class ColorGrid:
    """Per-cell RGB, each channel in [0, 1]; shape (X, Y, Z, 3)."""

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        arr = np.asarray(data, dtype=np.float32)
        if arr.ndim != 4 or arr.shape[3] != 3 or min(arr.shape[:3]) < 1:
            raise ValueError(f"color grid needs shape (X,Y,Z,3), got {arr.shape}")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("color channels must lie in [0, 1]")
        self.data = np.ascontiguousarray(arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape[:3]


@dataclass(frozen=True)
class BBox:
    """Axis-aligned voxel box, min inclusive, max exclusive."""

    min: tuple[int, int, int]
    max: tuple[int, int, int]

    def __post_init__(self):
        if any(a < 0 for a in self.min) or any(a >= b for a, b in zip(self.min, self.max)):
            raise ValueError(f"degenerate bbox {self.min}..{self.max}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(b - a for a, b in zip(self.min, self.max))


# ---------------------------------------------------------------------------
# transforms


def downsample_max(g: OccupancyGrid, factor: int) -> OccupancyGrid:
    """Coarse cell is occupied iff any fine voxel in its factor^3 block is."""
    X, Y, Z = g.dims
    if factor < 1 or X % factor or Y % factor or Z % factor:
        raise ValueError(f"dims {g.dims} not divisible by factor {factor}")
    d = g.data.reshape(X // factor, factor, Y // factor, factor, Z // factor, factor)
    return OccupancyGrid(d.max(axis=(1, 3, 5)))


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Truncated at radius ceil(3*sigma), normalized to sum 1."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    r = int(np.ceil(3 * sigma))
    ax = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(ax ** 2) / (2 * sigma ** 2))
    return (k / k.sum()).astype(np.float64)


def gaussian_smooth(g: OccupancyGrid, sigma: float) -> DensityGrid:
    """Separable Gaussian with zero boundary padding, clamped to [0, 1]."""
    k = gaussian_kernel_1d(sigma)
    out = g.data.astype(np.float64)
    for axis in range(3):
        out = ndimage.correlate1d(out, k, axis=axis, mode="constant", cval=0.0)
    return DensityGrid(np.clip(out, 0.0, 1.0).astype(np.float32))


def dilate(g: OccupancyGrid, radius: int) -> OccupancyGrid:
    """Chebyshev-ball dilation: cell on iff an occupied voxel is within
    `radius` in the max-norm."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if radius == 0:
        return OccupancyGrid(g.data.copy())
    out = ndimage.maximum_filter(g.data, size=2 * radius + 1, mode="constant", cval=0)
    return OccupancyGrid(out)


def upsample_nearest(g, factor: int):
    """Each cell replicated into a factor^3 block; kind-preserving."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    d = g.data
    for axis in range(3):
        d = np.repeat(d, factor, axis=axis)
    if isinstance(g, OccupancyGrid):
        return OccupancyGrid(d)
    if isinstance(g, DensityGrid):
        return DensityGrid(d)
    raise TypeError(f"cannot upsample {type(g).__name__}")


def crop_to_bbox(g: OccupancyGrid, pad: int = 0) -> tuple[OccupancyGrid, BBox]:
    """Extracts the tight occupied bounding box expanded by `pad` (clipped to
    the grid); the BBox lets the caller un-crop."""
    if pad < 0:
        raise ValueError("pad must be non-negative")
    occ = np.argwhere(g.data > 0)
    if occ.size == 0:
        raise ValueError("cannot crop an empty grid")
    lo = np.maximum(occ.min(axis=0) - pad, 0)
    hi = np.minimum(occ.max(axis=0) + 1 + pad, g.dims)
    box = BBox(tuple(int(a) for a in lo), tuple(int(a) for a in hi))
    sub = g.data[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    return OccupancyGrid(sub.copy()), box


def uncrop(g: OccupancyGrid, box: BBox, dims: tuple[int, int, int]) -> OccupancyGrid:
    """Places a cropped grid back at its BBox position inside `dims`."""
    if g.dims != box.dims:
        raise ValueError(f"grid dims {g.dims} do not match bbox {box.dims}")
    out = np.zeros(dims, dtype=np.uint8)
    (x0, y0, z0), (x1, y1, z1) = box.min, box.max
    out[x0:x1, y0:y1, z0:z1] = g.data
    return OccupancyGrid(out)


# ---------------------------------------------------------------------------
# VOXB file format

_VOXB_MAGIC = b"VOXB"
_VOXB_VERSION = 1
_KIND_OCCUPANCY = 0
_KIND_DENSITY = 1
_KIND_RGB = 2


def save_voxb(path, grid) -> None:
    """VOXB: magic, u32 version, u32 X,Y,Z, u8 kind, payload; little-endian,
    canonical x-slowest/z-fastest cell order.  Occupancy is bit-packed MSB
    first (numpy packbits order), density is f32, rgb is 3 bytes per cell."""
    X, Y, Z = grid.dims
    with open(path, "wb") as f:
        f.write(_VOXB_MAGIC)
        f.write(struct.pack("<IIII", _VOXB_VERSION, X, Y, Z))
        if isinstance(grid, OccupancyGrid):
            f.write(struct.pack("<B", _KIND_OCCUPANCY))
            f.write(np.packbits(grid.data.reshape(-1)).tobytes())
        elif isinstance(grid, DensityGrid):
            f.write(struct.pack("<B", _KIND_DENSITY))
            f.write(grid.data.astype("<f4").tobytes())
        elif isinstance(grid, ColorGrid):
            f.write(struct.pack("<B", _KIND_RGB))
            q = np.round(grid.data * 255.0).astype(np.uint8)
            f.write(q.tobytes())
        else:
            raise TypeError(f"cannot serialize {type(grid).__name__}")


def load_voxb(path):
    with open(path, "rb") as f:
        if f.read(4) != _VOXB_MAGIC:
            raise ValueError(f"{path}: not a VOXB file")
        version, X, Y, Z = struct.unpack("<IIII", f.read(16))
        if version != _VOXB_VERSION:
            raise ValueError(f"{path}: unsupported VOXB version {version}")
        (kind,) = struct.unpack("<B", f.read(1))
        n = X * Y * Z
        if kind == _KIND_OCCUPANCY:
            packed = np.frombuffer(f.read((n + 7) // 8), dtype=np.uint8)
            bits = np.unpackbits(packed, count=n)
            return OccupancyGrid(bits.reshape(X, Y, Z))
        if kind == _KIND_DENSITY:
            vals = np.frombuffer(f.read(4 * n), dtype="<f4")
            return DensityGrid(vals.reshape(X, Y, Z).astype(np.float32))
        if kind == _KIND_RGB:
            q = np.frombuffer(f.read(3 * n), dtype=np.uint8)
            return ColorGrid(q.reshape(X, Y, Z, 3).astype(np.float32) / 255.0)
        raise ValueError(f"{path}: unknown VOXB kind {kind}")
