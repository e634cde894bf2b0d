"""Orthographic argmax rendering of voxel grids, differentiable in color only.

A view's camera sits on the `direction` side of `axis` and marches rays back
through the grid, so the "+x" view sees faces whose outward normal is +x; the
image axes are the two remaining grid axes in ascending order.  Depth is the
first-hit slice index along the axis (not the march distance), -1 on miss.
Gradients flow to the color grid by scatter-add; geometry is always a
constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autograd import Tensor
from .grids import ColorGrid, OccupancyGrid


@dataclass(frozen=True)
class ViewSpec:
    axis: int       # 0, 1, 2 for x, y, z
    direction: int  # +1 or -1: which side of the axis the camera sits on

    def __post_init__(self):
        if self.axis not in (0, 1, 2) or self.direction not in (1, -1):
            raise ValueError(f"bad view ({self.axis}, {self.direction})")

    @property
    def name(self) -> str:
        return ("+" if self.direction > 0 else "-") + "xyz"[self.axis]


VIEW_BY_NAME = {
    "+x": ViewSpec(0, 1), "-x": ViewSpec(0, -1),
    "+y": ViewSpec(1, 1), "-y": ViewSpec(1, -1),
    "+z": ViewSpec(2, 1), "-z": ViewSpec(2, -1),
}
ALL_VIEWS = tuple(VIEW_BY_NAME.values())


@dataclass
class RenderOut:
    mask: np.ndarray   # (H, W) uint8
    depth: np.ndarray  # (H, W) int32, -1 on miss
    rgb: np.ndarray    # (H, W, 3) float32, zero where mask is zero


def _moved(data: np.ndarray, axis: int) -> np.ndarray:
    """View with `axis` first; remaining axes keep ascending order."""
    return np.moveaxis(data, axis, 0)


def render_mask_depth(geo: OccupancyGrid, view: ViewSpec) -> tuple[np.ndarray, np.ndarray]:
    m = _moved(geo.data, view.axis)
    hit = m.any(axis=0)
    if view.direction > 0:  # camera at +axis: the highest occupied slice wins
        first = m.shape[0] - 1 - m[::-1].argmax(axis=0)
    else:
        first = m.argmax(axis=0)
    depth = np.where(hit, first, -1).astype(np.int32)
    return hit.astype(np.uint8), depth


def render_color(geo: OccupancyGrid, color: ColorGrid, view: ViewSpec) -> RenderOut:
    if geo.dims != color.dims:
        raise ValueError(f"geometry dims {geo.dims} != color dims {color.dims}")
    mask, depth = render_mask_depth(geo, view)
    cm = _moved(color.data, view.axis)  # (A, H, W, 3)
    H, W = mask.shape
    uu, vv = np.meshgrid(np.arange(H), np.arange(W), indexing="ij")
    rgb = cm[np.maximum(depth, 0), uu, vv]
    rgb = np.where(mask[..., None].astype(bool), rgb, 0.0).astype(np.float32)
    return RenderOut(mask, depth, rgb)


def render_color_backward(grad_rgb: np.ndarray, geo: OccupancyGrid,
                          view: ViewSpec) -> np.ndarray:
    """Scatter-add of per-pixel color gradients into the first-hit voxels;
    everything else (geometry included) gets zero."""
    mask, depth = render_mask_depth(geo, view)
    grad_color = np.zeros(geo.dims + (3,), dtype=grad_rgb.dtype)
    gm = _moved(grad_color, view.axis)  # writable view
    ui, vi = np.nonzero(mask)
    np.add.at(gm, (depth[ui, vi], ui, vi), grad_rgb[ui, vi])
    return grad_color


# ---------------------------------------------------------------------------
# differentiable gather against fixed geometry


@dataclass
class ViewHits:
    """First-hit lookup for one (geometry, view) pair, reusable across colors."""

    view: ViewSpec
    shape: tuple[int, int, int]
    hw: tuple[int, int]
    mask: np.ndarray    # (H, W) uint8
    depth: np.ndarray   # (H, W) int32
    pix_u: np.ndarray   # (n,) hit pixel rows
    pix_v: np.ndarray   # (n,) hit pixel cols
    lin: np.ndarray     # (n,) flat indices of hit voxels in canonical order


def precompute_hits(geo: OccupancyGrid, view: ViewSpec) -> ViewHits:
    mask, depth = render_mask_depth(geo, view)
    ui, vi = np.nonzero(mask)
    other = [a for a in range(3) if a != view.axis]
    coord = [None, None, None]
    coord[view.axis] = depth[ui, vi].astype(np.int64)
    coord[other[0]] = ui.astype(np.int64)
    coord[other[1]] = vi.astype(np.int64)
    X, Y, Z = geo.dims
    lin = coord[0] * (Y * Z) + coord[1] * Z + coord[2]
    return ViewHits(view, geo.dims, mask.shape, mask, depth, ui, vi, lin)


def render_gather(colors: Tensor, hits: ViewHits) -> Tensor:
    """Differentiable image (1, 3, H, W) from a color field (1, 3, X, Y, Z)
    and precomputed first hits; gradient scatters back to hit voxels only."""
    X, Y, Z = hits.shape
    if colors.shape != (1, 3, X, Y, Z):
        raise ValueError(f"expected color tensor (1,3,{X},{Y},{Z}), got {colors.shape}")
    flat = colors.values.reshape(3, X * Y * Z)
    H, W = hits.hw
    img = np.zeros((1, 3, H, W), dtype=colors.dtype)
    # the scalar 0 makes every index advanced, so the target is (n, 3)
    img[0, :, hits.pix_u, hits.pix_v] = flat[:, hits.lin].T

    def grad_fn(g, need):
        if not need[0]:
            return (None,)
        gflat = np.zeros((3, X * Y * Z), dtype=g.dtype)
        np.add.at(gflat.T, hits.lin, g[0, :, hits.pix_u, hits.pix_v])
        return (gflat.reshape(1, 3, X, Y, Z),)

    return Tensor(img, colors.requires_grad, (colors,), grad_fn)


# ---------------------------------------------------------------------------
# debug dumps


def save_pgm(path, img: np.ndarray) -> None:
    """8-bit binary PGM (P5); input is (H, W) in [0,1] float or uint8."""
    if img.dtype != np.uint8:
        img = np.round(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
    H, W = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{W} {H}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def save_png(path, rgb: np.ndarray) -> None:
    """8-bit RGB PNG; input is (H, W, 3) in [0,1] float or uint8."""
    from PIL import Image

    if rgb.dtype != np.uint8:
        rgb = np.round(np.clip(rgb, 0.0, 1.0) * 255).astype(np.uint8)
    Image.fromarray(rgb, mode="RGB").save(path)


def load_png(path) -> np.ndarray:
    """(H, W, 3) float32 in [0,1]."""
    from PIL import Image

    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    return arr / 255.0
