"""Binary generator/discriminator masks focusing capacity near surfaces.

The generator mask is the dilated coarse shape replicated up to the output
resolution; discriminator masks bring the coarse shape to the discriminator's
output field, in 3D by nearest upsampling and in 2D by rendering the dilated
silhouette and max-pooling it down.
"""

from __future__ import annotations

import numpy as np

from .grids import OccupancyGrid, dilate, upsample_nearest
from .render import ViewSpec, render_mask_depth


def generator_mask(coarse: OccupancyGrid, upsample_factor: int,
                   dilate_radius: int = 1) -> OccupancyGrid:
    """upsample_nearest(dilate(coarse, r), factor); the caller halves the
    factor for the intermediate-resolution head."""
    if upsample_factor not in (2, 4, 8):
        raise ValueError(f"upsample factor must be 2, 4 or 8, got {upsample_factor}")
    return upsample_nearest(dilate(coarse, dilate_radius), upsample_factor)


def discriminator_mask_geo(coarse: OccupancyGrid,
                           disc_out_dims: tuple[int, int, int]) -> OccupancyGrid:
    """Coarse occupancy upsampled to the discriminator's output dims; the
    scale must be a whole number per axis."""
    factors = []
    for c, d in zip(coarse.dims, disc_out_dims):
        if d < c or d % c:
            raise ValueError(
                f"disc dims {disc_out_dims} are not an integer multiple of {coarse.dims}")
        factors.append(d // c)
    if factors[0] == factors[1] == factors[2]:
        return upsample_nearest(coarse, factors[0])
    data = coarse.data
    for axis, f in enumerate(factors):
        data = np.repeat(data, f, axis=axis)
    return OccupancyGrid(data)


def adaptive_max_pool(data: np.ndarray, out_dims: tuple[int, ...]) -> np.ndarray:
    """Each output cell is the max over its preimage block
    [floor(i*n/m), floor((i+1)*n/m)); works for any rank."""
    out = data
    for axis, m in enumerate(out_dims):
        n = out.shape[axis]
        if m > n:
            raise ValueError(f"cannot pool axis {axis} from {n} up to {m}")
        edges = (np.arange(m + 1) * n) // m
        out = np.stack(
            [out.take(range(edges[i], edges[i + 1]), axis=axis).max(axis=axis)
             for i in range(m)], axis=axis)
    return out


def pooled_disc_mask_geo(coarse: OccupancyGrid,
                         disc_out_dims: tuple[int, int, int]) -> OccupancyGrid:
    """Non-integer-scale variant: computed at the next integer-multiple
    resolution, then adaptive-max-pooled down to the target dims."""
    try:
        return discriminator_mask_geo(coarse, disc_out_dims)
    except ValueError:
        pass
    factor = max(-(-d // c) for c, d in zip(coarse.dims, disc_out_dims))
    data = coarse.data
    for axis in range(3):
        data = np.repeat(data, factor, axis=axis)
    return OccupancyGrid(adaptive_max_pool(data, disc_out_dims))


def discriminator_mask_tex(coarse: OccupancyGrid, view: ViewSpec,
                           disc_out_hw: tuple[int, int], upsample_factor: int,
                           dilate_radius: int = 1) -> np.ndarray:
    """Rendered silhouette of the dilated-and-upsampled coarse shape,
    max-pooled down to the discriminator's 2D output dims.  Fixed per
    (content, view): independent of style and of generated geometry."""
    full = generator_mask(coarse, upsample_factor, dilate_radius)
    sil, _ = render_mask_depth(full, view)
    return adaptive_max_pool(sil, disc_out_hw)
