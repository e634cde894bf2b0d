"""Exemplar preparation: surface normals, multi-view color projection onto
voxels, nearest-neighbor color inpainting, and a procedural blocky-house
dataset for desk-scale training.

The volumetric texture of an exemplar is built by shooting each configured
view's image back onto the first-hit surface voxels whose normals face that
view (side views when the normal is within 45 degrees of the horizontal
plane, top/bottom otherwise), then flood-filling every remaining voxel with
the color of its nearest assigned voxel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .grids import (
    BBox, ColorGrid, DensityGrid, OccupancyGrid, downsample_max,
    gaussian_smooth, load_voxb, save_voxb,
)
from .metrics import surface_voxels
from .render import ALL_VIEWS, VIEW_BY_NAME, load_png, render_color, render_mask_depth, save_png

VERTICAL_AXIS = 1  # grid y is "up" for the view-assignment rule

_NEIGHBOR_OFFSETS = sorted([(-1, 0, 0), (1, 0, 0), (0, -1, 0),
                            (0, 1, 0), (0, 0, -1), (0, 0, 1)])


def estimate_normals(geo: OccupancyGrid) -> tuple[np.ndarray, np.ndarray]:
    """Outward unit normals at surface voxels, as (positions (n,3),
    normals (n,3)) in np.argwhere order.

    The normal is the negated central-difference gradient of the smoothed
    occupancy field.  A voxel with zero gradient falls back to the direction
    of its lexicographically first empty 6-neighbor."""
    if geo.count() == 0:
        raise ValueError("cannot estimate normals of an empty grid")
    field = gaussian_smooth(geo, 1.0).data.astype(np.float64)
    pad = np.pad(field, 1)
    grad = np.stack([
        (pad[2:, 1:-1, 1:-1] - pad[:-2, 1:-1, 1:-1]) / 2.0,
        (pad[1:-1, 2:, 1:-1] - pad[1:-1, :-2, 1:-1]) / 2.0,
        (pad[1:-1, 1:-1, 2:] - pad[1:-1, 1:-1, :-2]) / 2.0,
    ], axis=-1)
    positions = np.argwhere(surface_voxels(geo) > 0)
    normals = -grad[tuple(positions.T)]
    occ = geo.data > 0
    occ_pad = np.pad(occ, 1)
    for t in np.nonzero(np.linalg.norm(normals, axis=1) == 0.0)[0]:
        x, y, z = positions[t]
        for dx, dy, dz in _NEIGHBOR_OFFSETS:
            if not occ_pad[x + 1 + dx, y + 1 + dy, z + 1 + dz]:
                normals[t] = (dx, dy, dz)
                break
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return positions, normals


def pick_view(normal) -> str:
    """The view a surface normal projects from: top/bottom when the angle to
    the horizontal plane is >= 45 degrees (ties go vertical), otherwise the
    side axis with the larger component (x on a tie)."""
    nx, ny, nz = float(normal[0]), float(normal[1]), float(normal[2])
    if ny * ny >= nx * nx + nz * nz:
        return "+y" if ny > 0 else "-y"
    if abs(nx) >= abs(nz):
        return "+x" if nx > 0 else "-x"
    return "+z" if nz > 0 else "-z"


def _image_dims(dims, axis):
    rest = [d for a, d in enumerate(dims) if a != axis]
    return (rest[0], rest[1])


def project_colors(geo: OccupancyGrid, images: dict[str, np.ndarray]
                   ) -> tuple[ColorGrid, OccupancyGrid]:
    """Assigns each surface voxel the pixel color of its normal-matched
    view, but only where the voxel is that pixel's first hit; occluded
    voxels stay unassigned for inpainting to fill."""
    for name, img in images.items():
        want = _image_dims(geo.dims, VIEW_BY_NAME[name].axis)
        if img.shape[:2] != want or img.shape[2] != 3:
            raise ValueError(f"view {name}: image shape {img.shape} does not "
                             f"match grid face {want}")
    positions, normals = estimate_normals(geo)
    choice = np.array([pick_view(n) for n in normals])
    partial = np.zeros(geo.dims + (3,), np.float32)
    assigned = np.zeros(geo.dims, np.uint8)
    for name in images:
        sel = np.nonzero(choice == name)[0]
        if len(sel) == 0:
            continue
        view = VIEW_BY_NAME[name]
        _, depth = render_mask_depth(geo, view)
        rest = [a for a in range(3) if a != view.axis]
        pos = positions[sel]
        u, v = pos[:, rest[0]], pos[:, rest[1]]
        visible = depth[u, v] == pos[:, view.axis]
        pos = pos[visible]
        partial[tuple(pos.T)] = images[name][u[visible], v[visible]]
        assigned[tuple(pos.T)] = 1
    return ColorGrid(partial), OccupancyGrid(assigned)


def inpaint_nn(partial: ColorGrid, assigned: OccupancyGrid) -> ColorGrid:
    """Every unassigned voxel takes the color of its nearest assigned voxel
    (Euclidean on voxel centers); exact distance ties resolve to the lowest
    linear (x-major) index so the result is reproducible."""
    mask = assigned.data > 0
    if not mask.any():
        raise ValueError("inpainting needs at least one assigned voxel")
    out = partial.data.copy()
    if mask.all():
        return ColorGrid(out)
    src = np.argwhere(mask)
    missing = np.argwhere(~mask)
    tree = cKDTree(src)
    _, idx = tree.query(missing, k=1)
    d2 = ((missing - src[idx]) ** 2).sum(axis=1)
    _, _, Z = partial.dims
    Y = partial.dims[1]
    lin = src[:, 0] * (Y * Z) + src[:, 1] * Z + src[:, 2]
    # ties: everything inside the closed ball of the found radius, keep the
    # candidates at exactly the minimal squared distance, lowest index wins
    balls = tree.query_ball_point(missing, np.sqrt(d2.astype(np.float64)) + 1e-6)
    for t, cands in enumerate(balls):
        best = idx[t]
        if len(cands) > 1:
            p = missing[t]
            best_lin = None
            for ci in cands:
                if ((src[ci] - p) ** 2).sum() == d2[t]:
                    if best_lin is None or lin[ci] < best_lin:
                        best_lin, best = lin[ci], ci
        out[tuple(missing[t])] = partial.data[tuple(src[best])]
    return ColorGrid(out)


@dataclass
class StyleExemplar:
    """One prepared training style: geometry, its smoothed GAN target, the
    volumetric texture, and the coarse shape the generator learns to
    upsample back into it."""

    name: str
    geo: OccupancyGrid
    geo_smoothed: DensityGrid
    tex: ColorGrid
    surface_mask: OccupancyGrid
    coarse: OccupancyGrid
    bbox: BBox


def make_exemplar(geo: OccupancyGrid, images: dict[str, np.ndarray],
                  name: str = "style", sigma: float = 1.0,
                  factor: int = 8) -> StyleExemplar:
    partial, assigned = project_colors(geo, images)
    tex = inpaint_nn(partial, assigned)
    occ = np.argwhere(geo.data > 0)
    bbox = BBox(tuple(int(v) for v in occ.min(axis=0)),
                tuple(int(v) for v in occ.max(axis=0) + 1))
    return StyleExemplar(
        name=name,
        geo=geo,
        geo_smoothed=gaussian_smooth(geo, sigma),
        tex=tex,
        surface_mask=OccupancyGrid(surface_voxels(geo)),
        coarse=downsample_max(geo, factor),
        bbox=bbox,
    )


# ------------------------------------------------------------ synthetic data

@dataclass(frozen=True)
class SynthProfile:
    fine_res: int = 64
    factor: int = 8
    n_contents: int = 2

    def __post_init__(self):
        if self.fine_res % self.factor:
            raise ValueError("fine_res must be divisible by factor")


# u8-exact palette values (v*255 integral) so PNG and VOXB round-trips are lossless
_WALL_PALETTES = [((0.8, 0.6, 0.4), (0.6, 0.4, 0.2)),
                  ((0.8, 0.8, 0.8), (0.4, 0.4, 0.6)),
                  ((0.6, 0.2, 0.2), (0.8, 0.8, 0.6)),
                  ((0.4, 0.6, 0.4), (0.2, 0.4, 0.2))]
_ROOF_COLORS = [(0.6, 0.2, 0.0), (0.2, 0.2, 0.4), (0.4, 0.0, 0.0)]


def _synth_house(rng: np.random.Generator, K: int) -> tuple[np.ndarray, np.ndarray]:
    """One blocky house: box body, prism roof along a random axis, a lattice
    of one-voxel-deep windows, walls with a trim band near the ground.
    Colors are keyed to the geometry (wall/trim/roof zones), never to
    absolute voxel phase: a conv upsampler fed only coarse occupancy has no
    positional signal mid-wall, so phase-locked patterns (stripes, checkers)
    are unlearnable no matter the budget.  Returns raw (occupancy, color)
    arrays."""
    occ = np.zeros((K, K, K), np.uint8)
    col = np.zeros((K, K, K, 3), np.float32)

    m = K // 8
    bx0, bx1 = m + rng.integers(0, m), K - m - rng.integers(0, m)
    bz0, bz1 = m + rng.integers(0, m), K - m - rng.integers(0, m)
    # stories align to the 8-voxel coarse lattice so the wall/roof line is
    # visible in the coarse occupancy
    lo = m // 3 + 1
    body_h = 8 * int(rng.integers(lo, max(lo + 1, m - 2)))
    occ[bx0:bx1, 0:body_h, bz0:bz1] = 1

    wall_a, wall_b = _WALL_PALETTES[rng.integers(0, len(_WALL_PALETTES))]
    trim_h = int(rng.integers(2, 5))
    col[:, trim_h:, :] = wall_a
    col[:, :trim_h, :] = wall_b

    roof_h = int(rng.integers(K // 8, K // 4))
    along_x = bool(rng.random() < 0.5)
    roof = _ROOF_COLORS[rng.integers(0, len(_ROOF_COLORS))]
    for t in range(roof_h):
        inset = 1 + t * ((bx1 - bx0 if not along_x else bz1 - bz0) // (2 * roof_h))
        if along_x:
            z0, z1 = bz0 + inset, bz1 - inset
            if z1 <= z0:
                break
            occ[bx0:bx1, body_h + t, z0:z1] = 1
            col[bx0:bx1, body_h + t, z0:z1] = roof
        else:
            x0, x1 = bx0 + inset, bx1 - inset
            if x1 <= x0:
                break
            occ[x0:x1, body_h + t, bz0:bz1] = 1
            col[x0:x1, body_h + t, bz0:bz1] = roof

    # window lattice: one-voxel-deep notches on both x facades; the exposed
    # inset voxels keep the wall color so windows are geometry-only detail
    w = max(2, K // 16)
    gap = w + int(rng.integers(2, 4))
    for y0 in range(2 * w, body_h - w, gap):
        for z0 in range(bz0 + w, bz1 - w, gap):
            occ[bx0, y0:y0 + w, z0:z0 + w] = 0
            occ[bx1 - 1, y0:y0 + w, z0:z0 + w] = 0
    col[~(occ > 0)] = 0.0
    return occ, col


def render_views(geo: OccupancyGrid, tex: ColorGrid) -> dict[str, np.ndarray]:
    return {v.name: render_color(geo, tex, v).rgb for v in ALL_VIEWS}


def synth_dataset(seed: int, count: int, profile: SynthProfile = SynthProfile()
                  ) -> tuple[list[StyleExemplar], list[dict[str, np.ndarray]],
                             list[OccupancyGrid]]:
    """Deterministic desk-scale dataset: `count` textured style exemplars
    plus `profile.n_contents` extra coarse-only shapes."""
    rng = np.random.default_rng(seed)
    styles, view_sets = [], []
    for i in range(count):
        occ, col = _synth_house(rng, profile.fine_res)
        geo = OccupancyGrid(occ)
        views = render_views(geo, ColorGrid(col))
        styles.append(make_exemplar(geo, views, name=f"style{i:02d}",
                                    factor=profile.factor))
        view_sets.append(views)
    contents = []
    for _ in range(profile.n_contents):
        occ, _ = _synth_house(rng, profile.fine_res)
        contents.append(downsample_max(OccupancyGrid(occ), profile.factor))
    return styles, view_sets, contents


# -------------------------------------------------------------- disk layout

def save_dataset(root, styles: list[StyleExemplar],
                 view_sets: list[dict[str, np.ndarray]],
                 contents: list[OccupancyGrid], preset: str = "synth-house") -> None:
    root = Path(root)
    for ex, views in zip(styles, view_sets):
        d = root / "styles" / ex.name
        (d / "views").mkdir(parents=True, exist_ok=True)
        save_voxb(d / "geo.voxb", ex.geo)
        save_voxb(d / "tex.voxb", ex.tex)
        for name, img in views.items():
            save_png(d / "views" / f"{name}.png", img)
    (root / "contents").mkdir(parents=True, exist_ok=True)
    content_names = [f"content{i:02d}" for i in range(len(contents))]
    for name, c in zip(content_names, contents):
        save_voxb(root / "contents" / f"{name}.voxb", c)
    manifest = {
        "preset": preset,
        "styles": [ex.name for ex in styles],
        "contents": content_names,
        "fine_res": styles[0].geo.dims[0] if styles else 0,
        "coarse_factor": (styles[0].geo.dims[0] // styles[0].coarse.dims[0]
                          if styles else 0),
        "views": [v.name for v in ALL_VIEWS],
        "smooth_sigma": 1.0,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def load_dataset(root) -> tuple[list[StyleExemplar], list[OccupancyGrid], dict]:
    root = Path(root)
    manifest = json.loads((root / "manifest.json").read_text())
    sigma = manifest.get("smooth_sigma", 1.0)
    factor = manifest["coarse_factor"]
    styles = []
    for name in manifest["styles"]:
        d = root / "styles" / name
        geo = load_voxb(d / "geo.voxb")
        tex = load_voxb(d / "tex.voxb")
        occ = np.argwhere(geo.data > 0)
        styles.append(StyleExemplar(
            name=name,
            geo=geo,
            geo_smoothed=gaussian_smooth(geo, sigma),
            tex=tex,
            surface_mask=OccupancyGrid(surface_voxels(geo)),
            coarse=downsample_max(geo, factor),
            bbox=BBox(tuple(int(v) for v in occ.min(axis=0)),
                      tuple(int(v) for v in occ.max(axis=0) + 1)),
        ))
    contents = [load_voxb(root / "contents" / f"{n}.voxb")
                for n in manifest["contents"]]
    return styles, contents, manifest


def load_style_views(root, name: str) -> dict[str, np.ndarray]:
    d = Path(root) / "styles" / name / "views"
    return {p.stem: load_png(p) for p in sorted(d.glob("*.png"))}
