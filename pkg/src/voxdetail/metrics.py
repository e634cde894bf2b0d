"""Evaluation metrics.

Strict-IoU checks that the output downsamples back to the coarse input;
Loose-IoU forgives extra occupancy inside the one-ring dilation of the
input.  The local-patch scores (LP and Div) measure how much of the output
is assembled from patches that also occur in the exemplar style shapes,
matched exhaustively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import OccupancyGrid, dilate, downsample_max


@dataclass(frozen=True)
class PatchSpec:
    """Local-patch extraction parameters at output resolution.  A patch
    qualifies for scoring only if it contains at least one surface voxel."""

    size: int = 16
    stride: int = 8

    def __post_init__(self):
        if self.size < 1 or self.stride < 1:
            raise ValueError("patch size and stride must be >= 1")


@dataclass(frozen=True)
class LPResult:
    score: float
    qualifying: int


def _occ(a) -> np.ndarray:
    return (a.data if isinstance(a, OccupancyGrid) else np.asarray(a)) > 0


def _downsample_factor(output: OccupancyGrid, coarse: OccupancyGrid) -> int:
    fx, fy, fz = (o // c for o, c in zip(output.dims, coarse.dims))
    if (fx != fy or fy != fz
            or any(o != f * c for o, f, c in zip(output.dims, (fx, fy, fz), coarse.dims))):
        raise ValueError(f"output dims {output.dims} are not a uniform integer "
                         f"multiple of input dims {coarse.dims}")
    return fx


def strict_iou(output: OccupancyGrid, coarse: OccupancyGrid) -> float:
    """IoU between the max-downsampled output and the coarse input."""
    d = downsample_max(output, _downsample_factor(output, coarse))
    return patch_similarity(d.data, coarse.data, "iou")


def loose_iou(output: OccupancyGrid, coarse: OccupancyGrid,
              dilate_radius: int = 1) -> float:
    """Strict-IoU, but cells in dilate(input, r) minus the input itself are
    excluded from both intersection and union, so detail spilling into the
    dilation ring is not penalized."""
    d = _occ(downsample_max(output, _downsample_factor(output, coarse)))
    inp = _occ(coarse)
    ring = _occ(dilate(coarse, dilate_radius)) & ~inp
    keep = ~ring
    inter = int((d & inp & keep).sum())
    union = int(((d | inp) & keep).sum())
    return 1.0 if union == 0 else inter / union


def patch_similarity(p, q, metric: str = "iou") -> float:
    """Occupied voxels as positives; two empty patches count as identical."""
    a, b = _occ(p), _occ(q)
    if a.shape != b.shape:
        raise ValueError("patches must share a shape")
    inter = int((a & b).sum())
    if metric == "iou":
        union = int((a | b).sum())
        return 1.0 if union == 0 else inter / union
    if metric == "fscore":
        total = int(a.sum()) + int(b.sum())
        return 1.0 if total == 0 else 2 * inter / total
    raise ValueError(f"unknown metric {metric!r}")


def surface_voxels(occ) -> np.ndarray:
    """Occupied voxels with at least one empty 6-neighbor; voxels on the
    grid boundary treat the outside as empty."""
    o = _occ(occ)
    p = np.pad(o, 1)
    enclosed = (p[:-2, 1:-1, 1:-1] & p[2:, 1:-1, 1:-1]
                & p[1:-1, :-2, 1:-1] & p[1:-1, 2:, 1:-1]
                & p[1:-1, 1:-1, :-2] & p[1:-1, 1:-1, 2:])
    return (o & ~enclosed).astype(np.uint8)


def extract_patches(occ, spec: PatchSpec, qualifying_only: bool = False):
    """Fully-inside patches at the given stride, flattened row-major, plus
    their origin coordinates.  With qualifying_only, keeps patches whose
    window contains at least one surface voxel of the shape."""
    o = _occ(occ).astype(np.float32)
    s, st = spec.size, spec.stride
    if any(d < s for d in o.shape):
        return np.zeros((0, s ** 3), np.float32), []
    win = np.lib.stride_tricks.sliding_window_view(o, (s, s, s))[::st, ::st, ::st]
    nx, ny, nz = win.shape[:3]
    flat = win.reshape(nx * ny * nz, s ** 3)
    origins = [(i * st, j * st, k * st)
               for i in range(nx) for j in range(ny) for k in range(nz)]
    if qualifying_only:
        surf = surface_voxels(occ).astype(np.float32)
        sw = np.lib.stride_tricks.sliding_window_view(surf, (s, s, s))[::st, ::st, ::st]
        keep = sw.reshape(nx * ny * nz, s ** 3).sum(axis=1) > 0
        flat = flat[keep]
        origins = [og for og, k in zip(origins, keep) if k]
    return np.ascontiguousarray(flat), origins


def _best_similarity(out_p: np.ndarray, style_p: np.ndarray, metric: str) -> np.ndarray:
    """Per output patch, the best similarity over one style's patch pool.
    Counts are small integers, exact in float32 matmuls."""
    if len(out_p) == 0 or len(style_p) == 0:
        return np.zeros(len(out_p), np.float64)
    inter = (out_p @ style_p.T).astype(np.float64)
    pc = out_p.sum(axis=1, dtype=np.float64)[:, None]
    qc = style_p.sum(axis=1, dtype=np.float64)[None, :]
    if metric == "iou":
        union = pc + qc - inter
        sim = np.where(union > 0, inter / np.maximum(union, 1e-12), 1.0)
    elif metric == "fscore":
        total = pc + qc
        sim = np.where(total > 0, 2 * inter / np.maximum(total, 1e-12), 1.0)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return sim.max(axis=1)


def lp_score(output, styles, spec: PatchSpec = PatchSpec(),
             metric: str = "iou", threshold: float = 0.95) -> LPResult:
    """Fraction of qualifying output patches whose best match over every
    style patch reaches the threshold; NaN with count 0 when the output has
    no qualifying patches."""
    out_p, _ = extract_patches(output, spec, qualifying_only=True)
    if len(out_p) == 0:
        return LPResult(float("nan"), 0)
    best = np.zeros(len(out_p), np.float64)
    for s in styles:
        sp, _ = extract_patches(s, spec)
        np.maximum(best, _best_similarity(out_p, sp, metric), out=best)
    return LPResult(float((best >= threshold).sum() / len(out_p)), len(out_p))


def similar_patch_count(output, style, spec: PatchSpec,
                        metric: str = "iou", threshold: float = 0.95) -> int:
    """Number of qualifying output patches similar to at least one patch of
    the given style shape."""
    out_p, _ = extract_patches(output, spec, qualifying_only=True)
    sp, _ = extract_patches(style, spec)
    best = _best_similarity(out_p, sp, metric)
    return int((best >= threshold).sum())


def div_score(outputs: dict[tuple[int, int], OccupancyGrid], styles,
              spec: PatchSpec = PatchSpec(), metric: str = "iou",
              threshold: float = 0.95) -> float:
    """Style-faithfulness across a grid of (content i, style j) outputs.

    N_ijk counts output (i,j) patches similar to style k; subtracting the
    per-style mean over j removes the bias of styles that match everything,
    and the pair scores when its designated style j wins the argmax."""
    contents = sorted({i for i, _ in outputs})
    n_styles = len(styles)
    expected = {(i, j) for i in contents for j in range(n_styles)}
    if set(outputs) != expected:
        raise ValueError("outputs must cover every (content, style) pair")
    counts = np.zeros((len(contents), n_styles, n_styles), np.float64)
    for a, i in enumerate(contents):
        for j in range(n_styles):
            for k in range(n_styles):
                counts[a, j, k] = similar_patch_count(
                    outputs[(i, j)], styles[k], spec, metric, threshold)
    debiased = counts - counts.mean(axis=1, keepdims=True)
    wins = debiased.argmax(axis=2) == np.arange(n_styles)[None, :]
    return float(wins.mean())
