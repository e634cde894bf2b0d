"""Two-phase training: geometry first, then texture on frozen geometry.

A Pipeline owns every network plus the per-style codes.  Each training step
samples one (content, style) pair, runs one discriminator update and one
generator+code update, and checkpoints per epoch.  Style codes are plain
rows of a parameter bank updated by the same optimizer as the generator
(auto-decoder conditioning, no encoder).  Evaluation hooks stop a run early
once the overfit targets are met, which keeps desk-scale schedules short.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Adam, Tensor, load_ckpt, save_ckpt
from .dataprep import StyleExemplar
from .grids import ColorGrid, DensityGrid, OccupancyGrid
from .losses import (LossLog, LossWeights, loss_disc_geo, loss_disc_tex,
                     loss_gen_geo, loss_gen_tex, loss_recon_geo,
                     loss_recon_tex_view, loss_total_geo, loss_total_tex)
from .masks import discriminator_mask_tex, generator_mask, pooled_disc_mask_geo
from .networks import (NetConfig, binarize, coarse_to_tensor, make_disc_2d,
                       make_disc_3d, make_geometry_generator,
                       make_texture_generator, mask_to_tensor, StyleBank)
from .render import VIEW_BY_NAME, ViewHits, precompute_hits, render_color, \
    render_gather

UPSAMPLE_FACTOR = 8

# distinct deterministic RNG streams per consumer, all derived from cfg.seed
_SEED_INIT, _SEED_GEO, _SEED_TEX = 0, 1, 2


@dataclass
class PipelineConfig:
    """Everything needed to build and train one category's pipeline.

    The desk-scale defaults favor runs that finish on a CPU in minutes;
    the paper-scale knobs (receptive field, loss weights, views, symmetry)
    are per-category presets."""

    k: int = 16                       # coarse resolution; output is 8k
    receptive_field: int = 18
    views: tuple[str, ...] = ("+x", "-x", "+y", "+z", "-z")
    symmetry: bool = False
    backbone_channels: int = 20
    up_channels: tuple[int, int, int] = (8, 5, 3)
    disc_channels: tuple[int, ...] = (8, 12, 16, 16, 16)
    style_dim: int = 8
    alpha: float = 1.0                # style-branch weight
    beta: float = 1.0                 # reconstruction weight
    gamma: float = 0.5                # intermediate-resolution weight
    view_beta: dict[str, float] = field(default_factory=dict)
    smooth_sigma: float = 1.0
    dilate_radius: int = 1
    seed: int = 0
    lr: float = 1e-4
    epochs: int = 4
    steps_per_epoch: int = 500
    adversarial: bool = True          # off = pure reconstruction training
    eval_every: int = 25
    min_steps: int = 0
    early_stop_iou: float | None = None    # geometry phase strict-IoU target
    early_stop_mae: float | None = None    # texture phase masked-MAE target
    max_seconds: float | None = None

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"coarse resolution too small: {self.k}")
        self.views = tuple(self.views)
        seen = set()
        for v in self.views:
            if v not in VIEW_BY_NAME:
                raise ValueError(f"unknown view {v!r}")
            if v in seen:
                raise ValueError(f"duplicate view {v!r}")
            seen.add(v)
        if self.epochs < 1 or self.steps_per_epoch < 1:
            raise ValueError("epochs and steps_per_epoch must be positive")
        if self.eval_every < 1:
            raise ValueError("eval_every must be positive")
        if self.lr < 0:
            raise ValueError("negative learning rate")

    @property
    def K(self) -> int:
        return UPSAMPLE_FACTOR * self.k

    @property
    def weights(self) -> LossWeights:
        return LossWeights(alpha=self.alpha, beta=self.beta, gamma=self.gamma,
                           view_beta=dict(self.view_beta))

    @property
    def net_config(self) -> NetConfig:
        return NetConfig(backbone_channels=self.backbone_channels,
                         up_channels=self.up_channels,
                         disc_channels=self.disc_channels,
                         receptive_field=self.receptive_field,
                         style_dim=self.style_dim)


@dataclass
class TrainState:
    phase: str            # "geometry" or "texture"
    epoch: int = 0        # completed epochs
    step: int = 0         # global step counter
    note: str = ""        # why the run ended, when not by schedule


class Pipeline:
    """Networks and style codes for one trained category."""

    def __init__(self, cfg: PipelineConfig, n_styles: int):
        if n_styles < 1:
            raise ValueError("need at least one style")
        self.cfg = cfg
        self.n_styles = n_styles
        nc = cfg.net_config
        rng = np.random.default_rng((cfg.seed, _SEED_INIT))
        self.gen_geo = make_geometry_generator(nc, rng)
        self.gen_tex = make_texture_generator(nc, rng)
        self.disc_full = make_disc_3d(nc, "discK", n_styles, rng)
        self.disc_half = make_disc_3d(nc, "discHalf", n_styles, rng)
        self.discs_tex = {name: make_disc_2d(nc, f"discTex.{name}", n_styles, rng)
                          for name in cfg.views}
        self.bank = StyleBank.create(n_styles, nc.style_dim, rng)

    # ------------------------------------------------------------- params

    def all_params(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for net in (self.gen_geo, self.gen_tex, self.disc_full, self.disc_half,
                    *self.discs_tex.values()):
            out.update(net.params)
        out["style.geo"] = self.bank.geo
        out["style.tex"] = self.bank.tex
        return out

    def _group(self, named: dict[str, Tensor]) -> list[Tensor]:
        # sorted by name so optimizer slots line up across save/load
        return [named[k] for k in sorted(named)]

    def geometry_trainables(self) -> list[Tensor]:
        return self._group({**self.gen_geo.params, "style.geo": self.bank.geo})

    def geometry_disc_params(self) -> list[Tensor]:
        return self._group({**self.disc_full.params, **self.disc_half.params})

    def texture_trainables(self) -> list[Tensor]:
        return self._group({**self.gen_tex.params, "style.tex": self.bank.tex})

    def texture_disc_params(self) -> list[Tensor]:
        merged: dict[str, Tensor] = {}
        for d in self.discs_tex.values():
            merged.update(d.params)
        return self._group(merged)

    # -------------------------------------------------------- persistence

    def save(self, path) -> None:
        save_ckpt(path, {k: t.values for k, t in self.all_params().items()})

    def load(self, path) -> None:
        arrs = load_ckpt(path)
        params = self.all_params()
        missing = sorted(set(params) - set(arrs))
        extra = sorted(set(arrs) - set(params))
        if missing or extra:
            raise ValueError(f"checkpoint mismatch: missing {missing[:3]}, "
                             f"unexpected {extra[:3]}")
        for name, t in params.items():
            if arrs[name].shape != t.values.shape:
                raise ValueError(f"{name}: checkpoint shape {arrs[name].shape}"
                                 f" != model {t.values.shape}")
            t.values[...] = arrs[name]

    @classmethod
    def restore(cls, path, cfg: PipelineConfig) -> "Pipeline":
        n = load_ckpt(path)["style.geo"].shape[0]
        pipe = cls(cfg, n)
        pipe.load(path)
        return pipe

    # ----------------------------------------------------------- forward

    def _gen_masks(self, coarse: OccupancyGrid) -> tuple[Tensor, Tensor]:
        r = self.cfg.dilate_radius
        return (mask_to_tensor(generator_mask(coarse, UPSAMPLE_FACTOR // 2, r)),
                mask_to_tensor(generator_mask(coarse, UPSAMPLE_FACTOR, r)))

    def generate_geometry(self, coarse: OccupancyGrid, style: int) -> OccupancyGrid:
        """Binarized full-resolution geometry for one coarse shape."""
        self._check_style(style)
        m_half, m_full = self._gen_masks(coarse)
        z = self.bank.geo_code(style)
        _, full = self.gen_geo.forward(coarse_to_tensor(coarse), z, z, m_half, m_full)
        return binarize(full.values[0, 0])

    def detailize_full(self, coarse: OccupancyGrid, style: int
                       ) -> tuple[OccupancyGrid, DensityGrid, ColorGrid]:
        """One forward pass of both generators, returning the binarized
        geometry, the masked continuous density it came from (for surface
        extraction at iso 0.5), and the raw color field, which is defined
        everywhere so surface vertices can query it safely."""
        self._check_style(style)
        m_half, m_full = self._gen_masks(coarse)
        zg, zt = self.bank.geo_code(style), self.bank.tex_code(style)
        c_t = coarse_to_tensor(coarse)
        _, full = self.gen_geo.forward(c_t, zg, zg, m_half, m_full)
        density = DensityGrid(full.values[0, 0])
        _, rgb = self.gen_tex.forward(c_t, zg, zt)
        col = ColorGrid(np.moveaxis(rgb.values[0], 0, -1))
        return binarize(density), density, col

    def detailize(self, coarse: OccupancyGrid, style: int
                  ) -> tuple[OccupancyGrid, ColorGrid]:
        """One forward pass of both generators; colors are zeroed outside
        the generated shape so empty input gives an all-zero pair."""
        geo, _, col = self.detailize_full(coarse, style)
        return geo, ColorGrid(col.data * geo.data[..., None])

    def _check_style(self, style: int) -> None:
        if not 0 <= style < self.n_styles:
            raise IndexError(f"style {style} out of range [0, {self.n_styles})")


# ---------------------------------------------------------------------------
# precomputed per-shape data


@dataclass
class _GeoStyle:
    c_t: Tensor            # (1,1,k,k,k) coarse input
    m_half: Tensor         # generator masks for self-reconstruction
    m_full: Tensor
    target_full: Tensor    # smoothed exemplar, the "real" density
    target_half: Tensor
    dm_full: Tensor | None   # disc-output masks; None in recon-only mode
    dm_half: Tensor | None


@dataclass
class _GeoContent:
    c_t: Tensor
    m_half: Tensor
    m_full: Tensor
    dm_full: Tensor | None   # disc-output masks for fakes from this content
    dm_half: Tensor | None
    matches_style: int | None  # style index whose coarse equals this shape


def _halve_density(d: np.ndarray) -> np.ndarray:
    """2x average pooling, the intermediate-resolution real target."""
    X, Y, Z = d.shape
    if X % 2 or Y % 2 or Z % 2:
        raise ValueError(f"cannot halve odd dims {d.shape}")
    return d.reshape(X // 2, 2, Y // 2, 2, Z // 2, 2).mean(
        axis=(1, 3, 5), dtype=np.float32)


def _geo_disc_masks(pipe: Pipeline, coarse: OccupancyGrid) -> tuple[Tensor, Tensor]:
    full_dims = tuple(d * UPSAMPLE_FACTOR for d in coarse.dims)
    half_dims = tuple(d * UPSAMPLE_FACTOR // 2 for d in coarse.dims)
    mf = pooled_disc_mask_geo(coarse, pipe.disc_full.out_dims(full_dims))
    mh = pooled_disc_mask_geo(coarse, pipe.disc_half.out_dims(half_dims))
    return mask_to_tensor(mf), mask_to_tensor(mh)


def _build_geo_style(pipe: Pipeline, st: StyleExemplar,
                     with_disc: bool) -> _GeoStyle:
    m_half, m_full = pipe._gen_masks(st.coarse)
    smoothed = st.geo_smoothed.data
    dm_full, dm_half = (_geo_disc_masks(pipe, st.coarse) if with_disc
                        else (None, None))
    return _GeoStyle(
        c_t=coarse_to_tensor(st.coarse), m_half=m_half, m_full=m_full,
        target_full=ag.tensor(smoothed[None, None]),
        target_half=ag.tensor(_halve_density(smoothed)[None, None]),
        dm_full=dm_full, dm_half=dm_half)


def _build_geo_content(pipe: Pipeline, coarse: OccupancyGrid,
                       styles: list[StyleExemplar],
                       with_disc: bool) -> _GeoContent:
    m_half, m_full = pipe._gen_masks(coarse)
    dm_full, dm_half = (_geo_disc_masks(pipe, coarse) if with_disc
                        else (None, None))
    eq = next((i for i, st in enumerate(styles)
               if np.array_equal(coarse.data, st.coarse.data)), None)
    return _GeoContent(c_t=coarse_to_tensor(coarse), m_half=m_half,
                       m_full=m_full, dm_full=dm_full, dm_half=dm_half,
                       matches_style=eq)


# ---------------------------------------------------------------------------
# checkpoint bundles (weights + optimizer moments + loop state)


def _save_bundle(prefix: str, pipe: Pipeline, opt_d: Adam, opt_g: Adam,
                 state: TrainState, rng: np.random.Generator) -> None:
    pipe.save(prefix + ".ckpt")
    arrs = {}
    for tag, opt in (("d", opt_d), ("g", opt_g)):
        for k, v in opt.state_arrays().items():
            arrs[f"{tag}.{k}"] = v
    save_ckpt(prefix + ".opt.ckpt", arrs)
    meta = {"phase": state.phase, "epoch": state.epoch, "step": state.step,
            "t_d": opt_d.t, "t_g": opt_g.t, "rng": rng.bit_generator.state}
    with open(prefix + ".state.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def _load_bundle(prefix: str, pipe: Pipeline, opt_d: Adam, opt_g: Adam,
                 state: TrainState, rng: np.random.Generator,
                 expect_phase: str) -> None:
    pipe.load(prefix + ".ckpt")
    with open(prefix + ".state.json") as fh:
        meta = json.load(fh)
    if meta["phase"] != expect_phase:
        raise ValueError(f"checkpoint is from phase {meta['phase']!r}, "
                         f"expected {expect_phase!r}")
    arrs = load_ckpt(prefix + ".opt.ckpt")
    opt_d.load_state_arrays(
        {k[2:]: v for k, v in arrs.items() if k.startswith("d.")}, meta["t_d"])
    opt_g.load_state_arrays(
        {k[2:]: v for k, v in arrs.items() if k.startswith("g.")}, meta["t_g"])
    state.epoch, state.step = meta["epoch"], meta["step"]
    rng.bit_generator.state = meta["rng"]


def _ensure_finite(name: str, loss: Tensor, step: int) -> float:
    v = loss.item()
    if not math.isfinite(v):
        raise RuntimeError(f"non-finite {name} loss ({v}) at step {step}")
    return v


class _Budget:
    """Wall-clock cutoff shared by both phase loops."""

    def __init__(self, max_seconds: float | None):
        self.t0 = time.monotonic()
        self.max_seconds = max_seconds

    def exhausted(self) -> bool:
        return (self.max_seconds is not None
                and time.monotonic() - self.t0 > self.max_seconds)


# ---------------------------------------------------------------------------
# geometry phase


def eval_geometry_iou(pipe: Pipeline, styles: list[StyleExemplar]) -> float:
    """Worst strict IoU of self-reconstruction across styles."""
    from .metrics import strict_iou
    return min(strict_iou(pipe.generate_geometry(st.coarse, i), st.coarse)
               for i, st in enumerate(styles))


def _validate_geometry_data(cfg: PipelineConfig, styles: list[StyleExemplar],
                            contents: list[OccupancyGrid]) -> None:
    if not styles or not contents:
        raise ValueError("need at least one style and one content shape")
    want = (cfg.k,) * 3
    for st in styles:
        if st.coarse.dims != want:
            raise ValueError(f"style {st.name!r} coarse dims {st.coarse.dims}"
                             f" != configured {want}")
    for i, c in enumerate(contents):
        if c.dims != want:
            raise ValueError(f"content {i} dims {c.dims} != configured {want}")


def train_geometry(pipe: Pipeline, styles: list[StyleExemplar],
                   contents: list[OccupancyGrid], *,
                   log_path=None, ckpt_dir=None, resume=None) -> TrainState:
    """Adversarial + reconstruction training of the geometry generator.

    Per step: sample a content and a style, update both discriminators on
    real (smoothed exemplar) vs fake, then update the generator and the
    sampled style's code on the adversarial and reconstruction losses.  The
    reconstruction term always compares the style's own coarse shape against
    its smoothed exemplar; when the sampled content is that same shape the
    forward pass is shared.  With cfg.adversarial off, only the
    reconstruction term trains (no discriminator updates)."""
    cfg = pipe.cfg
    _validate_geometry_data(cfg, styles, contents)
    if pipe.n_styles != len(styles):
        raise ValueError(f"pipeline built for {pipe.n_styles} styles, "
                         f"dataset has {len(styles)}")
    spacks = [_build_geo_style(pipe, st, cfg.adversarial) for st in styles]
    cpacks = [_build_geo_content(pipe, c, styles, cfg.adversarial)
              for c in contents]
    w = cfg.weights
    d_params = pipe.geometry_disc_params()
    g_params = pipe.geometry_trainables()
    opt_d = Adam(d_params, cfg.lr)
    opt_g = Adam(g_params, cfg.lr)
    if ckpt_dir:
        os.makedirs(ckpt_dir, exist_ok=True)
    state = TrainState(phase="geometry")
    rng = np.random.default_rng((cfg.seed, _SEED_GEO))
    if resume is not None:
        _load_bundle(resume, pipe, opt_d, opt_g, state, rng, "geometry")
    log = LossLog(log_path) if log_path else None
    budget = _Budget(cfg.max_seconds)
    try:
        for epoch in range(state.epoch, cfg.epochs):
            for _ in range(cfg.steps_per_epoch):
                s = int(rng.integers(len(spacks)))
                c = int(rng.integers(len(cpacks)))
                sp, cp = spacks[s], cpacks[c]
                z = pipe.bank.geo_code(s)
                fake_half, fake_full = pipe.gen_geo.forward(
                    cp.c_t, z, z, cp.m_half, cp.m_full)
                d_val = 0.0
                if cfg.adversarial:
                    opt_d.zero_grad()
                    d_loss = loss_disc_geo(
                        pipe.disc_full, pipe.disc_half,
                        sp.target_full, fake_full, sp.target_half, fake_half,
                        s, sp.dm_full, cp.dm_full, sp.dm_half, cp.dm_half)
                    d_val = _ensure_finite("discriminator", d_loss, state.step)
                    ag.backward(d_loss, wrt=d_params)
                    opt_d.step()
                opt_g.zero_grad()
                if cp.matches_style == s:
                    rec_half, rec_full = fake_half, fake_full
                else:
                    rec_half, rec_full = pipe.gen_geo.forward(
                        sp.c_t, z, z, sp.m_half, sp.m_full)
                recon = loss_recon_geo(rec_full, sp.target_full,
                                       rec_half, sp.target_half)
                if cfg.adversarial:
                    g_adv = loss_gen_geo(pipe.disc_full, pipe.disc_half,
                                         fake_full, fake_half, s,
                                         cp.dm_full, cp.dm_half, w)
                    total = loss_total_geo(g_adv, recon, w)
                else:
                    total = recon
                t_val = _ensure_finite("generator", total, state.step)
                ag.backward(total, wrt=g_params)
                opt_g.step()
                state.step += 1
                if log:
                    if cfg.adversarial:
                        log.append(state.step, "disc", d_val)
                    log.append(state.step, "recon", recon.item())
                    log.append(state.step, "total", t_val)
                if (cfg.early_stop_iou is not None
                        and state.step >= cfg.min_steps
                        and state.step % cfg.eval_every == 0):
                    iou = eval_geometry_iou(pipe, styles)
                    if log:
                        log.append(state.step, "strict_iou", iou)
                    if iou >= cfg.early_stop_iou:
                        state.note = f"reached strict IoU {iou:.4f}"
                        break
                if budget.exhausted():
                    state.note = "time budget exhausted"
                    break
            else:
                state.epoch = epoch + 1
                if ckpt_dir:
                    _save_bundle(os.path.join(ckpt_dir, f"geo_ep{state.epoch:03d}"),
                                 pipe, opt_d, opt_g, state, rng)
                continue
            state.epoch = epoch + 1
            break
    finally:
        if log:
            log.close()
    if ckpt_dir:
        _save_bundle(os.path.join(ckpt_dir, "geo"), pipe, opt_d, opt_g,
                     state, rng)
    return state


# ---------------------------------------------------------------------------
# texture phase


@dataclass
class _TexStyle:
    c_t: Tensor
    hits: list[ViewHits]         # first-hit tables on the frozen geometry
    reals: list[Tensor]          # (1,3,H,W) exemplar renders
    real_masks: list[np.ndarray]
    dmasks: list[Tensor]         # (1,1,h,w) disc-output masks


def _build_tex_style(pipe: Pipeline, idx: int, st: StyleExemplar,
                     views) -> _TexStyle:
    frozen = pipe.generate_geometry(st.coarse, idx)
    hits, reals, rmasks, dmasks = [], [], [], []
    for v in views:
        hits.append(precompute_hits(frozen, v))
        r = render_color(st.geo, st.tex, v)
        reals.append(ag.tensor(np.moveaxis(r.rgb, -1, 0)[None]))
        rmasks.append(r.mask)
        hw = pipe.discs_tex[v.name].out_dims(r.mask.shape)
        dm = discriminator_mask_tex(st.coarse, v, hw, UPSAMPLE_FACTOR,
                                    pipe.cfg.dilate_radius)
        dmasks.append(ag.tensor(dm[None, None].astype(np.float32)))
    return _TexStyle(coarse_to_tensor(st.coarse), hits, reals, rmasks, dmasks)


def _masked_mae(fake: np.ndarray, real: np.ndarray, mask: np.ndarray) -> float:
    """Mean absolute difference over mask pixels, channels averaged.
    Disjoint silhouettes score worst so a degenerate geometry can never
    look like a texture match."""
    m = mask.astype(bool)
    if not m.any():
        return 1.0
    return float(np.abs(fake[:, :, m] - real[:, :, m]).mean())


def _eval_tex_packs(pipe: Pipeline, packs: list[_TexStyle]) -> float:
    worst = 0.0
    for s, tp in enumerate(packs):
        zg, zt = pipe.bank.geo_code(s), pipe.bank.tex_code(s)
        _, colors = pipe.gen_tex.forward(tp.c_t, zg, zt)
        per_view = [
            _masked_mae(render_gather(colors, h).values, rt.values, h.mask & rm)
            for h, rt, rm in zip(tp.hits, tp.reals, tp.real_masks)]
        worst = max(worst, float(np.mean(per_view)))
    return worst


def eval_texture_mae(pipe: Pipeline, styles: list[StyleExemplar]) -> float:
    """Worst per-style mean over views of the masked per-pixel MAE between
    self-reconstruction renders and exemplar renders.  The mask is the
    intersection of the two silhouettes."""
    views = [VIEW_BY_NAME[n] for n in pipe.cfg.views]
    worst = 0.0
    for s, st in enumerate(styles):
        geo, col = pipe.detailize(st.coarse, s)
        per_view = []
        for v in views:
            fake = render_color(geo, col, v)
            real = render_color(st.geo, st.tex, v)
            m = (fake.mask & real.mask).astype(bool)
            per_view.append(
                float(np.abs(fake.rgb[m] - real.rgb[m]).mean()) if m.any() else 1.0)
        worst = max(worst, float(np.mean(per_view)))
    return worst


def train_texture(pipe: Pipeline, styles: list[StyleExemplar], *,
                  log_path=None, ckpt_dir=None, resume=None) -> TrainState:
    """Per-view adversarial + reconstruction training of the texture
    generator against renders of the exemplars, with the geometry generator
    and geometry codes left untouched.  Fake images are differentiable
    gathers of the color field at the frozen geometry's first-hit voxels,
    so gradients flow into visible voxels only."""
    cfg = pipe.cfg
    if not cfg.views:
        raise ValueError("texture training needs at least one view")
    if not styles:
        raise ValueError("need at least one style")
    if pipe.n_styles != len(styles):
        raise ValueError(f"pipeline built for {pipe.n_styles} styles, "
                         f"dataset has {len(styles)}")
    views = [VIEW_BY_NAME[n] for n in cfg.views]
    discs = [pipe.discs_tex[n] for n in cfg.views]
    w = cfg.weights
    d_params = pipe.texture_disc_params()
    g_params = pipe.texture_trainables()
    opt_d = Adam(d_params, cfg.lr)
    opt_g = Adam(g_params, cfg.lr)
    if ckpt_dir:
        os.makedirs(ckpt_dir, exist_ok=True)
    state = TrainState(phase="texture")
    rng = np.random.default_rng((cfg.seed, _SEED_TEX))
    if resume is not None:
        _load_bundle(resume, pipe, opt_d, opt_g, state, rng, "texture")
    # hit tables come from the frozen geometry, so weights must be final
    # before packs are built; a resumed run restores them just above
    packs = [_build_tex_style(pipe, i, st, views) for i, st in enumerate(styles)]
    log = LossLog(log_path) if log_path else None
    budget = _Budget(cfg.max_seconds)
    try:
        for epoch in range(state.epoch, cfg.epochs):
            for _ in range(cfg.steps_per_epoch):
                s = int(rng.integers(len(packs)))
                tp = packs[s]
                zg, zt = pipe.bank.geo_code(s), pipe.bank.tex_code(s)
                _, colors = pipe.gen_tex.forward(tp.c_t, zg, zt)
                fakes = [render_gather(colors, h) for h in tp.hits]
                d_val = 0.0
                if cfg.adversarial:
                    opt_d.zero_grad()
                    d_loss = loss_disc_tex(discs, tp.reals, fakes, s,
                                           tp.dmasks, tp.dmasks)
                    d_val = _ensure_finite("discriminator", d_loss, state.step)
                    ag.backward(d_loss, wrt=d_params)
                    opt_d.step()
                opt_g.zero_grad()
                recons = [(name, loss_recon_tex_view(f, r))
                          for name, f, r in zip(cfg.views, fakes, tp.reals)]
                if cfg.adversarial:
                    g_adv = loss_gen_tex(discs, fakes, s, tp.dmasks, w)
                    total = loss_total_tex(g_adv, recons, w)
                else:
                    total = None
                    for name, r in recons:
                        term = ag.scale(r, w.recon_weight_for_view(name))
                        total = term if total is None else ag.add(total, term)
                t_val = _ensure_finite("generator", total, state.step)
                ag.backward(total, wrt=g_params)
                opt_g.step()
                state.step += 1
                if log:
                    if cfg.adversarial:
                        log.append(state.step, "disc", d_val)
                    log.append(state.step, "recon",
                               sum(r.item() for _, r in recons))
                    log.append(state.step, "total", t_val)
                if (cfg.early_stop_mae is not None
                        and state.step >= cfg.min_steps
                        and state.step % cfg.eval_every == 0):
                    mae = _eval_tex_packs(pipe, packs)
                    if log:
                        log.append(state.step, "masked_mae", mae)
                    if mae <= cfg.early_stop_mae:
                        state.note = f"reached masked MAE {mae:.4f}"
                        break
                if budget.exhausted():
                    state.note = "time budget exhausted"
                    break
            else:
                state.epoch = epoch + 1
                if ckpt_dir:
                    _save_bundle(os.path.join(ckpt_dir, f"tex_ep{state.epoch:03d}"),
                                 pipe, opt_d, opt_g, state, rng)
                continue
            state.epoch = epoch + 1
            break
    finally:
        if log:
            log.close()
    if ckpt_dir:
        _save_bundle(os.path.join(ckpt_dir, "tex"), pipe, opt_d, opt_g,
                     state, rng)
    return state
