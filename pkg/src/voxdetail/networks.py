"""Network architectures: detail generators (geometry and texture), 3D/2D
patch discriminators, and the learnable per-style code bank.

Generators are fully convolutional with zero-padded "same" convolutions; the
8x upsampling lives in three nearest-neighbor doublings, each followed by a
convolution.  Discriminators use unpadded convolutions whose kernel/stride
recipe realizes an exact 18 or 36 receptive field; every output scalar judges
one receptive-field-sized patch, with N+1 channels (global + one per style).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .grids import DensityGrid, OccupancyGrid

# kernel sizes and strides realizing each receptive field with five
# valid convolutions (the sixth 1x1 head leaves the field unchanged)
_DISC_RECIPES = {
    18: ((4, 3, 3, 3, 3), (1, 2, 1, 1, 1)),
    36: ((4, 3, 4, 4, 4), (1, 2, 2, 1, 1)),
}


@dataclass
class NetConfig:
    """Channel widths and activation knobs (desk-scale defaults)."""

    backbone_channels: int = 24
    up_channels: tuple[int, int, int] = (16, 10, 6)
    disc_channels: tuple[int, int, int, int, int] = (16, 24, 32, 32, 32)
    receptive_field: int = 18
    style_dim: int = 8
    leaky_slope: float = 0.02

    def __post_init__(self):
        if self.receptive_field not in _DISC_RECIPES:
            raise ValueError(f"receptive field must be 18 or 36, got {self.receptive_field}")


def _init_conv(rng, out_ch, in_ch, *kdims) -> np.ndarray:
    fan_in = in_ch * int(np.prod(kdims))
    return (rng.standard_normal((out_ch, in_ch) + kdims) / np.sqrt(fan_in)).astype(np.float32)


def _param(store: dict[str, Tensor], name: str, values: np.ndarray) -> None:
    store[name] = Tensor(values, requires_grad=True)


class DetailGenerator:
    """Shared generator topology: 5-layer conv backbone with a style code
    concatenated after every convolution, then 3 upsampling stages with the
    code concatenated after the first two.  The geometry flavor adds an
    intermediate head after the second stage; the texture flavor conditions
    the backbone on the frozen geometry code and emits RGB at full
    resolution only."""

    def __init__(self, cfg: NetConfig, prefix: str, out_channels: int,
                 with_half_head: bool, params: dict[str, Tensor]):
        self.cfg = cfg
        self.prefix = prefix
        self.out_channels = out_channels
        self.with_half_head = with_half_head
        self.params = params

    @staticmethod
    def init_params(cfg: NetConfig, prefix: str, out_channels: int,
                    with_half_head: bool, rng: np.random.Generator) -> dict[str, Tensor]:
        gb, (u0, u1, u2), sd = cfg.backbone_channels, cfg.up_channels, cfg.style_dim
        p: dict[str, Tensor] = {}
        ins = [1] + [gb + sd] * 4
        for i, cin in enumerate(ins):
            _param(p, f"{prefix}.backbone.{i}.weight", _init_conv(rng, gb, cin, 3, 3, 3))
            _param(p, f"{prefix}.backbone.{i}.bias", np.zeros(gb, np.float32))
        up_ins = (gb + sd, u0 + sd, u1 + sd)
        for j, (cin, cout) in enumerate(zip(up_ins, (u0, u1, u2))):
            _param(p, f"{prefix}.up.{j}.weight", _init_conv(rng, cout, cin, 3, 3, 3))
            _param(p, f"{prefix}.up.{j}.bias", np.zeros(cout, np.float32))
        if with_half_head:
            _param(p, f"{prefix}.head.half.weight", _init_conv(rng, out_channels, u1, 3, 3, 3))
            _param(p, f"{prefix}.head.half.bias", np.zeros(out_channels, np.float32))
        _param(p, f"{prefix}.head.full.weight", _init_conv(rng, out_channels, u2, 3, 3, 3))
        _param(p, f"{prefix}.head.full.bias", np.zeros(out_channels, np.float32))
        return p

    def _conv(self, name: str, x: Tensor) -> Tensor:
        return ag.conv3d(x, self.params[f"{name}.weight"], self.params[f"{name}.bias"],
                         stride=1, padding=1)

    def forward(self, c: Tensor, z_backbone: Tensor, z_up: Tensor,
                mask_half: Tensor | None = None,
                mask_full: Tensor | None = None) -> tuple[Tensor | None, Tensor]:
        """c is (1, 1, d, h, w) with values in {0,1}; returns (half, full)
        where half is None unless the generator has an intermediate head.
        Masks, when given, multiply the matching head output elementwise."""
        slope = self.cfg.leaky_slope
        x = c
        for i in range(5):
            x = ag.leaky_relu(self._conv(f"{self.prefix}.backbone.{i}", x), slope)
            x = ag.concat_style(x, z_backbone)
        half = None
        for j in range(3):
            x = ag.upsample2x_nearest(x)
            x = ag.leaky_relu(self._conv(f"{self.prefix}.up.{j}", x), slope)
            if j == 1 and self.with_half_head:
                half = ag.sigmoid(self._conv(f"{self.prefix}.head.half", x))
                if mask_half is not None:
                    half = ag.mul(half, mask_half)
            if j < 2:
                x = ag.concat_style(x, z_up)
        full = ag.sigmoid(self._conv(f"{self.prefix}.head.full", x))
        if mask_full is not None:
            full = ag.mul(full, mask_full)
        return half, full


def make_geometry_generator(cfg: NetConfig, rng: np.random.Generator
                            ) -> DetailGenerator:
    p = DetailGenerator.init_params(cfg, "geo", 1, True, rng)
    return DetailGenerator(cfg, "geo", 1, True, p)


def make_texture_generator(cfg: NetConfig, rng: np.random.Generator
                           ) -> DetailGenerator:
    p = DetailGenerator.init_params(cfg, "tex", 3, False, rng)
    return DetailGenerator(cfg, "tex", 3, False, p)


class PatchDiscriminator:
    """Five unpadded conv+leaky_relu layers and a 1x1 sigmoid head with
    n_styles+1 channels; works in 3D (occupancy/density input) or 2D
    (rendered RGB input) depending on `spatial`."""

    def __init__(self, cfg: NetConfig, prefix: str, n_styles: int, spatial: int,
                 params: dict[str, Tensor]):
        self.cfg = cfg
        self.prefix = prefix
        self.n_styles = n_styles
        self.spatial = spatial
        self.params = params
        self.kernels, self.strides = _DISC_RECIPES[cfg.receptive_field]

    @staticmethod
    def init_params(cfg: NetConfig, prefix: str, n_styles: int, spatial: int,
                    rng: np.random.Generator) -> dict[str, Tensor]:
        kernels, _ = _DISC_RECIPES[cfg.receptive_field]
        chans = cfg.disc_channels
        in_ch = 1 if spatial == 3 else 3
        p: dict[str, Tensor] = {}
        ins = (in_ch,) + chans[:-1]
        for i, (cin, cout, k) in enumerate(zip(ins, chans, kernels)):
            _param(p, f"{prefix}.conv.{i}.weight",
                   _init_conv(rng, cout, cin, *([k] * spatial)))
            _param(p, f"{prefix}.conv.{i}.bias", np.zeros(cout, np.float32))
        _param(p, f"{prefix}.head.weight",
               _init_conv(rng, n_styles + 1, chans[-1], *([1] * spatial)))
        _param(p, f"{prefix}.head.bias", np.zeros(n_styles + 1, np.float32))
        return p

    def out_dims(self, in_dims: tuple[int, ...]) -> tuple[int, ...]:
        """Valid-convolution arithmetic for the configured recipe."""
        dims = list(in_dims)
        for k, s in zip(self.kernels, self.strides):
            for a in range(len(dims)):
                d = (dims[a] - k) // s + 1
                if d < 1:
                    raise ValueError(f"input {in_dims} too small for receptive "
                                     f"field {self.cfg.receptive_field}")
                dims[a] = d
        return tuple(dims)

    def forward(self, x: Tensor) -> Tensor:
        """(1, C_in, ...) -> (1, n_styles+1, ...) patch scores in (0, 1)."""
        conv = ag.conv3d if self.spatial == 3 else ag.conv2d
        slope = self.cfg.leaky_slope
        for i, s in enumerate(self.strides):
            x = conv(x, self.params[f"{self.prefix}.conv.{i}.weight"],
                     self.params[f"{self.prefix}.conv.{i}.bias"], stride=s)
            x = ag.leaky_relu(x, slope)
        x = conv(x, self.params[f"{self.prefix}.head.weight"],
                 self.params[f"{self.prefix}.head.bias"])
        return ag.sigmoid(x)

    def branch(self, scores: Tensor, style: int | None) -> Tensor:
        """Channel 0 is the global branch; channel 1+s judges style s."""
        ch = 0 if style is None else 1 + style
        if ch >= self.n_styles + 1:
            raise IndexError(f"style branch {style} out of range")
        return ag.slice_channels(scores, ch, ch + 1)


def make_disc_3d(cfg: NetConfig, prefix: str, n_styles: int,
                 rng: np.random.Generator) -> PatchDiscriminator:
    p = PatchDiscriminator.init_params(cfg, prefix, n_styles, 3, rng)
    return PatchDiscriminator(cfg, prefix, n_styles, 3, p)


def make_disc_2d(cfg: NetConfig, prefix: str, n_styles: int,
                 rng: np.random.Generator) -> PatchDiscriminator:
    p = PatchDiscriminator.init_params(cfg, prefix, n_styles, 2, rng)
    return PatchDiscriminator(cfg, prefix, n_styles, 2, p)


@dataclass
class StyleBank:
    """Per-exemplar learnable 8-dim codes, optimized auto-decoder style.
    Geometry codes are frozen (requires_grad off) during the texture phase."""

    geo: Tensor
    tex: Tensor

    @staticmethod
    def create(n_styles: int, style_dim: int, rng: np.random.Generator) -> "StyleBank":
        mk = lambda: Tensor(
            (0.02 * rng.standard_normal((n_styles, style_dim))).astype(np.float32),
            requires_grad=True)
        return StyleBank(geo=mk(), tex=mk())

    @property
    def n_styles(self) -> int:
        return self.geo.shape[0]

    def geo_code(self, s: int) -> Tensor:
        return ag.select_row(self.geo, s)

    def tex_code(self, s: int) -> Tensor:
        return ag.select_row(self.tex, s)


def binarize(d, threshold: float = 0.5) -> OccupancyGrid:
    """Occupancy from density: cell = 1 iff value > threshold."""
    data = d.data if isinstance(d, DensityGrid) else np.asarray(d)
    return OccupancyGrid((data > threshold).astype(np.uint8))


def coarse_to_tensor(g: OccupancyGrid) -> Tensor:
    """Network input: the raw {0,1} coarse grid as a (1,1,X,Y,Z) tensor,
    no smoothing (smoothing applies to style targets only)."""
    return ag.tensor(g.data[None, None].astype(np.float32))


def mask_to_tensor(m: OccupancyGrid) -> Tensor:
    return ag.tensor(m.data[None, None].astype(np.float32))
