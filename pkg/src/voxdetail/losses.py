"""Training objectives: masked least-squares GAN terms with a global branch
plus one branch per style, at two geometry resolutions and per rendered view
for texture, and the volume- or area-normalized reconstruction terms.

Discriminator losses treat generator outputs as constants (detached
internally); generator losses backpropagate through the discriminator into
the fake sample without touching discriminator gradients when the caller
restricts the backward pass to generator parameters.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .networks import PatchDiscriminator


@dataclass
class LossWeights:
    """alpha weighs style branches, beta the reconstruction terms, gamma the
    intermediate-resolution adversarial terms.  The texture phase reuses
    alpha and beta unless gamma1/gamma2 are set explicitly; view_beta maps a
    view name to a reconstruction weight overriding the default."""

    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.5
    gamma1: float | None = None
    gamma2: float | None = None
    view_beta: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for v in (self.alpha, self.beta, self.gamma,
                  self.gamma1 or 0.0, self.gamma2 or 0.0):
            if v < 0:
                raise ValueError("loss weights must be non-negative")

    @property
    def style_weight_tex(self) -> float:
        return self.alpha if self.gamma1 is None else self.gamma1

    @property
    def recon_weight_tex(self) -> float:
        return self.beta if self.gamma2 is None else self.gamma2

    def recon_weight_for_view(self, view_name: str) -> float:
        return self.view_beta.get(view_name, self.recon_weight_tex)


def _const(shape, value) -> Tensor:
    return ag.tensor(np.full(shape, value, np.float32))


def _branch_term(disc: PatchDiscriminator, scores: Tensor, style: int | None,
                 target: float, mask: Tensor) -> Tensor:
    b = disc.branch(scores, style)
    return ag.masked_mse(b, _const(b.shape, target), mask)


def _disc_pair(disc: PatchDiscriminator, real: Tensor, fake: Tensor,
               style: int, mask_real: Tensor, mask_fake: Tensor) -> Tensor:
    """Real toward 1 and fake toward 0, on the global branch and the branch
    of the style being trained."""
    sr = disc.forward(real)
    sf = disc.forward(fake.detach())
    return ag.add_many([
        _branch_term(disc, sr, None, 1.0, mask_real),
        _branch_term(disc, sf, None, 0.0, mask_fake),
        _branch_term(disc, sr, style, 1.0, mask_real),
        _branch_term(disc, sf, style, 0.0, mask_fake),
    ])


def _gen_pair(disc: PatchDiscriminator, fake: Tensor, style: int,
              mask_fake: Tensor, style_weight: float) -> Tensor:
    sf = disc.forward(fake)
    return ag.add(
        _branch_term(disc, sf, None, 1.0, mask_fake),
        ag.scale(_branch_term(disc, sf, style, 1.0, mask_fake), style_weight))


# ------------------------------------------------------------------ geometry

def loss_disc_geo(disc_full: PatchDiscriminator, disc_half: PatchDiscriminator,
                  real_full: Tensor, fake_full: Tensor,
                  real_half: Tensor, fake_half: Tensor, style: int,
                  m_real_full: Tensor, m_fake_full: Tensor,
                  m_real_half: Tensor, m_fake_half: Tensor) -> Tensor:
    """Sum over both resolutions and both branches; fakes are constants.
    Masks live at each discriminator's output dimensions."""
    return ag.add(
        _disc_pair(disc_full, real_full, fake_full, style, m_real_full, m_fake_full),
        _disc_pair(disc_half, real_half, fake_half, style, m_real_half, m_fake_half))


def loss_gen_geo(disc_full: PatchDiscriminator, disc_half: PatchDiscriminator,
                 fake_full: Tensor, fake_half: Tensor, style: int,
                 m_fake_full: Tensor, m_fake_half: Tensor,
                 w: LossWeights) -> Tensor:
    """(global_K + alpha*style_K) + gamma*(global_K/2 + alpha*style_K/2),
    every term pushing fake patch scores toward 1."""
    return ag.add(
        _gen_pair(disc_full, fake_full, style, m_fake_full, w.alpha),
        ag.scale(_gen_pair(disc_half, fake_half, style, m_fake_half, w.alpha),
                 w.gamma))


def loss_recon_geo(fake_full: Tensor, target_full: Tensor,
                   fake_half: Tensor, target_half: Tensor) -> Tensor:
    """Squared error against the smoothed exemplar at each resolution,
    normalized by that resolution's voxel count.  Generator outputs arrive
    already masked, so voxels outside the generation region compare against
    a zero target contribution only where the target is itself zero."""
    vol_full = float(np.prod(fake_full.shape[2:]))
    vol_half = float(np.prod(fake_half.shape[2:]))
    return ag.add(ag.scaled_sse(fake_full, target_full, vol_full),
                  ag.scaled_sse(fake_half, target_half, vol_half))


def loss_total_geo(gen: Tensor, recon: Tensor, w: LossWeights) -> Tensor:
    return ag.add(gen, ag.scale(recon, w.beta))


# ------------------------------------------------------------------- texture

def loss_disc_tex(discs: list[PatchDiscriminator],
                  reals: list[Tensor], fakes: list[Tensor], style: int,
                  m_reals: list[Tensor], m_fakes: list[Tensor]) -> Tensor:
    """One masked LSGAN pair per rendered view, summed."""
    terms = [_disc_pair(d, r, f, style, mr, mf)
             for d, r, f, mr, mf in zip(discs, reals, fakes, m_reals, m_fakes)]
    return ag.add_many(terms)


def loss_gen_tex(discs: list[PatchDiscriminator], fakes: list[Tensor],
                 style: int, m_fakes: list[Tensor], w: LossWeights) -> Tensor:
    terms = [_gen_pair(d, f, style, mf, w.style_weight_tex)
             for d, f, mf in zip(discs, fakes, m_fakes)]
    return ag.add_many(terms)


def loss_recon_tex_view(fake_img: Tensor, real_img: Tensor) -> Tensor:
    """Squared error between the rendered self-reconstruction and the
    rendered exemplar, normalized by the image area (channels summed, so a
    single pixel differing by delta in all three channels contributes
    3*delta^2/(H*W))."""
    area = float(fake_img.shape[2] * fake_img.shape[3])
    return ag.scaled_sse(fake_img, real_img, area)


def loss_total_tex(gen: Tensor, recon_views: list[tuple[str, Tensor]],
                   w: LossWeights) -> Tensor:
    """Adversarial sum plus per-view weighted reconstruction; a view name
    present in view_beta replaces the default reconstruction weight for
    that view."""
    total = gen
    for name, r in recon_views:
        total = ag.add(total, ag.scale(r, w.recon_weight_for_view(name)))
    return total


# ----------------------------------------------------------------- loss log

class LossLog:
    """Append-only CSV stream of (step, loss_name, value) rows."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(["step", "loss_name", "value"])

    def append(self, step: int, name: str, value: float) -> None:
        self._w.writerow([step, name, f"{float(value):.6g}"])

    def flush(self) -> None:
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
