"""Compiled direct-convolution kernels (single item, channels-first).

All kernels run over one sample of shape (C, D, H, W); batching and
zero-padding are the caller's job.  Loops are ordered so the innermost axis
is contiguous and the per-row accumulator stays in cache.  `fastmath` stays
off: results must be bit-reproducible run to run, so the accumulation order
is fixed by the code, never the optimizer.

The `_s1` variants are stride-1 specializations.  Removing the runtime
stride from the indexing lets LLVM prove the inner loops unit-stride and
vectorize them, which is worth an order of magnitude on the generator
convolutions (every generator layer has stride 1; only discriminators
downsample)."""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=False)
def conv_forward(xp, w, b, stride, out):
    """Cross-correlation of padded input `xp` (C,Di,Hi,Wi) with `w` (O,C,KD,KH,KW).

    Writes into `out` (O,Do,Ho,Wo) where each output dim = (in_dim - k)//stride + 1.
    """
    O, C, KD, KH, KW = w.shape
    Do, Ho, Wo = out.shape[1], out.shape[2], out.shape[3]
    for od in range(Do):
        for oh in range(Ho):
            for o in range(O):
                acc = np.zeros(Wo, dtype=xp.dtype)
                for c in range(C):
                    for kd in range(KD):
                        for kh in range(KH):
                            row = xp[c, od * stride + kd, oh * stride + kh]
                            for kw in range(KW):
                                coef = w[o, c, kd, kh, kw]
                                for x in range(Wo):
                                    acc[x] += coef * row[x * stride + kw]
                for x in range(Wo):
                    out[o, od, oh, x] = acc[x] + b[o]


@njit(cache=True, fastmath=False)
def conv_grad_input(gy, w, stride, gxp):
    """Accumulates d(loss)/d(padded input) into `gxp` (C,Di,Hi,Wi), given
    output gradient `gy` (O,Do,Ho,Wo)."""
    O, C, KD, KH, KW = w.shape
    Do, Ho, Wo = gy.shape[1], gy.shape[2], gy.shape[3]
    for od in range(Do):
        for oh in range(Ho):
            for o in range(O):
                grow = gy[o, od, oh]
                for c in range(C):
                    for kd in range(KD):
                        for kh in range(KH):
                            row = gxp[c, od * stride + kd, oh * stride + kh]
                            for kw in range(KW):
                                coef = w[o, c, kd, kh, kw]
                                for x in range(Wo):
                                    row[x * stride + kw] += coef * grow[x]


@njit(cache=True, fastmath=False)
def conv_grad_weight(xp, gy, stride, gw):
    """Accumulates d(loss)/d(weight) into `gw` (O,C,KD,KH,KW)."""
    O, C, KD, KH, KW = gw.shape
    Do, Ho, Wo = gy.shape[1], gy.shape[2], gy.shape[3]
    zero = xp[0, 0, 0, 0] * 0
    for od in range(Do):
        for oh in range(Ho):
            for o in range(O):
                grow = gy[o, od, oh]
                for c in range(C):
                    for kd in range(KD):
                        for kh in range(KH):
                            row = xp[c, od * stride + kd, oh * stride + kh]
                            for kw in range(KW):
                                acc = zero
                                for x in range(Wo):
                                    acc += grow[x] * row[x * stride + kw]
                                gw[o, c, kd, kh, kw] += acc


@njit(cache=True, fastmath=False)
def conv_forward_s1(xp, w, b, out):
    O, C, KD, KH, KW = w.shape
    Do, Ho, Wo = out.shape[1], out.shape[2], out.shape[3]
    for od in range(Do):
        for oh in range(Ho):
            for o in range(O):
                acc = np.zeros(Wo, dtype=xp.dtype)
                for c in range(C):
                    for kd in range(KD):
                        for kh in range(KH):
                            row = xp[c, od + kd, oh + kh]
                            for kw in range(KW):
                                coef = w[o, c, kd, kh, kw]
                                for x in range(Wo):
                                    acc[x] += coef * row[x + kw]
                for x in range(Wo):
                    out[o, od, oh, x] = acc[x] + b[o]


@njit(cache=True, fastmath=False)
def conv_grad_input_s1(gy, w, gxp):
    O, C, KD, KH, KW = w.shape
    Do, Ho, Wo = gy.shape[1], gy.shape[2], gy.shape[3]
    for od in range(Do):
        for oh in range(Ho):
            for o in range(O):
                grow = gy[o, od, oh]
                for c in range(C):
                    for kd in range(KD):
                        for kh in range(KH):
                            row = gxp[c, od + kd, oh + kh]
                            for kw in range(KW):
                                coef = w[o, c, kd, kh, kw]
                                for x in range(Wo):
                                    row[x + kw] += coef * grow[x]


@njit(cache=True, fastmath=False)
def conv_forward_s2(xp, w, b, out):
    O, C, KD, KH, KW = w.shape
    Do, Ho, Wo = out.shape[1], out.shape[2], out.shape[3]
    for od in range(Do):
        for oh in range(Ho):
            for o in range(O):
                acc = np.zeros(Wo, dtype=xp.dtype)
                for c in range(C):
                    for kd in range(KD):
                        for kh in range(KH):
                            row = xp[c, od * 2 + kd, oh * 2 + kh]
                            for kw in range(KW):
                                coef = w[o, c, kd, kh, kw]
                                for x in range(Wo):
                                    acc[x] += coef * row[x * 2 + kw]
                for x in range(Wo):
                    out[o, od, oh, x] = acc[x] + b[o]


@njit(cache=True, fastmath=False)
def conv_grad_input_s2(gy, w, gxp):
    O, C, KD, KH, KW = w.shape
    Do, Ho, Wo = gy.shape[1], gy.shape[2], gy.shape[3]
    for od in range(Do):
        for oh in range(Ho):
            for o in range(O):
                grow = gy[o, od, oh]
                for c in range(C):
                    for kd in range(KD):
                        for kh in range(KH):
                            row = gxp[c, od * 2 + kd, oh * 2 + kh]
                            for kw in range(KW):
                                coef = w[o, c, kd, kh, kw]
                                for x in range(Wo):
                                    row[x * 2 + kw] += coef * grow[x]


@njit(cache=True, fastmath=False)
def conv_grad_weight_s2(xp, gy, gw):
    O, C, KD, KH, KW = gw.shape
    Do, Ho, Wo = gy.shape[1], gy.shape[2], gy.shape[3]
    acc = np.empty((KW, Wo), dtype=xp.dtype)
    for o in range(O):
        for c in range(C):
            for kd in range(KD):
                for kh in range(KH):
                    acc[:, :] = 0
                    for od in range(Do):
                        grow_plane = gy[o, od]
                        row_plane = xp[c, od * 2 + kd]
                        for oh in range(Ho):
                            grow = grow_plane[oh]
                            row = row_plane[oh * 2 + kh]
                            for kw in range(KW):
                                for x in range(Wo):
                                    acc[kw, x] += grow[x] * row[x * 2 + kw]
                    for kw in range(KW):
                        total = acc[kw, 0] * 0
                        for x in range(Wo):
                            total += acc[kw, x]
                        gw[o, c, kd, kh, kw] += total


@njit(cache=True, fastmath=False)
def conv_grad_weight_s1(xp, gy, gw):
    # per-lane partial sums across rows, reduced once per tap at the end,
    # so the hot loop has no serial dependency and vectorizes
    O, C, KD, KH, KW = gw.shape
    Do, Ho, Wo = gy.shape[1], gy.shape[2], gy.shape[3]
    acc = np.empty((KW, Wo), dtype=xp.dtype)
    for o in range(O):
        for c in range(C):
            for kd in range(KD):
                for kh in range(KH):
                    acc[:, :] = 0
                    for od in range(Do):
                        grow_plane = gy[o, od]
                        row_plane = xp[c, od + kd]
                        for oh in range(Ho):
                            grow = grow_plane[oh]
                            row = row_plane[oh + kh]
                            for kw in range(KW):
                                for x in range(Wo):
                                    acc[kw, x] += grow[x] * row[x + kw]
                    for kw in range(KW):
                        total = acc[kw, 0] * 0
                        for x in range(Wo):
                            total += acc[kw, x]
                        gw[o, c, kd, kh, kw] += total


@njit(cache=True, fastmath=False)
def upsample2x_3d(x, out):
    # nearest-neighbor doubling of the three spatial axes; one pass, each
    # output element written exactly once
    N, C, D, H, W = x.shape
    for n in range(N):
        for c in range(C):
            for z in range(2 * D):
                for y in range(2 * H):
                    row = x[n, c, z // 2, y // 2]
                    orow = out[n, c, z, y]
                    for i in range(W):
                        v = row[i]
                        orow[2 * i] = v
                        orow[2 * i + 1] = v
