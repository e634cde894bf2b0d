"""Minimal reverse-mode automatic differentiation over dense numpy arrays.

Exactly the operator set the networks need, nothing more: no broadcasting
engine (beyond the style-code concat), no dynamic shape inference.  Training
runs in float32; gradient-check tests run the same ops in float64.
"""

from __future__ import annotations

import struct
from typing import Callable, Sequence

import numpy as np

from . import kernels


class Tensor:
    """A value in the computation graph.

    `grad_fn(grad_out, need)` returns one gradient array (or None) per parent;
    `need` flags which parents actually require a gradient this pass, letting
    expensive branches (conv input/weight grads) be skipped.
    """

    __slots__ = ("values", "grad", "requires_grad", "parents", "grad_fn")

    def __init__(
        self,
        values: np.ndarray,
        requires_grad: bool = False,
        parents: Sequence["Tensor"] = (),
        grad_fn: Callable | None = None,
    ):
        self.values = values
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.parents = tuple(parents)
        self.grad_fn = grad_fn

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    def item(self) -> float:
        return self.values.item()

    def detach(self) -> "Tensor":
        """Constant view of the same storage; cuts the graph (stop-gradient)."""
        return Tensor(self.values)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def tensor(values, requires_grad: bool = False, dtype=np.float32) -> Tensor:
    """Leaf tensor from array-like data."""
    arr = np.ascontiguousarray(np.asarray(values, dtype=dtype))
    return Tensor(arr, requires_grad=requires_grad)


def _topo_order(root: Tensor) -> list[Tensor]:
    """Parents-before-children ordering of the graph reachable from `root`."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, wrt: Sequence[Tensor] | None = None) -> None:
    """Accumulates d(loss)/d(leaf) into .grad of every reachable leaf that
    requires grad (or only those feeding `wrt`, when given).

    Tensors used twice receive the sum of both contributions.  Interior
    gradients are freed as soon as they have been propagated.
    """
    if loss.values.shape != ():
        raise ValueError("backward expects a scalar loss")
    order = _topo_order(loss)
    if wrt is None:
        needed = {id(n): n.requires_grad for n in order}
    else:
        wanted = {id(t) for t in wrt}
        needed = {}
        for n in order:  # parents first, so the flag propagates upward
            needed[id(n)] = id(n) in wanted or any(
                needed[id(p)] and p.requires_grad for p in n.parents
            )
    loss.grad = np.ones((), dtype=loss.values.dtype)
    for node in reversed(order):
        if node.grad_fn is None or node.grad is None:
            continue
        need = tuple(p.requires_grad and needed[id(p)] for p in node.parents)
        grads = node.grad_fn(node.grad, need)
        for p, g in zip(node.parents, grads):
            if g is None:
                continue
            if p.grad is None:
                p.grad = g
            else:
                p.grad += g
        node.grad = None  # interior gradient no longer needed


# ---------------------------------------------------------------------------
# convolution


def _conv_out_dim(size: int, k: int, stride: int, padding: int) -> int:
    out = (size + 2 * padding - k) // stride + 1
    if out < 1:
        raise ValueError(f"convolution output dim would be {out} (input {size}, "
                         f"kernel {k}, stride {stride}, padding {padding})")
    return out


def _conv_nd(x: Tensor, w: Tensor, b: Tensor, stride: int, padding: int,
             spatial: int) -> Tensor:
    """Shared 2D/3D convolution; 2D runs as 3D with a unit depth axis."""
    if x.values.ndim != 2 + spatial:
        raise ValueError(f"conv input must have {2 + spatial} dims, got {x.shape}")
    if w.values.ndim != 2 + spatial:
        raise ValueError(f"conv weight must have {2 + spatial} dims, got {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ValueError(f"channel mismatch: input {x.shape[1]}, weight {w.shape[1]}")
    if b.shape != (w.shape[0],):
        raise ValueError(f"bias shape {b.shape} does not match {w.shape[0]} filters")
    if x.dtype != w.dtype or x.dtype != b.dtype:
        raise ValueError("conv operands must share one dtype")

    xv, wv = x.values, w.values
    if spatial == 2:
        xv = xv[:, :, None]
        wv = wv[:, :, None]
    N, C = xv.shape[0], xv.shape[1]
    O = wv.shape[0]
    kdims = wv.shape[2:]
    pad3 = (0, padding, padding) if spatial == 2 else (padding,) * 3

    xp = np.pad(xv, ((0, 0), (0, 0)) + tuple((p, p) for p in pad3)) if padding else xv
    xp = np.ascontiguousarray(xp)
    out_dims = tuple(
        _conv_out_dim(xv.shape[2 + i], kdims[i], stride, pad3[i]) for i in range(3)
    )
    out = np.empty((N, O) + out_dims, dtype=xv.dtype)
    wc = np.ascontiguousarray(wv)
    for n in range(N):
        if stride == 1:
            kernels.conv_forward_s1(xp[n], wc, b.values, out[n])
        elif stride == 2:
            kernels.conv_forward_s2(xp[n], wc, b.values, out[n])
        else:
            kernels.conv_forward(xp[n], wc, b.values, stride, out[n])
    if spatial == 2:
        out = out[:, :, 0]

    def grad_fn(g, need):
        gv = g[:, :, None] if spatial == 2 else g
        gv = np.ascontiguousarray(gv)
        gx = gw = gb = None
        if need[0]:
            gxp = np.zeros(xp.shape[1:], dtype=xv.dtype)
            gx = np.empty_like(xv)
            sl = tuple(slice(p, p + s) for p, s in zip(pad3, xv.shape[2:]))
            for n in range(N):
                gxp[:] = 0
                if stride == 1:
                    kernels.conv_grad_input_s1(gv[n], wc, gxp)
                elif stride == 2:
                    kernels.conv_grad_input_s2(gv[n], wc, gxp)
                else:
                    kernels.conv_grad_input(gv[n], wc, stride, gxp)
                gx[n] = gxp[(slice(None),) + sl]
            if spatial == 2:
                gx = gx[:, :, 0]
        if need[1]:
            gw = np.zeros_like(wv)
            for n in range(N):
                if stride == 1:
                    kernels.conv_grad_weight_s1(xp[n], gv[n], gw)
                elif stride == 2:
                    kernels.conv_grad_weight_s2(xp[n], gv[n], gw)
                else:
                    kernels.conv_grad_weight(xp[n], gv[n], stride, gw)
            if spatial == 2:
                gw = gw[:, :, 0]
        if need[2]:
            gb = gv.sum(axis=(0, 2, 3, 4))
        return gx, gw, gb

    rg = x.requires_grad or w.requires_grad or b.requires_grad
    return Tensor(out, rg, (x, w, b), grad_fn)


def conv3d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation, NCDHW input, OIkkk weight; differentiable in all three."""
    return _conv_nd(x, w, b, stride, padding, spatial=3)


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation, NCHW input, OIkk weight."""
    return _conv_nd(x, w, b, stride, padding, spatial=2)


# ---------------------------------------------------------------------------
# pointwise and structural ops


def leaky_relu(x: Tensor, slope: float = 0.02) -> Tensor:
    v = x.values
    out = np.where(v >= 0, v, v * v.dtype.type(slope))

    def grad_fn(g, need):
        if not need[0]:
            return (None,)
        return (np.where(v >= 0, g, g * v.dtype.type(slope)),)

    return Tensor(out, x.requires_grad, (x,), grad_fn)


def sigmoid(x: Tensor) -> Tensor:
    v = x.values
    out = np.empty_like(v)
    np.negative(np.abs(v), out=out)
    np.exp(out, out=out)  # exp(-|v|) never overflows
    pos = v >= 0
    out[pos] = 1 / (1 + out[pos])
    out[~pos] = out[~pos] / (1 + out[~pos])

    def grad_fn(g, need):
        if not need[0]:
            return (None,)
        return (g * out * (1 - out),)

    return Tensor(out, x.requires_grad, (x,), grad_fn)


def upsample2x_nearest(x: Tensor) -> Tensor:
    """Doubles every spatial axis of NC(D)HW by nearest replication."""
    nspat = x.values.ndim - 2
    if nspat not in (2, 3):
        raise ValueError(f"expected NCHW or NCDHW, got {x.shape}")
    if nspat == 3:
        N, C, D, H, W = x.values.shape
        out = np.empty((N, C, 2 * D, 2 * H, 2 * W), dtype=x.values.dtype)
        kernels.upsample2x_3d(np.ascontiguousarray(x.values), out)
    else:
        out = np.repeat(np.repeat(x.values, 2, axis=2), 2, axis=3)

    def grad_fn(g, need):
        if not need[0]:
            return (None,)
        N, C = g.shape[0], g.shape[1]
        spat = x.values.shape[2:]
        inter = (N, C) + tuple(d for s in spat for d in (s, 2))
        gx = g.reshape(inter).sum(axis=tuple(range(3, 3 + 2 * nspat, 2)))
        return (gx,)

    return Tensor(np.ascontiguousarray(out), x.requires_grad, (x,), grad_fn)


def concat_style(x: Tensor, z: Tensor) -> Tensor:
    """Broadcasts code `z` (L,) over all spatial positions of NC...-shaped `x`
    and appends it as L extra channels."""
    if z.values.ndim != 1:
        raise ValueError(f"style code must be 1-D, got {z.shape}")
    N, C = x.shape[0], x.shape[1]
    spat = x.values.shape[2:]
    L = z.shape[0]
    out = np.empty((N, C + L) + spat, dtype=x.dtype)
    out[:, :C] = x.values
    out[:, C:] = z.values.astype(x.dtype).reshape((1, L) + (1,) * len(spat))

    def grad_fn(g, need):
        gx = g[:, :C].copy() if need[0] else None
        gz = None
        if need[1]:
            gz = g[:, C:].reshape(N, L, -1).sum(axis=(0, 2)).astype(z.dtype)
        return gx, gz

    return Tensor(out, x.requires_grad or z.requires_grad, (x, z), grad_fn)


def select_row(bank: Tensor, idx: int) -> Tensor:
    """Row `idx` of a 2-D parameter bank; gradients scatter back to that row."""
    if not 0 <= idx < bank.shape[0]:
        raise IndexError(f"row {idx} out of range for bank {bank.shape}")
    out = bank.values[idx].copy()

    def grad_fn(g, need):
        if not need[0]:
            return (None,)
        gb = np.zeros_like(bank.values)
        gb[idx] = g
        return (gb,)

    return Tensor(out, bank.requires_grad, (bank,), grad_fn)


def slice_channels(x: Tensor, lo: int, hi: int) -> Tensor:
    """Channels [lo, hi) of an NC... tensor."""
    out = np.ascontiguousarray(x.values[:, lo:hi])

    def grad_fn(g, need):
        if not need[0]:
            return (None,)
        gx = np.zeros_like(x.values)
        gx[:, lo:hi] = g
        return (gx,)

    return Tensor(out, x.requires_grad, (x,), grad_fn)


def mul(x: Tensor, y: Tensor) -> Tensor:
    """Elementwise product of same-shape tensors (used for output masking)."""
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    out = x.values * y.values

    def grad_fn(g, need):
        gx = g * y.values if need[0] else None
        gy = g * x.values if need[1] else None
        return gx, gy

    return Tensor(out, x.requires_grad or y.requires_grad, (x, y), grad_fn)


def add(x: Tensor, y: Tensor) -> Tensor:
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    out = x.values + y.values

    def grad_fn(g, need):
        return (g if need[0] else None), (g if need[1] else None)

    return Tensor(out, x.requires_grad or y.requires_grad, (x, y), grad_fn)


def scale(x: Tensor, c: float) -> Tensor:
    cc = x.dtype.type(c)
    out = x.values * cc

    def grad_fn(g, need):
        return (g * cc if need[0] else None,)

    return Tensor(out, x.requires_grad, (x,), grad_fn)


def add_many(terms: Sequence[Tensor]) -> Tensor:
    total = terms[0]
    for t in terms[1:]:
        total = add(total, t)
    return total


# ---------------------------------------------------------------------------
# losses


def masked_mse(pred: Tensor, target: Tensor, mask: Tensor) -> Tensor:
    """sum(((pred - target) * mask)^2) / sum(mask); mask is a constant."""
    if pred.shape != target.shape or pred.shape != mask.shape:
        raise ValueError("masked_mse operands must share one shape")
    m = mask.values
    msum = m.sum(dtype=np.float64)
    if msum <= 0:
        raise ValueError("masked_mse needs a mask with positive mass")
    diff = (pred.values - target.values) * m
    out = np.asarray((diff * diff).sum(dtype=np.float64) / msum, dtype=pred.dtype)

    def grad_fn(g, need):
        if need[2]:
            raise NotImplementedError("masks are constants; no mask gradient")
        coef = pred.dtype.type(2.0 / msum) * g
        base = diff * m * coef
        gp = base if need[0] else None
        gt = -base if need[1] else None
        return gp, gt, None

    rg = pred.requires_grad or target.requires_grad
    return Tensor(out, rg, (pred, target, mask), grad_fn)


def scaled_sse(pred: Tensor, target: Tensor, denom: float) -> Tensor:
    """sum((pred - target)^2) / denom, the reconstruction-loss shape."""
    if pred.shape != target.shape:
        raise ValueError("scaled_sse operands must share one shape")
    if denom <= 0:
        raise ValueError("denominator must be positive")
    diff = pred.values - target.values
    out = np.asarray((diff * diff).sum(dtype=np.float64) / denom, dtype=pred.dtype)

    def grad_fn(g, need):
        coef = pred.dtype.type(2.0 / denom) * g
        base = diff * coef
        gp = base if need[0] else None
        gt = -base if need[1] else None
        return gp, gt

    rg = pred.requires_grad or target.requires_grad
    return Tensor(out, rg, (pred, target), grad_fn)


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    """Standard Adam with bias correction; moments live in optimizer state."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-4,
                 beta1: float = 0.5, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.values) for p in self.params]
        self.v = [np.zeros_like(p.values) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            p.values -= (self.lr / c1) * m / (np.sqrt(v / c2) + self.eps)

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Moment buffers keyed by slot index, for checkpointing."""
        out: dict[str, np.ndarray] = {}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"{i}.m"] = m
            out[f"{i}.v"] = v
        return out

    def load_state_arrays(self, arrs: dict[str, np.ndarray], t: int) -> None:
        self.t = t
        for i in range(len(self.params)):
            self.m[i][:] = arrs[f"{i}.m"].reshape(self.m[i].shape)
            self.v[i][:] = arrs[f"{i}.v"].reshape(self.v[i].shape)


# ---------------------------------------------------------------------------
# checkpoint container format

_CKPT_MAGIC = b"CKPT"
_CKPT_VERSION = 1


def save_ckpt(path, tensors: dict[str, np.ndarray]) -> None:
    """Writes named float32 tensors: magic, u32 version, u32 count, then per
    tensor u32 name length + name bytes, u32 rank, u32 dims, f32 LE payload.
    Entries are sorted by name so the byte stream is canonical."""
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC)
        f.write(struct.pack("<II", _CKPT_VERSION, len(tensors)))
        for name in sorted(tensors):
            arr = np.ascontiguousarray(tensors[name], dtype="<f4")
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def load_ckpt(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        if f.read(4) != _CKPT_MAGIC:
            raise ValueError(f"{path}: not a CKPT file")
        version, count = struct.unpack("<II", f.read(8))
        if version != _CKPT_VERSION:
            raise ValueError(f"{path}: unsupported CKPT version {version}")
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<I", f.read(4))
            name = f.read(nlen).decode("utf-8")
            (rank,) = struct.unpack("<I", f.read(4))
            dims = struct.unpack(f"<{rank}I", f.read(4 * rank)) if rank else ()
            n = int(np.prod(dims)) if dims else 1
            arr = np.frombuffer(f.read(4 * n), dtype="<f4").reshape(dims)
            out[name] = arr.astype(np.float32)
        return out
