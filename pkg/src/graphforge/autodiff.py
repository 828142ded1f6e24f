"""Minimal reverse-mode autodiff over float64 numpy arrays.

Covers exactly the operations the generator architectures need: dense
layers, same-padded 2-D convolution, elementwise activations, pooling and
nearest-neighbor upsampling, reshaping, masked reductions, and Gaussian
reparameterization. Each op records a backward closure on a tape; calling
``backward()`` on a scalar walks the tape in reverse topological order.

All ops accept an optional leading batch dimension in addition to the
per-sample shapes, so a batch forward pass is a single numpy expression.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np


class Tensor:
    """A float64 array plus an optional gradient buffer of the same shape."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self._parents = tuple(parents)
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every reachable tensor."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        topo: list[Tensor] = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.ones_like(self.data)}
        owned = {id(self)}  # keys whose arrays are safe to mutate in place
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            owned.discard(id(node))
            if g is None:
                continue
            if node.requires_grad:
                node.grad += g
            if node._backward is None:
                continue
            for parent, pg in node._backward(g):
                if pg is None:
                    continue
                key = id(parent)
                if key not in grads:
                    grads[key] = pg  # stored by reference; copy before mutating
                elif key in owned:
                    grads[key] += pg
                else:
                    grads[key] = grads[key] + pg
                    owned.add(key)

    # -- convenience arithmetic (same-shape or scalar operands) ----------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return mul(self, _as_tensor(-1.0))

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def constant(x) -> Tensor:
    return _as_tensor(x)


def _needs_tape(*tensors: Tensor) -> bool:
    return any(t.requires_grad or t._parents for t in tensors)


def _op(out_data, parents, backward) -> Tensor:
    if _needs_tape(*parents):
        return Tensor(out_data, parents=parents, backward=backward)
    return Tensor(out_data)


class ParamStore:
    """Named parameter tensors with stable iteration order."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list:
        return list(self._params)

    def items(self):
        return self._params.items()

    def tensors(self) -> list:
        return list(self._params.values())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.zero_grad()

    def copy_values(self) -> dict:
        return {k: v.data.copy() for k, v in self._params.items()}

    def load_values(self, values: dict) -> None:
        for k, t in self._params.items():
            src = np.asarray(values[k], dtype=np.float64)
            if src.shape != t.data.shape:
                raise ValueError(f"shape mismatch for {k}: {src.shape} vs {t.data.shape}")
            t.data[...] = src


# ---------------------------------------------------------------------------
# Elementwise ops
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def bk(g):
        return ((a, _match(g, a.data.shape)), (b, _match(g, b.data.shape)))

    return _op(out, (a, b), bk)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data

    def bk(g):
        return ((a, _match(g, a.data.shape)), (b, _match(-g, b.data.shape)))

    return _op(out, (a, b), bk)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data
    ad, bd = a.data, b.data

    def bk(g):
        return ((a, _match(g * bd, a.data.shape)), (b, _match(g * ad, b.data.shape)))

    return _op(out, (a, b), bk)


def _match(g: np.ndarray, shape) -> np.ndarray:
    """Collapse broadcast dimensions of a gradient back to `shape`."""
    if g.shape == tuple(shape):
        return g
    # sum over leading broadcast axes
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    # sum over axes that were size-1 in the original
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def square(a: Tensor) -> Tensor:
    ad = a.data
    return _op(ad * ad, (a,), lambda g: ((a, 2.0 * ad * g),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def bk(g):
        return ((a, g * mask),)

    return _op(np.where(mask, a.data, 0.0), (a,), bk)


def _sigmoid_stable(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid_stable(np.atleast_1d(a.data)).reshape(a.data.shape)

    def bk(g):
        return ((a, g * s * (1.0 - s)),)

    return _op(s, (a,), bk)


def softplus(a: Tensor) -> Tensor:
    out = np.logaddexp(0.0, a.data)
    s = _sigmoid_stable(np.atleast_1d(a.data)).reshape(a.data.shape)

    def bk(g):
        return ((a, g * s),)

    return _op(out, (a,), bk)


def log(a: Tensor) -> Tensor:
    ad = a.data

    def bk(g):
        return ((a, g / ad),)

    return _op(np.log(ad), (a,), bk)


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clip values to [lo, hi]; gradient is zero where clipped."""
    inside = (a.data >= lo) & (a.data <= hi)

    def bk(g):
        return ((a, g * inside),)

    return _op(np.clip(a.data, lo, hi), (a,), bk)


# ---------------------------------------------------------------------------
# Shape ops
# ---------------------------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    old = a.data.shape

    def bk(g):
        return ((a, g.reshape(old)),)

    return _op(a.data.reshape(shape), (a,), bk)


def swap_last2(a: Tensor) -> Tensor:
    """Transpose the last two axes (matrix transpose, batched)."""

    def bk(g):
        return ((a, np.swapaxes(g, -1, -2)),)

    return _op(np.swapaxes(a.data, -1, -2), (a,), bk)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Slice `length` entries from `start` along `axis`."""
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    shape = a.data.shape

    def bk(g):
        full = np.zeros(shape)
        full[idx] = g
        return ((a, full),)

    return _op(a.data[idx], (a,), bk)


def total(a: Tensor) -> Tensor:
    """Sum of all entries (scalar)."""
    shape = a.data.shape

    def bk(g):
        return ((a, np.broadcast_to(g, shape).copy() if np.ndim(g) else np.full(shape, float(g))),)

    return _op(np.sum(a.data), (a,), bk)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    shape = a.data.shape

    def bk(g):
        return ((a, np.full(shape, float(g) / n)),)

    return _op(np.mean(a.data), (a,), bk)


# ---------------------------------------------------------------------------
# Neural network ops
# ---------------------------------------------------------------------------


def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map y = x W^T + b; x is (n_in,) or (batch, n_in)."""
    if w.data.ndim != 2 or b.data.ndim != 1 or w.data.shape[0] != b.data.shape[0]:
        raise ValueError(f"bad dense parameter shapes: W{w.data.shape}, b{b.data.shape}")
    if x.data.shape[-1] != w.data.shape[1]:
        raise ValueError(f"dense input {x.data.shape} does not match W{w.data.shape}")
    xd, wd = x.data, w.data
    out = xd @ wd.T + b.data

    def bk(g):
        if xd.ndim == 1:
            gw = np.outer(g, xd)
            gb = g
            gx = g @ wd
        else:
            flat_g = g.reshape(-1, g.shape[-1])
            flat_x = xd.reshape(-1, xd.shape[-1])
            gw = flat_g.T @ flat_x
            gb = flat_g.sum(axis=0)
            gx = g @ wd
        return ((x, gx), (w, gw), (b, gb))

    return _op(out, (x, w, b), bk)


def conv2d(x: Tensor, k: Tensor, b: Tensor) -> Tensor:
    """Same-padded stride-1 cross-correlation.

    x: (C_in, H, W) or (B, C_in, H, W); k: (C_out, C_in, kh, kw) with odd
    kernel size; b: (C_out,). Output keeps the spatial size.
    """
    xd, kd, bd = x.data, k.data, b.data
    if kd.ndim != 4 or kd.shape[2] != kd.shape[3] or kd.shape[2] % 2 != 1:
        raise ValueError(f"kernel must be (C_out, C_in, k, k) with odd k, got {kd.shape}")
    single = xd.ndim == 3
    xb = xd[None] if single else xd
    if xb.ndim != 4 or xb.shape[1] != kd.shape[1]:
        raise ValueError(f"conv input {xd.shape} does not match kernel {kd.shape}")
    if bd.shape != (kd.shape[0],):
        raise ValueError(f"bias shape {bd.shape} does not match kernel {kd.shape}")

    bsz, cin, h, w = xb.shape
    cout, ksz = kd.shape[0], kd.shape[2]
    pad = ksz // 2
    xp = np.zeros((bsz, cin, h + 2 * pad, w + 2 * pad))
    xp[:, :, pad : pad + h, pad : pad + w] = xb

    out = np.empty((bsz, cout, h, w))
    out[...] = bd[None, :, None, None]
    kmat = kd.reshape(cout, cin, ksz * ksz)
    for di in range(ksz):
        for dj in range(ksz):
            win = xp[:, :, di : di + h, dj : dj + w]
            out += np.einsum("oc,bchw->bohw", kmat[:, :, di * ksz + dj], win, optimize=True)

    def bk(g):
        gb4 = g[None] if single else g
        gk = np.zeros_like(kd)
        gxp = np.zeros_like(xp)
        for di in range(ksz):
            for dj in range(ksz):
                win = xp[:, :, di : di + h, dj : dj + w]
                gk[:, :, di, dj] = np.einsum("bohw,bchw->oc", gb4, win, optimize=True)
                gxp[:, :, di : di + h, dj : dj + w] += np.einsum(
                    "oc,bohw->bchw", kd[:, :, di, dj], gb4, optimize=True
                )
        gx = gxp[:, :, pad : pad + h, pad : pad + w]
        if single:
            gx = gx[0]
        gbias = gb4.sum(axis=(0, 2, 3))
        return ((x, gx), (k, gk), (b, gbias))

    return _op(out[0] if single else out, (x, k, b), bk)


def avgpool2(x: Tensor) -> Tensor:
    """2x2 average pooling with stride 2; trailing odd row/column dropped."""
    xd = x.data
    single = xd.ndim == 3
    xb = xd[None] if single else xd
    bsz, c, h, w = xb.shape
    h2, w2 = h // 2, w // 2
    crop = xb[:, :, : 2 * h2, : 2 * w2]
    out = crop.reshape(bsz, c, h2, 2, w2, 2).mean(axis=(3, 5))

    def bk(g):
        gb4 = g[None] if single else g
        gx = np.zeros_like(xb)
        spread = np.repeat(np.repeat(gb4, 2, axis=2), 2, axis=3) / 4.0
        gx[:, :, : 2 * h2, : 2 * w2] = spread
        return ((x, gx[0] if single else gx),)

    return _op(out[0] if single else out, (x,), bk)


def upsample2x(x: Tensor) -> Tensor:
    """Nearest-neighbor 2x upsampling of the last two axes."""
    xd = x.data
    out = np.repeat(np.repeat(xd, 2, axis=-2), 2, axis=-1)
    shape = xd.shape

    def bk(g):
        h, w = shape[-2], shape[-1]
        gsum = g.reshape(*shape[:-2], h, 2, w, 2).sum(axis=(-3, -1))
        return ((x, gsum),)

    return _op(out, (x,), bk)


def gaussian_reparameterize(mu: Tensor, sigma: Tensor, eps) -> Tensor:
    """z = mu + sigma * eps with eps an externally supplied normal draw."""
    if np.any(sigma.data < 0):
        raise ValueError("sigma must be elementwise nonnegative")
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != mu.data.shape or sigma.data.shape != mu.data.shape:
        raise ValueError("mu, sigma and eps must share a shape")
    out = mu.data + sigma.data * eps

    def bk(g):
        return ((mu, g), (sigma, g * eps))

    return _op(out, (mu, sigma), bk)


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------


def grad_check(
    fn: Callable[[], Tensor],
    params: "ParamStore | Iterable[Tensor]",
    h: float = 1e-5,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``fn`` rebuilds the scalar computation from the current parameter
    values. Every coordinate is checked unless ``max_coords`` caps the
    count, in which case a random subsample is used. The error for one
    coordinate is |analytic - numeric| / max(1, |analytic|, |numeric|).
    """
    tensors = params.tensors() if isinstance(params, ParamStore) else list(params)
    for t in tensors:
        t.zero_grad()
    fn().backward()
    analytic = [t.grad.copy() for t in tensors]

    coords = [(i, idx) for i, t in enumerate(tensors) for idx in np.ndindex(t.data.shape)]
    if max_coords is not None and len(coords) > max_coords:
        rng = rng or np.random.default_rng(0)
        chosen = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[int(c)] for c in chosen]

    worst = 0.0
    for i, idx in coords:
        t = tensors[i]
        orig = t.data[idx]
        t.data[idx] = orig + h
        f_plus = fn().item()
        t.data[idx] = orig - h
        f_minus = fn().item()
        t.data[idx] = orig
        numeric = (f_plus - f_minus) / (2.0 * h)
        a = analytic[i][idx]
        err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
        worst = max(worst, err)
    return worst
