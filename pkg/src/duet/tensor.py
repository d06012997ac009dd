"""Dense tensors with reverse-mode differentiation.

Just enough machinery for the duet networks: embeddings, bi-directional gated
recurrent layers, pooling/attention summarization, affine + softmax heads and
cross-entropy, all with gradients that survive central finite-difference
checks.  Storage is float32 by default (reductions accumulate in float64);
`default_dtype(np.float64)` switches the whole graph over, which the gradient
check harness uses for tighter tolerances.

No GPU, no graph optimizations: forward builds a closure-backed tape, and
`Tensor.backward()` walks it once in reverse topological order.
"""
from __future__ import annotations

import contextlib
import math

import numpy as np

_DTYPE = np.float32
_CHECK_FINITE = False
_NO_GRAD = False


def set_finite_checks(enabled: bool) -> None:
    """Make every op assert finite outputs (slow; meant for test suites)."""
    global _CHECK_FINITE
    _CHECK_FINITE = bool(enabled)


@contextlib.contextmanager
def default_dtype(dtype):
    global _DTYPE
    prev = _DTYPE
    _DTYPE = dtype
    try:
        yield
    finally:
        _DTYPE = prev


@contextlib.contextmanager
def no_grad():
    """Build no tape: forwards only, for inference paths."""
    global _NO_GRAD
    prev = _NO_GRAD
    _NO_GRAD = True
    try:
        yield
    finally:
        _NO_GRAD = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=_DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None
        self._prev = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        topo: list[Tensor] = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad, node.data)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return add(self, mul(_wrap(other), -1.0))

    def __rsub__(self, other):
        return add(_wrap(other), mul(self, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=_DTYPE))


def _out(data, parents, backward) -> Tensor:
    if _CHECK_FINITE and not np.all(np.isfinite(data)):
        raise FloatingPointError("non-finite value produced by a tensor op")
    if _NO_GRAD:
        return Tensor(data)
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._prev = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    """Sum `g` down to `shape` after numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = a.data + b.data

    def bwd(g, y):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _out(data, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = a.data * b.data

    def bwd(g, y):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _out(data, (a, b), bwd)


def matmul(a, b) -> Tensor:
    """a: (..., k) @ b: (k, m).  Weights are always the right operand here."""
    a, b = _wrap(a), _wrap(b)
    if b.ndim != 2:
        raise ValueError(f"matmul right operand must be 2-D, got {b.shape}")
    data = a.data @ b.data

    def bwd(g, y):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            k = a.data.shape[-1]
            a2 = a.data.reshape(-1, k)
            g2 = g.reshape(-1, b.data.shape[1])
            b._accumulate(a2.T @ g2)

    return _out(data, (a, b), bwd)


def tanh(x) -> Tensor:
    x = _wrap(x)
    data = np.tanh(x.data)

    def bwd(g, y):
        if x.requires_grad:
            x._accumulate(g * (1.0 - y * y))

    return _out(data, (x,), bwd)


def sigmoid(x) -> Tensor:
    x = _wrap(x)
    # 1/(1+exp(-x)) via tanh for symmetric overflow behaviour
    data = 0.5 * (np.tanh(0.5 * x.data) + 1.0)

    def bwd(g, y):
        if x.requires_grad:
            x._accumulate(g * y * (1.0 - y))

    return _out(data, (x,), bwd)


def log(x) -> Tensor:
    x = _wrap(x)
    tiny = np.finfo(x.data.dtype).tiny
    clamped = np.maximum(x.data, tiny)
    data = np.log(clamped)

    def bwd(g, y):
        if x.requires_grad:
            x._accumulate(g / clamped)

    return _out(data, (x,), bwd)


def tsum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = _wrap(x)
    data = x.data.sum(axis=axis, keepdims=keepdims, dtype=np.float64).astype(x.data.dtype)

    def bwd(g, y):
        if not x.requires_grad:
            return
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(g, x.data.shape).copy())

    return _out(data, (x,), bwd)


def tmean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = _wrap(x)
    n = x.data.size if axis is None else x.data.shape[axis]
    return mul(tsum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def tmax(x, axis: int) -> Tensor:
    """Max over one axis; gradient flows to the first argmax (deterministic on ties)."""
    x = _wrap(x)
    idx = np.argmax(x.data, axis=axis)
    data = np.take_along_axis(x.data, np.expand_dims(idx, axis), axis=axis).squeeze(axis)

    def bwd(g, y):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.put_along_axis(gx, np.expand_dims(idx, axis),
                              np.expand_dims(g, axis), axis=axis)
            x._accumulate(gx)

    return _out(data, (x,), bwd)


def reshape(x, shape) -> Tensor:
    x = _wrap(x)
    data = x.data.reshape(shape)

    def bwd(g, y):
        if x.requires_grad:
            x._accumulate(g.reshape(x.data.shape))

    return _out(data, (x,), bwd)


def take(x, key) -> Tensor:
    """Basic (slice/int/tuple) indexing with scatter-add gradient."""
    x = _wrap(x)
    data = x.data[key]

    def bwd(g, y):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.add.at(gx, key, g)
            x._accumulate(gx)

    return _out(data, (x,), bwd)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)

    def bwd(g, y):
        sizes = [t.data.shape[axis] for t in tensors]
        offs = np.cumsum([0] + sizes)
        for t, lo, hi in zip(tensors, offs[:-1], offs[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])

    return _out(data, tuple(tensors), bwd)


def stack_steps(tensors) -> Tensor:
    """Stack per-step (B, h) tensors into (B, T, h)."""
    return concat([reshape(t, (t.shape[0], 1, t.shape[-1])) for t in tensors], axis=1)


def softmax(x, axis: int = -1) -> Tensor:
    x = _wrap(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    denom = e.sum(axis=axis, keepdims=True, dtype=np.float64).astype(x.data.dtype)
    data = e / denom

    def bwd(g, y):
        if x.requires_grad:
            inner = (g * y).sum(axis=axis, keepdims=True)
            x._accumulate(y * (g - inner))

    return _out(data, (x,), bwd)


def embed(table, ids) -> Tensor:
    """Row gather: ids (...,) int -> (..., d); gradient scatters into table rows."""
    table = _wrap(table)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise IndexError(f"embedding id outside table of {table.data.shape[0]} rows")
    data = table.data[ids]

    def bwd(g, y):
        if table.requires_grad:
            gt = np.zeros_like(table.data)
            np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.data.shape[1]))
            table._accumulate(gt)

    return _out(data, (table,), bwd)


def affine(x, w, b) -> Tensor:
    return add(matmul(x, w), b)


def affine_softmax(x, w, b) -> Tensor:
    """Affine layer into a proper probability distribution over the last axis."""
    return softmax(affine(x, w, b), axis=-1)


def cross_entropy(pred, target: int) -> Tensor:
    """-log pred[target] for a 1-D distribution; composes with softmax to p - onehot."""
    pred = _wrap(pred)
    if not 0 <= target < pred.data.shape[0]:
        raise IndexError(f"target {target} outside distribution of size {pred.data.shape[0]}")
    return -log(take(pred, target))


def nll_mean(probs, targets, valid=None) -> Tensor:
    """Mean -log probs[..., target] over (optionally masked) positions.

    `probs` is (..., V), `targets` integer (...,); `valid` a boolean mask of
    the same leading shape. The batched training loss for every model here.
    """
    probs = _wrap(probs)
    targets = np.asarray(targets, dtype=np.int64)
    lead = probs.data.shape[:-1]
    flat = reshape(probs, (-1, probs.data.shape[-1]))
    picked = take(flat, (np.arange(flat.data.shape[0]), targets.reshape(-1)))
    losses = -log(picked)
    if valid is None:
        return tmean(losses)
    mask = np.asarray(valid, dtype=probs.data.dtype).reshape(-1)
    count = max(float(mask.sum()), 1.0)
    return mul(tsum(mul(losses, Tensor(mask))), 1.0 / count)


# ---------------------------------------------------------------------------
# Recurrent layers and the context summarizer
# ---------------------------------------------------------------------------

def gru_layer(x: Tensor, wx: Tensor, wh: Tensor, b: Tensor, reverse: bool = False) -> Tensor:
    """One GRU direction over (B, T, d) -> (B, T, h).

    Gate convention: z, r sigmoid; candidate tanh with the reset gate applied
    to the recurrent term; h' = (1-z) * h + z * candidate. Initial state 0.
    """
    bsz, steps, _ = x.shape
    h_dim = wh.shape[0]
    gates_x = affine(x, wx, b)  # (B, T, 3h), input part of all gates at once
    h = Tensor(np.zeros((bsz, h_dim), dtype=x.data.dtype))
    order = range(steps - 1, -1, -1) if reverse else range(steps)
    outs: list[Tensor | None] = [None] * steps
    for t in order:
        gx = take(gates_x, (slice(None), t))
        gh = matmul(h, wh)
        z = sigmoid(add(take(gx, (slice(None), slice(0, h_dim))),
                        take(gh, (slice(None), slice(0, h_dim)))))
        r = sigmoid(add(take(gx, (slice(None), slice(h_dim, 2 * h_dim))),
                        take(gh, (slice(None), slice(h_dim, 2 * h_dim)))))
        cand = tanh(add(take(gx, (slice(None), slice(2 * h_dim, 3 * h_dim))),
                        mul(r, take(gh, (slice(None), slice(2 * h_dim, 3 * h_dim))))))
        h = add(mul(h, add(1.0, mul(z, -1.0))), mul(z, cand))
        outs[t] = h
    return stack_steps(outs)


def bigru(x: Tensor, params: list[dict[str, Tensor]]) -> Tensor:
    """Stacked bi-directional GRU: params is one dict per layer with fwd/bwd weights."""
    out = x
    for layer in params:
        fwd = gru_layer(out, layer["wx_f"], layer["wh_f"], layer["b_f"])
        bwd_ = gru_layer(out, layer["wx_b"], layer["wh_b"], layer["b_b"], reverse=True)
        out = concat([fwd, bwd_], axis=-1)
    return out


def temporal_context_summarize(x: Tensor, query: Tensor) -> Tensor:
    """Concat of max-pool over time and attention-weighted sum, (..., T, k) -> (..., 2k).

    Attention weights are softmax(x . query / sqrt(k)) over the time axis.
    Accepts a single sequence (T, k) with query (k,) or a batch (B, T, k)
    with queries (B, k).
    """
    single = x.ndim == 2
    if single:
        x = reshape(x, (1,) + x.shape)
        query = reshape(query, (1,) + query.shape)
    k = x.shape[-1]
    pooled = tmax(x, axis=1)
    q = reshape(query, (query.shape[0], 1, k))
    scores = mul(tsum(mul(x, q), axis=-1), 1.0 / math.sqrt(k))  # (B, T)
    weights = softmax(scores, axis=-1)
    att = tsum(mul(x, reshape(weights, weights.shape + (1,))), axis=1)
    out = concat([pooled, att], axis=-1)
    return reshape(out, (2 * k,)) if single else out


# ---------------------------------------------------------------------------
# Parameters, initialization, optimizer
# ---------------------------------------------------------------------------

def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> Tensor:
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def normal_init(rng: np.random.Generator, shape, std: float = 0.02) -> Tensor:
    return Tensor(rng.normal(0.0, std, size=shape), requires_grad=True)


def zeros_init(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def zero_grads(params: dict[str, Tensor]) -> None:
    for p in params.values():
        p.grad = None


def global_grad_norm(params: dict[str, Tensor]) -> float:
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float(np.sum(p.grad.astype(np.float64) ** 2))
    return math.sqrt(total)


def clip_grad_norm(params: dict[str, Tensor], max_norm: float) -> float:
    norm = global_grad_norm(params)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= scale
    return norm


class SGD:
    """Plain momentum SGD over a named parameter dict."""

    def __init__(self, params: dict[str, Tensor], lr: float, momentum: float = 0.9):
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self) -> None:
        for name, p in self.params.items():
            if p.grad is None:
                continue
            self.v[name] = self.momentum * self.v[name] + p.grad
            p.data = (p.data - self.lr * self.v[name]).astype(p.data.dtype)


class Adam:
    """Adaptive-moment gradient descent over a named parameter dict.

    `lr_for` may map a parameter name to its own learning rate (used to give
    the value head a different step size than the policy trunk).
    """

    def __init__(self, params: dict[str, Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 lr_for=None):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.lr_for = lr_for
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * (g * g)
            lr = self.lr if self.lr_for is None else self.lr_for(name)
            step = lr * (self.m[name] / b1c) / (np.sqrt(self.v[name] / b2c) + self.eps)
            p.data = (p.data - step).astype(p.data.dtype)


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------

def grad_check(f, x: Tensor, eps: float | None = None, max_coords: int | None = None,
               rng: np.random.Generator | None = None) -> float:
    """Max error between analytic and central-difference gradients of scalar f(x).

    Checks every coordinate of x, or a random subset of `max_coords` for big
    tensors.  The per-coordinate error is |a - n| / max(1, |a| + |n|):
    relative for large gradients, absolute near zero, where float32 forward
    rounding (~1e-7 |f|) leaves central differences no relative information.
    """
    if eps is None:
        eps = 1e-2 if x.data.dtype == np.float32 else 1e-6
    x.grad = None
    out = f(x)
    if out.data.size != 1:
        raise ValueError("grad_check needs a scalar-valued function")
    out.backward()
    analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()

    coords = list(np.ndindex(*x.data.shape)) if x.data.ndim else [()]
    if max_coords is not None and len(coords) > max_coords:
        rng = rng or np.random.default_rng(0)
        coords = [coords[i] for i in rng.choice(len(coords), size=max_coords, replace=False)]

    worst = 0.0
    for idx in coords:
        orig = x.data[idx]
        x.data[idx] = orig + eps
        fp = float(f(x).data)
        x.data[idx] = orig - eps
        fm = float(f(x).data)
        x.data[idx] = orig
        numeric = (fp - fm) / (2 * eps)
        a = float(analytic[idx])
        rel = abs(a - numeric) / max(1.0, abs(a) + abs(numeric))
        worst = max(worst, rel)
    return worst
