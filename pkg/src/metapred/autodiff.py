"""Reverse-mode automatic differentiation with second-order support.

Expression graphs are built eagerly over numpy arrays. Every primitive
registers vector-Jacobian products that are themselves expressed through
primitives, so differentiating a gradient (reverse-over-reverse) works for
any depth of composition. Arrays are float32 by default; float64 is used
for gradient-check mode.
"""

from __future__ import annotations

from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from . import kernels


class AutodiffError(Exception):
    """Base class for graph construction / differentiation failures."""


class ShapeError(AutodiffError):
    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = shapes
        super().__init__(f"{op}: incompatible shapes {' vs '.join(map(str, shapes))}")


class NonFiniteError(AutodiffError):
    def __init__(self, op: str, phase: str = "backward"):
        self.op = op
        super().__init__(f"non-finite values in {phase} pass at op '{op}'")


class GraphError(AutodiffError):
    pass


class Expr:
    """One node of the expression graph.

    `value` is the eagerly computed numpy array (treated as immutable),
    `parents` the operand nodes, and `vjps` one cotangent builder per
    parent. Leaves and constants have no parents.
    """

    __slots__ = ("value", "op", "parents", "vjps")

    def __init__(self, value, op="const", parents=(), vjps=()):
        self.value = value
        self.op = op
        self.parents = parents
        self.vjps = vjps

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    def item(self) -> float:
        return float(self.value)

    def __repr__(self):
        return f"Expr(op={self.op!r}, shape={self.value.shape}, dtype={self.value.dtype})"


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def leaf(array, dtype=None) -> Expr:
    """Create an input node from array data (copied; immutable afterwards)."""
    a = np.array(array, dtype=dtype if dtype is not None else None)
    if a.dtype not in (np.float32, np.float64):
        a = a.astype(np.float32)
    return Expr(_freeze(a), op="input")


constant = leaf


def as_expr(x, like: Expr | None = None) -> Expr:
    if isinstance(x, Expr):
        return x
    dtype = like.dtype if like is not None else np.float32
    return Expr(_freeze(np.asarray(x, dtype=dtype)), op="const")


def zeros_like_expr(x: Expr) -> Expr:
    return Expr(_freeze(np.zeros(x.shape, dtype=x.dtype)), op="zeros")


def detach(x: Expr) -> Expr:
    """Cut x out of the graph: same value, no history."""
    return Expr(x.value, op="detach")


# --------------------------------------------------------------------------
# ParamSet

class ParamSet(Mapping[str, Expr]):
    """Ordered, named collection of parameter tensors.

    Iteration order is insertion order and therefore identical across runs
    that build the same architecture. Values are Exprs: graph leaves for
    live parameters, interior nodes for adapted parameters.
    """

    def __init__(self, items: Mapping[str, Expr] | Sequence[tuple[str, Expr]],
                 arch_tag: str = ""):
        pairs = items.items() if isinstance(items, Mapping) else items
        self._items: dict[str, Expr] = {}
        for name, value in pairs:
            if not isinstance(value, Expr):
                value = leaf(value)
            self._items[name] = value
        self.arch_tag = arch_tag

    def __getitem__(self, name: str) -> Expr:
        return self._items[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: v.value for k, v in self._items.items()}

    def detached(self) -> "ParamSet":
        return ParamSet({k: detach(v) for k, v in self._items.items()}, self.arch_tag)

    def replace(self, updates: Mapping[str, Expr]) -> "ParamSet":
        merged = dict(self._items)
        for k, v in updates.items():
            if k not in merged:
                raise KeyError(f"unknown parameter {k!r}")
            merged[k] = v
        return ParamSet(merged, self.arch_tag)

    def same_structure(self, other: "ParamSet") -> bool:
        if list(self) != list(other):
            return False
        return all(self[k].shape == other[k].shape for k in self)

    @property
    def dtype(self):
        return next(iter(self._items.values())).dtype

    def __repr__(self):
        return f"ParamSet({list(self._items)}, arch_tag={self.arch_tag!r})"


def param_set_from_arrays(arrays: Mapping[str, np.ndarray], arch_tag="",
                          dtype=None) -> ParamSet:
    return ParamSet({k: leaf(v, dtype=dtype) for k, v in arrays.items()}, arch_tag)


# --------------------------------------------------------------------------
# elementwise / broadcasting helpers

def _broadcast_shape(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


def _sum_to(g: Expr, shape: tuple[int, ...]) -> Expr:
    """Reduce a broadcast cotangent back to `shape`."""
    if g.shape == shape:
        return g
    extra = len(g.shape) - len(shape)
    if extra > 0:
        g = reduce_sum(g, axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = reduce_sum(g, axis=axes, keepdims=True)
    if g.shape != shape:
        raise ShapeError("sum_to", g.shape, shape)
    return g


def add(a, b) -> Expr:
    a = as_expr(a)
    b = as_expr(b, like=a)
    _broadcast_shape("add", a, b)
    return Expr(a.value + b.value, "add", (a, b),
                (lambda g: _sum_to(g, a.shape), lambda g: _sum_to(g, b.shape)))


def sub(a, b) -> Expr:
    a = as_expr(a)
    b = as_expr(b, like=a)
    _broadcast_shape("subtract", a, b)
    return Expr(a.value - b.value, "subtract", (a, b),
                (lambda g: _sum_to(g, a.shape),
                 lambda g: _sum_to(neg(g), b.shape)))


def neg(a) -> Expr:
    a = as_expr(a)
    return Expr(-a.value, "negate", (a,), (lambda g: neg(g),))


def mul(a, b) -> Expr:
    a = as_expr(a)
    b = as_expr(b, like=a)
    _broadcast_shape("multiply", a, b)
    return Expr(a.value * b.value, "multiply", (a, b),
                (lambda g: _sum_to(mul(g, b), a.shape),
                 lambda g: _sum_to(mul(g, a), b.shape)))


def div(a, b) -> Expr:
    a = as_expr(a)
    b = as_expr(b, like=a)
    _broadcast_shape("divide", a, b)
    return Expr(a.value / b.value, "divide", (a, b),
                (lambda g: _sum_to(div(g, b), a.shape),
                 lambda g: _sum_to(neg(div(mul(g, a), mul(b, b))), b.shape)))


def scale(a, c: float) -> Expr:
    """Multiply by a python scalar (kept out of the graph)."""
    a = as_expr(a)
    cv = a.dtype.type(c)
    return Expr(a.value * cv, "scale", (a,), (lambda g: scale(g, c),))


def matmul(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    return Expr(a.value @ b.value, "matmul", (a, b),
                (lambda g: matmul(g, transpose(b)),
                 lambda g: matmul(transpose(a), g)))


def transpose(a) -> Expr:
    a = as_expr(a)
    if a.value.ndim != 2:
        raise ShapeError("transpose", a.shape)
    return Expr(np.ascontiguousarray(a.value.T), "transpose", (a,),
                (lambda g: transpose(g),))


def reshape(a, shape) -> Expr:
    a = as_expr(a)
    shape = tuple(shape)
    if int(np.prod(shape, dtype=np.int64)) != a.value.size:
        raise ShapeError("reshape", a.shape, shape)
    old = a.shape
    return Expr(a.value.reshape(shape), "reshape", (a,),
                (lambda g: reshape(g, old),))


def broadcast_to(a, shape) -> Expr:
    a = as_expr(a)
    shape = tuple(shape)
    try:
        v = np.broadcast_to(a.value, shape)
    except ValueError:
        raise ShapeError("broadcast_to", a.shape, shape) from None
    old = a.shape
    return Expr(np.ascontiguousarray(v), "broadcast_to", (a,),
                (lambda g: _sum_to(g, old),))


def reduce_sum(a, axis=None, keepdims=False) -> Expr:
    a = as_expr(a)
    in_shape = a.shape

    def vjp(g: Expr) -> Expr:
        if axis is None:
            return broadcast_to(reshape(g, (1,) * len(in_shape)), in_shape)
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(ax % len(in_shape) for ax in axes)
        if keepdims:
            return broadcast_to(g, in_shape)
        expanded = tuple(1 if i in axes else n for i, n in enumerate(in_shape))
        return broadcast_to(reshape(g, expanded), in_shape)

    return Expr(a.value.sum(axis=axis, keepdims=keepdims), "sum", (a,), (vjp,))


def reduce_mean(a, axis=None, keepdims=False) -> Expr:
    a = as_expr(a)
    if axis is None:
        count = a.value.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return scale(reduce_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def exp(a) -> Expr:
    a = as_expr(a)
    out = Expr(np.exp(a.value), "exp", (a,), ())
    out.vjps = (lambda g: mul(g, out),)
    return out


def log(a) -> Expr:
    a = as_expr(a)
    return Expr(np.log(a.value), "log", (a,), (lambda g: div(g, a),))


def sqrt(a) -> Expr:
    a = as_expr(a)
    out = Expr(np.sqrt(a.value), "sqrt", (a,), ())
    out.vjps = (lambda g: div(scale(g, 0.5), out),)
    return out


def sigmoid(a) -> Expr:
    a = as_expr(a)
    y = 1.0 / (1.0 + np.exp(-a.value))
    out = Expr(y.astype(a.dtype, copy=False), "sigmoid", (a,), ())
    out.vjps = (lambda g: mul(g, mul(out, sub(1.0, out))),)
    return out


def tanh(a) -> Expr:
    a = as_expr(a)
    out = Expr(np.tanh(a.value), "tanh", (a,), ())
    out.vjps = (lambda g: mul(g, sub(1.0, mul(out, out))),)
    return out


def relu(a) -> Expr:
    a = as_expr(a)
    mask = (a.value > 0).astype(a.dtype)
    return Expr(a.value * mask, "relu", (a,),
                (lambda g: mul(g, constant(mask)),))


def clip(a, lo: float, hi: float) -> Expr:
    """Elementwise clamp; gradient passes only inside (lo, hi)."""
    a = as_expr(a)
    v = np.clip(a.value, lo, hi)
    mask = ((a.value > lo) & (a.value < hi)).astype(a.dtype)
    return Expr(v, "clip", (a,), (lambda g: mul(g, constant(mask)),))


def softmax(a, axis: int = -1) -> Expr:
    """Softmax along `axis`; the stabilizing shift is value-detached, which
    is exact because softmax is invariant to uniform shifts."""
    a = as_expr(a)
    shift = constant(a.value.max(axis=axis, keepdims=True))
    e = exp(sub(a, shift))
    return div(e, reduce_sum(e, axis=axis, keepdims=True))


def concat(parts: Sequence[Expr], axis: int = 0) -> Expr:
    parts = [as_expr(p) for p in parts]
    if not parts:
        raise GraphError("concat of zero parts")
    base = list(parts[0].shape)
    ax = axis % len(base)
    for p in parts[1:]:
        other = list(p.shape)
        if len(other) != len(base) or any(
                i != ax and other[i] != base[i] for i in range(len(base))):
            raise ShapeError("concat", parts[0].shape, p.shape)
    offsets = np.cumsum([0] + [p.shape[ax] for p in parts])

    def make_vjp(i):
        return lambda g: slice_axis(g, ax, int(offsets[i]), int(offsets[i + 1]))

    return Expr(np.concatenate([p.value for p in parts], axis=ax), "concat",
                tuple(parts), tuple(make_vjp(i) for i in range(len(parts))))


def slice_axis(a, axis: int, start: int, stop: int) -> Expr:
    a = as_expr(a)
    ax = axis % len(a.shape)
    if not (0 <= start < stop <= a.shape[ax]):
        raise ShapeError("slice", a.shape, (start, stop))
    sl = tuple(slice(start, stop) if i == ax else slice(None)
               for i in range(len(a.shape)))
    in_shape = a.shape

    def vjp(g: Expr) -> Expr:
        pieces = []
        if start > 0:
            shape = tuple(start if i == ax else n for i, n in enumerate(in_shape))
            pieces.append(constant(np.zeros(shape, dtype=g.dtype)))
        pieces.append(g)
        if stop < in_shape[ax]:
            shape = tuple(in_shape[ax] - stop if i == ax else n
                          for i, n in enumerate(in_shape))
            pieces.append(constant(np.zeros(shape, dtype=g.dtype)))
        return concat(pieces, axis=ax) if len(pieces) > 1 else pieces[0]

    return Expr(np.ascontiguousarray(a.value[sl]), "slice", (a,), (vjp,))


# --------------------------------------------------------------------------
# kernel-backed primitives

def _as_i32(idx) -> np.ndarray:
    return np.ascontiguousarray(idx, dtype=np.int32)


def gather(a, idx) -> Expr:
    """Row lookup a[idx]; idx is integer data, not differentiable."""
    a = as_expr(a)
    idx = _as_i32(idx)
    if a.value.ndim != 2 or idx.ndim != 1:
        raise ShapeError("gather", a.shape, idx.shape)
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise GraphError(f"gather: index out of range for {a.shape[0]} rows")
    n = a.shape[0]
    return Expr(kernels.gather_rows(a.value, idx), "gather", (a,),
                (lambda g: scatter_add(g, idx, n),))


def scatter_add(g, idx, n_rows: int) -> Expr:
    g = as_expr(g)
    idx = _as_i32(idx)
    return Expr(kernels.scatter_add_rows(np.ascontiguousarray(g.value), idx, n_rows),
                "scatter_add", (g,), (lambda h: gather(h, idx),))


def embed_bag(table, codes, slot_mask) -> Expr:
    """Sum of embedding rows per (batch, time) cell, weighted by slot_mask.

    table: (V, d) Expr; codes: (B, T, S) ints; slot_mask: (B, T, S) array.
    """
    table = as_expr(table)
    codes = _as_i32(codes)
    mask = np.ascontiguousarray(slot_mask, dtype=table.dtype)
    if codes.shape != mask.shape or table.value.ndim != 2:
        raise ShapeError("embed_bag", table.shape, codes.shape, mask.shape)
    if codes.size and (codes.min() < 0 or codes.max() >= table.shape[0]):
        raise GraphError(f"embed_bag: code index out of range for vocab {table.shape[0]}")
    n = table.shape[0]
    return Expr(kernels.embed_bag_fwd(table.value, codes, mask), "embed_bag",
                (table,), (lambda g: embed_scatter(g, codes, mask, n),))


def embed_scatter(g, codes, slot_mask, n_rows: int) -> Expr:
    g = as_expr(g)
    codes = _as_i32(codes)
    mask = np.ascontiguousarray(slot_mask, dtype=g.dtype)
    return Expr(kernels.embed_bag_bwd(np.ascontiguousarray(g.value), codes, mask, n_rows),
                "embed_scatter", (g,), (lambda h: embed_bag(h, codes, mask),))


def conv1d(x, w) -> Expr:
    """Valid 1-D convolution over time: x (B,T,d), w (F,l,d) -> (B,T-l+1,F)."""
    x, w = as_expr(x), as_expr(w)
    if (x.value.ndim != 3 or w.value.ndim != 3 or x.shape[2] != w.shape[2]
            or x.shape[1] < w.shape[1]):
        raise ShapeError("conv1d", x.shape, w.shape)
    seq_len = x.shape[1]
    return Expr(kernels.conv1d_fwd(np.ascontiguousarray(x.value),
                                   np.ascontiguousarray(w.value)),
                "conv1d", (x, w),
                (lambda g: conv1d_input_grad(g, w, seq_len),
                 lambda g: conv1d_weight_grad(x, g)))


def conv1d_input_grad(g, w, seq_len: int) -> Expr:
    g, w = as_expr(g), as_expr(w)
    return Expr(kernels.conv1d_dx(np.ascontiguousarray(g.value),
                                  np.ascontiguousarray(w.value), seq_len),
                "conv1d_input_grad", (g, w),
                (lambda h: conv1d(h, w),
                 lambda h: conv1d_weight_grad(h, g)))


def conv1d_weight_grad(x, g) -> Expr:
    x, g = as_expr(x), as_expr(g)
    seq_len = x.shape[1]
    return Expr(kernels.conv1d_dw(np.ascontiguousarray(x.value),
                                  np.ascontiguousarray(g.value)),
                "conv1d_weight_grad", (x, g),
                (lambda h: conv1d_input_grad(g, h, seq_len),
                 lambda h: conv1d(x, h)))


def maxpool_time(x, lengths) -> Expr:
    """Per-feature max over the first lengths[b] time steps of x (B,T,F).

    Ties take the lowest time index; the argmax is a fixed subgradient
    choice and is not differentiated through.
    """
    x = as_expr(x)
    lengths = np.ascontiguousarray(lengths, dtype=np.int64)
    if x.value.ndim != 3 or lengths.shape != (x.shape[0],):
        raise ShapeError("maxpool_time", x.shape, lengths.shape)
    if lengths.min() < 1 or lengths.max() > x.shape[1]:
        raise GraphError("maxpool_time: lengths out of range")
    out, arg = kernels.maxpool_time_fwd(np.ascontiguousarray(x.value), lengths)
    seq_len = x.shape[1]
    return Expr(out, "maxpool_time", (x,),
                (lambda g: pool_scatter(g, arg, seq_len),))


def pool_scatter(g, argmax: np.ndarray, seq_len: int) -> Expr:
    g = as_expr(g)
    return Expr(kernels.pool_scatter(np.ascontiguousarray(g.value), argmax, seq_len),
                "pool_scatter", (g,), (lambda h: pool_take(h, argmax),))


def pool_take(h, argmax: np.ndarray) -> Expr:
    h = as_expr(h)
    seq_len = h.shape[1]
    return Expr(kernels.pool_take(np.ascontiguousarray(h.value), argmax),
                "pool_take", (h,), (lambda g: pool_scatter(g, argmax, seq_len),))


# --------------------------------------------------------------------------
# normalization

def layer_norm(x, gain, bias, eps: float = 1e-5) -> Expr:
    """Per-sample normalization over the last axis (train and eval alike)."""
    x = as_expr(x)
    m = reduce_mean(x, axis=-1, keepdims=True)
    centered = sub(x, m)
    var = reduce_mean(mul(centered, centered), axis=-1, keepdims=True)
    normed = div(centered, sqrt(add(var, eps)))
    return add(mul(normed, gain), bias)


def batch_norm(x, gain, bias, running_mean, running_var, training: bool,
               momentum: float = 0.9, eps: float = 1e-5):
    """Normalize x (B, F) over the batch axis.

    Training mode uses batch statistics and returns updated running
    averages (old * momentum + batch * (1 - momentum)); eval mode uses the
    running averages and returns them unchanged.
    """
    x = as_expr(x)
    if training:
        m = reduce_mean(x, axis=0, keepdims=True)
        centered = sub(x, m)
        var = reduce_mean(mul(centered, centered), axis=0, keepdims=True)
        normed = div(centered, sqrt(add(var, eps)))
        new_mean = momentum * running_mean + (1.0 - momentum) * m.value[0]
        new_var = momentum * running_var + (1.0 - momentum) * var.value[0]
    else:
        centered = sub(x, constant(running_mean[None, :].astype(x.dtype)))
        denom = np.sqrt(running_var + eps).astype(x.dtype)
        normed = div(centered, constant(denom[None, :]))
        new_mean, new_var = running_mean, running_var
    return add(mul(normed, gain), bias), new_mean, new_var


# --------------------------------------------------------------------------
# op registry (uniform access for property sweeps)

PRIMITIVES: dict[str, Callable] = {
    "add": add,
    "subtract": sub,
    "multiply": mul,
    "divide": div,
    "negate": neg,
    "matmul": matmul,
    "transpose": transpose,
    "reshape": reshape,
    "broadcast_to": broadcast_to,
    "conv1d": conv1d,
    "maxpool_time": maxpool_time,
    "gather": gather,
    "embed_bag": embed_bag,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "relu": relu,
    "softmax": softmax,
    "log": log,
    "exp": exp,
    "sqrt": sqrt,
    "clip": clip,
    "sum": reduce_sum,
    "mean": reduce_mean,
    "concat": concat,
    "slice": slice_axis,
    "layer_norm": layer_norm,
    "batch_norm": batch_norm,
}


def apply_primitive(op_kind: str, *operands, **kwargs) -> Expr:
    """Dispatch a primitive by name; unknown kinds raise GraphError."""
    try:
        fn = PRIMITIVES[op_kind]
    except KeyError:
        raise GraphError(f"unknown primitive {op_kind!r}") from None
    return fn(*operands, **kwargs)


# --------------------------------------------------------------------------
# reverse pass

def _topo_order(root: Expr) -> list[Expr]:
    order: list[Expr] = []
    seen: set[int] = set()
    stack: list[tuple[Expr, bool]] = [(root, False)]
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


def gradient(scalar: Expr, params: Mapping[str, Expr] | ParamSet,
             create_graph: bool = False, check_finite: bool = True) -> dict[str, Expr]:
    """Gradients of a scalar expression w.r.t. every parameter.

    Parameters not reachable from `scalar` get zero gradients. With
    `create_graph` the results stay attached to the graph and can be
    differentiated again; otherwise they are detached constants.
    """
    if not isinstance(scalar, Expr):
        raise GraphError("gradient target must be an Expr")
    if scalar.value.ndim != 0:
        raise GraphError(f"gradient target must be a scalar, got shape {scalar.shape}")

    order = _topo_order(scalar)
    adjoint: dict[int, Expr] = {
        id(scalar): constant(np.ones((), dtype=scalar.dtype))
    }
    for node in reversed(order):
        g = adjoint.get(id(node))
        if g is None:
            continue
        if check_finite and not np.all(np.isfinite(g.value)):
            raise NonFiniteError(node.op)
        for parent, vjp in zip(node.parents, node.vjps):
            contrib = vjp(g)
            prev = adjoint.get(id(parent))
            adjoint[id(parent)] = contrib if prev is None else add(prev, contrib)

    grads: dict[str, Expr] = {}
    for name, p in params.items():
        g = adjoint.get(id(p))
        if g is None:
            g = zeros_like_expr(p)
        elif not create_graph:
            g = detach(g)
        grads[name] = g
    return grads


def finite_difference_oracle(f: Callable[[ParamSet], float], params: ParamSet,
                             epsilon: float = 1e-5) -> dict[str, np.ndarray]:
    """Central-difference gradient estimate, coordinate by coordinate.

    `f` must be a deterministic map from a ParamSet to a scalar. This is
    the ground-truth oracle for every analytic gradient in the test suite;
    it never calls the reverse pass.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    base = {k: v.value.copy() for k, v in params.items()}
    out: dict[str, np.ndarray] = {}
    for name, arr in base.items():
        grad = np.zeros_like(arr, dtype=np.float64)
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            hi = float(f(param_set_from_arrays(base, params.arch_tag)))
            flat[i] = orig - epsilon
            lo = float(f(param_set_from_arrays(base, params.arch_tag)))
            flat[i] = orig
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise NonFiniteError(f"finite_difference:{name}[{i}]", phase="forward")
            gflat[i] = (hi - lo) / (2.0 * epsilon)
        out[name] = grad
    return out
