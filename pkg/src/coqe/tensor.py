"""Reverse-mode automatic differentiation over dense numpy arrays.

Define-by-run: each forward op creates a node holding its inputs and a
backward closure; backward() walks the graph once in reverse topological
order. Parameters are long-lived Tensors with requires_grad=True whose
.grad accumulates across backward calls until cleared.

Deliberate restrictions, enforced at op level:
  * broadcasting: equal shapes, a scalar operand, or trailing-axis match
    (the smaller shape equals the larger one's trailing axes) - nothing else;
  * both operands of a binary op must share one dtype (float32 or float64);
  * every forward result is checked finite; a NaN/Inf raises NonFiniteError
    naming the op so a diverging run aborts at the first bad step.
"""

import numpy as np

from . import kernels as K


class ShapeError(ValueError):
    pass


class GraphError(RuntimeError):
    pass


class NonFiniteError(FloatingPointError):
    pass


_GRAD_ENABLED = True


class no_grad:
    """Context manager disabling graph construction (eval-only forwards)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def _check_dtype(a, b, op):
    if a.dtype != b.dtype:
        raise ShapeError(f"{op}: operand dtypes differ ({a.dtype} vs {b.dtype})")


def _bcast_check(sa, sb, op):
    if sa == sb or sa == () or sb == ():
        return
    if len(sb) <= len(sa) and tuple(sa[len(sa) - len(sb):]) == tuple(sb):
        return
    if len(sa) < len(sb) and tuple(sb[len(sb) - len(sa):]) == tuple(sa):
        return
    raise ShapeError(
        f"{op}: shapes {sa} and {sb} do not broadcast "
        "(only equal, scalar, or trailing-axis broadcasting is supported)"
    )


def _unbroadcast(g, shape):
    """Reduce an output gradient back to an operand's shape."""
    if g.shape == shape:
        return g
    if shape == ():
        return g.sum()
    lead = g.ndim - len(shape)
    return g.sum(axis=tuple(range(lead)))


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.op = "leaf"
        self._parents = ()
        self._backward = None

    # -- plumbing -----------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data.reshape(()))

    def detach(self):
        return Tensor(self.data)

    def numpy(self):
        return self.data

    def _accum(self, g):
        if self.grad is None:
            self.grad = g
        else:
            self.grad = self.grad + g

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.shape}, dtype={self.dtype})"

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other, op):
        if isinstance(other, Tensor):
            _check_dtype(self.data, other.data, op)
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Tensor(np.asarray(other, dtype=self.data.dtype))
        raise TypeError(f"{op}: cannot operate on {type(other).__name__}")

    def __add__(self, other):
        other = self._coerce(other, "add")
        _bcast_check(self.shape, other.shape, "add")
        out = _result("add", self.data + other.data, (self, other))
        if out.requires_grad:
            a, b = self, other

            def _bwd(g):
                if a.requires_grad:
                    a._accum(_unbroadcast(g, a.shape))
                if b.requires_grad:
                    b._accum(_unbroadcast(g, b.shape))

            out._backward = _bwd
        return out

    __radd__ = __add__

    def __neg__(self):
        out = _result("neg", -self.data, (self,))
        if out.requires_grad:
            a = self
            out._backward = lambda g: a._accum(-g)
        return out

    def __sub__(self, other):
        other = self._coerce(other, "sub")
        _bcast_check(self.shape, other.shape, "sub")
        out = _result("sub", self.data - other.data, (self, other))
        if out.requires_grad:
            a, b = self, other

            def _bwd(g):
                if a.requires_grad:
                    a._accum(_unbroadcast(g, a.shape))
                if b.requires_grad:
                    b._accum(-_unbroadcast(g, b.shape))

            out._backward = _bwd
        return out

    def __rsub__(self, other):
        return self._coerce(other, "sub").__sub__(self)

    def __mul__(self, other):
        other = self._coerce(other, "mul")
        _bcast_check(self.shape, other.shape, "mul")
        out = _result("mul", self.data * other.data, (self, other))
        if out.requires_grad:
            a, b = self, other

            def _bwd(g):
                if a.requires_grad:
                    a._accum(_unbroadcast(g * b.data, a.shape))
                if b.requires_grad:
                    b._accum(_unbroadcast(g * a.data, b.shape))

            out._backward = _bwd
        return out

    __rmul__ = __mul__

    def __matmul__(self, other):
        if not isinstance(other, Tensor):
            raise TypeError("matmul requires a Tensor operand")
        _check_dtype(self.data, other.data, "matmul")
        a, b = self.data, other.data
        if a.ndim < 2 or b.ndim < 2:
            raise ShapeError("matmul operands must be at least 2-D")
        if a.shape[-1] != b.shape[-2]:
            raise ShapeError(
                f"matmul: inner extents disagree ({a.shape} @ {b.shape})"
            )
        if a.ndim > 2 and b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
            raise ShapeError(
                f"matmul: batch extents disagree ({a.shape} @ {b.shape})"
            )
        out = _result("matmul", a @ b, (self, other))
        if out.requires_grad:
            ta, tb = self, other

            def _bwd(g):
                if ta.requires_grad:
                    ga = g @ np.swapaxes(b, -1, -2)
                    if ga.ndim > len(ta.shape):
                        ga = ga.sum(axis=tuple(range(ga.ndim - len(ta.shape))))
                    ta._accum(ga)
                if tb.requires_grad:
                    if b.ndim == 2 and g.ndim > 2:
                        gb = a.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
                    else:
                        gb = np.swapaxes(a, -1, -2) @ g
                        if gb.ndim > len(tb.shape):
                            gb = gb.sum(axis=tuple(range(gb.ndim - len(tb.shape))))
                    tb._accum(gb)

            out._backward = _bwd
        return out

    # -- elementwise nonlinearities ------------------------------------------

    def relu(self):
        x = np.ascontiguousarray(self.data)
        out = _result("relu", K.relu_fwd(x), (self,))
        if out.requires_grad:
            a = self
            out._backward = lambda g: a._accum(
                K.relu_bwd(np.ascontiguousarray(g), x)
            )
        return out

    def exp(self):
        out = _result("exp", np.exp(self.data), (self,))
        if out.requires_grad:
            a, y = self, out.data
            out._backward = lambda g: a._accum(g * y)
        return out

    def cos(self):
        out = _result("cos", np.cos(self.data), (self,))
        if out.requires_grad:
            a, x = self, self.data
            out._backward = lambda g: a._accum(-g * np.sin(x))
        return out

    def abs(self):
        out = _result("abs", np.abs(self.data), (self,))
        if out.requires_grad:
            a, x = self, self.data
            out._backward = lambda g: a._accum(g * np.sign(x))
        return out

    def power(self, p):
        p = float(p)
        if not float(p).is_integer() and np.any(self.data < 0):
            raise ShapeError("power: negative base with non-integer exponent")
        out = _result("power", self.data ** p, (self,))
        if out.requires_grad:
            a, x = self, self.data
            out._backward = lambda g: a._accum(g * p * x ** (p - 1))
        return out

    # -- reductions / reshaping ----------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out = _result("sum", np.sum(self.data, axis=axis, keepdims=keepdims), (self,))
        if out.requires_grad:
            a = self
            shape = self.shape

            def _bwd(g):
                gg = np.asarray(g)
                if axis is not None and not keepdims:
                    axes = axis if isinstance(axis, tuple) else (axis,)
                    axes = tuple(ax % len(shape) for ax in axes)
                    gg = np.expand_dims(gg, axes)
                a._accum(np.broadcast_to(gg, shape).copy())

            out._backward = _bwd
        return out

    def mean(self, axis=None, keepdims=False):
        count = self.size if axis is None else (
            np.prod([self.shape[ax % self.ndim]
                     for ax in (axis if isinstance(axis, tuple) else (axis,))])
        )
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(count))

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = _result("reshape", self.data.reshape(shape), (self,))
        if out.requires_grad:
            a, orig = self, self.shape
            out._backward = lambda g: a._accum(g.reshape(orig))
        return out

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        out = _result("transpose", self.data.transpose(axes), (self,))
        if out.requires_grad:
            a = self
            inv = tuple(np.argsort(axes))
            out._backward = lambda g: a._accum(g.transpose(inv))
        return out

    def __getitem__(self, idx):
        out = _result("slice", self.data[idx], (self,))
        if out.requires_grad:
            a = self

            def _bwd(g):
                ga = np.zeros_like(a.data)
                np.add.at(ga, idx, g)
                a._accum(ga)

            out._backward = _bwd
        return out

    def take(self, indices, axis=0):
        if axis != 0:
            raise ShapeError("take supports axis 0 only")
        indices = np.asarray(indices)
        out = _result("take", self.data[indices], (self,))
        if out.requires_grad:
            a = self

            def _bwd(g):
                ga = np.zeros_like(a.data)
                np.add.at(ga, indices, g)
                a._accum(ga)

            out._backward = _bwd
        return out

    # -- structured ops -------------------------------------------------------

    def softmax(self, axis=-1):
        axis = axis % self.ndim
        moved = np.ascontiguousarray(np.moveaxis(self.data, axis, -1))
        flat = moved.reshape(-1, moved.shape[-1])
        y2 = K.softmax_fwd(flat)
        y = np.moveaxis(y2.reshape(moved.shape), -1, axis)
        out = _result("softmax", y, (self,))
        if out.requires_grad:
            a = self
            mshape = moved.shape

            def _bwd(g):
                g2 = np.ascontiguousarray(np.moveaxis(g, axis, -1)).reshape(
                    -1, mshape[-1]
                )
                dx = K.softmax_bwd(g2, y2)
                a._accum(np.moveaxis(dx.reshape(mshape), -1, axis))

            out._backward = _bwd
        return out


def _result(op, data, parents):
    data = np.asarray(data)
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite values produced by op '{op}'")
    t = Tensor.__new__(Tensor)
    t.data = data
    t.grad = None
    t.op = op
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        t.requires_grad = True
        t._parents = tuple(parents)
    else:
        t.requires_grad = False
        t._parents = ()
    t._backward = None
    return t


# ---------------------------------------------------------------------------
# free functions


def concat(tensors, axis=0):
    tensors = list(tensors)
    for t in tensors[1:]:
        _check_dtype(tensors[0].data, t.data, "concat")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    out = _result("concat", data, tuple(tensors))
    if out.requires_grad:
        sizes = [t.shape[axis] for t in tensors]
        splits = np.cumsum(sizes)[:-1]

        def _bwd(g):
            for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
                if t.requires_grad:
                    t._accum(piece)

        out._backward = _bwd
    return out


def layer_norm(x, gain, bias, eps=1e-5):
    """Normalize over the last axis (zero mean, unit variance), then affine."""
    if gain.shape != (x.shape[-1],) or bias.shape != (x.shape[-1],):
        raise ShapeError("layer_norm: gain/bias must match the last axis")
    flat = np.ascontiguousarray(x.data.reshape(-1, x.shape[-1]))
    eps_c = flat.dtype.type(eps)
    y2, xhat, rstd = K.layer_norm_fwd(flat, gain.data, bias.data, eps_c)
    out = _result("layer_norm", y2.reshape(x.shape), (x, gain, bias))
    if out.requires_grad:

        def _bwd(g):
            g2 = np.ascontiguousarray(g.reshape(-1, g.shape[-1]))
            dx, dgain, dbias = K.layer_norm_bwd(g2, xhat, rstd, gain.data)
            if x.requires_grad:
                x._accum(dx.reshape(x.shape))
            if gain.requires_grad:
                gain._accum(dgain)
            if bias.requires_grad:
                bias._accum(dbias)

        out._backward = _bwd
    return out


def mse_loss(pred, target):
    """Mean squared error; target is data (no gradient)."""
    if pred.size == 0:
        raise ShapeError("mse_loss: empty batch")
    t = target if isinstance(target, Tensor) else Tensor(
        np.asarray(target, dtype=pred.dtype)
    )
    if t.shape != pred.shape:
        raise ShapeError(f"mse_loss: shapes differ ({pred.shape} vs {t.shape})")
    d = pred - t
    return (d * d).mean()


def cross_entropy(logits, targets):
    """Mean softmax cross-entropy; logits (N, C), integer targets (N,)."""
    if logits.ndim != 2:
        raise ShapeError("cross_entropy: logits must be 2-D (N, C)")
    n, c = logits.shape
    if n == 0:
        raise ShapeError("cross_entropy: empty batch")
    tg = np.asarray(targets, dtype=np.int64)
    if tg.shape != (n,):
        raise ShapeError("cross_entropy: targets must be (N,) integers")
    if tg.min() < 0 or tg.max() >= c:
        raise ShapeError("cross_entropy: target index out of range")
    flat = np.ascontiguousarray(logits.data)
    losses, probs = K.cross_entropy_fwd(flat, tg)
    out = _result("cross_entropy", np.asarray(losses.mean()), (logits,))
    if out.requires_grad:

        def _bwd(g):
            gscale = flat.dtype.type(float(g) / n)
            logits._accum(K.cross_entropy_bwd(probs, tg, gscale))

        out._backward = _bwd
    return out


def dot_last(a, b):
    """Inner product over the trailing axis: (..., d) x (..., d) -> (...)."""
    return (a * b).sum(axis=-1)


def backward(root):
    """Populate .grad for every tensor reachable from the scalar root."""
    if root.size != 1:
        raise GraphError("backward root must be a scalar")
    topo = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grads(params):
    for p in params.values() if isinstance(params, dict) else params:
        p.grad = None
