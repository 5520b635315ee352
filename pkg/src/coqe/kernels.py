"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

Every kernel exists twice: a numpy expression and an njit loop. The active
set is chosen once at import from the COQE_BACKEND environment variable
("numba" or "numpy"; default numba when importable) and can be swapped at
runtime with set_backend(). Callers must go through the module-level
dispatch functions so a swap is visible everywhere.

All kernels take 2-D (or flat 1-D) contiguous arrays; shape juggling is the
caller's job. Scalar arguments are cast to the array dtype before the call
so float32 runs stay float32 end to end. Loops are sequential on purpose:
results must be bitwise reproducible.
"""

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an install-time dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


# ---------------------------------------------------------------------------
# numpy implementations


def _softmax_fwd_np(x):
    m = x.max(axis=1, keepdims=True)
    e = np.exp(x - m)
    e /= e.sum(axis=1, keepdims=True)
    return e


def _softmax_bwd_np(g, y):
    dot = (g * y).sum(axis=1, keepdims=True)
    return y * (g - dot)


def _layer_norm_fwd_np(x, gain, bias, eps):
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * rstd
    return xhat * gain + bias, xhat, rstd.ravel()


def _layer_norm_bwd_np(g, xhat, rstd, gain):
    dxhat = g * gain
    m1 = dxhat.mean(axis=1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=1, keepdims=True)
    dx = (dxhat - m1 - xhat * m2) * rstd[:, None]
    dgain = (g * xhat).sum(axis=0)
    dbias = g.sum(axis=0)
    return dx, dgain, dbias


def _relu_fwd_np(x):
    return np.maximum(x, 0)


def _relu_bwd_np(g, x):
    return g * (x > 0)


def _cross_entropy_fwd_np(logits, targets):
    rows = np.arange(logits.shape[0])
    m = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - m)
    s = e.sum(axis=1, keepdims=True)
    probs = e / s
    losses = (np.log(s) + m)[:, 0] - logits[rows, targets]
    return losses, probs


def _cross_entropy_bwd_np(probs, targets, gscale):
    out = probs * gscale
    out[np.arange(out.shape[0]), targets] -= gscale
    return out


def _adam_update_np(p, g, m, v, lr, b1, b2, eps, bc1, bc2, wdfac):
    m *= b1
    m += (1 - b1) * g
    v *= b2
    v += (1 - b2) * g * g
    if wdfac != 1.0:
        p *= wdfac
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


# ---------------------------------------------------------------------------
# numba implementations (same contracts, explicit sequential loops)


@njit(cache=True)
def _softmax_fwd_nb(x):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        m = x[i, 0]
        for j in range(1, x.shape[1]):
            if x[i, j] > m:
                m = x[i, j]
        s = x[i, 0] * 0
        for j in range(x.shape[1]):
            e = np.exp(x[i, j] - m)
            out[i, j] = e
            s += e
        inv = 1 / s
        for j in range(x.shape[1]):
            out[i, j] *= inv
    return out


@njit(cache=True)
def _softmax_bwd_nb(g, y):
    dx = np.empty_like(g)
    for i in range(g.shape[0]):
        dot = g[i, 0] * 0
        for j in range(g.shape[1]):
            dot += g[i, j] * y[i, j]
        for j in range(g.shape[1]):
            dx[i, j] = y[i, j] * (g[i, j] - dot)
    return dx


@njit(cache=True)
def _layer_norm_fwd_nb(x, gain, bias, eps):
    n, d = x.shape
    out = np.empty_like(x)
    xhat = np.empty_like(x)
    rstd = np.empty(n, dtype=x.dtype)
    for i in range(n):
        mu = x[i, 0] * 0
        for j in range(d):
            mu += x[i, j]
        mu /= d
        var = x[i, 0] * 0
        for j in range(d):
            delta = x[i, j] - mu
            var += delta * delta
        var /= d
        r = 1 / np.sqrt(var + eps)
        rstd[i] = r
        for j in range(d):
            h = (x[i, j] - mu) * r
            xhat[i, j] = h
            out[i, j] = h * gain[j] + bias[j]
    return out, xhat, rstd


@njit(cache=True)
def _layer_norm_bwd_nb(g, xhat, rstd, gain):
    n, d = g.shape
    dx = np.empty_like(g)
    dgain = np.zeros(d, dtype=g.dtype)
    dbias = np.zeros(d, dtype=g.dtype)
    for i in range(n):
        m1 = g[i, 0] * 0
        m2 = g[i, 0] * 0
        for j in range(d):
            dh = g[i, j] * gain[j]
            m1 += dh
            m2 += dh * xhat[i, j]
        m1 /= d
        m2 /= d
        for j in range(d):
            dh = g[i, j] * gain[j]
            dx[i, j] = (dh - m1 - xhat[i, j] * m2) * rstd[i]
            dgain[j] += g[i, j] * xhat[i, j]
            dbias[j] += g[i, j]
    return dx, dgain, dbias


@njit(cache=True)
def _relu_fwd_nb(x):
    out = np.empty_like(x)
    for i in range(x.size):
        v = x.flat[i]
        out.flat[i] = v if v > 0 else 0
    return out


@njit(cache=True)
def _relu_bwd_nb(g, x):
    dx = np.empty_like(g)
    for i in range(g.size):
        dx.flat[i] = g.flat[i] if x.flat[i] > 0 else 0
    return dx


@njit(cache=True)
def _cross_entropy_fwd_nb(logits, targets):
    n, c = logits.shape
    losses = np.empty(n, dtype=logits.dtype)
    probs = np.empty_like(logits)
    for i in range(n):
        m = logits[i, 0]
        for j in range(1, c):
            if logits[i, j] > m:
                m = logits[i, j]
        s = logits[i, 0] * 0
        for j in range(c):
            e = np.exp(logits[i, j] - m)
            probs[i, j] = e
            s += e
        inv = 1 / s
        for j in range(c):
            probs[i, j] *= inv
        losses[i] = np.log(s) + m - logits[i, targets[i]]
    return losses, probs


@njit(cache=True)
def _cross_entropy_bwd_nb(probs, targets, gscale):
    out = np.empty_like(probs)
    for i in range(probs.shape[0]):
        for j in range(probs.shape[1]):
            out[i, j] = probs[i, j] * gscale
        out[i, targets[i]] -= gscale
    return out


@njit(cache=True)
def _adam_update_nb(p, g, m, v, lr, b1, b2, eps, bc1, bc2, wdfac):
    for i in range(p.size):
        mi = b1 * m[i] + (1 - b1) * g[i]
        vi = b2 * v[i] + (1 - b2) * g[i] * g[i]
        m[i] = mi
        v[i] = vi
        if wdfac != 1.0:
            p[i] *= wdfac
        p[i] -= lr * (mi / bc1) / (np.sqrt(vi / bc2) + eps)


# ---------------------------------------------------------------------------
# dispatch

_IMPLS = {
    "numpy": {
        "softmax_fwd": _softmax_fwd_np,
        "softmax_bwd": _softmax_bwd_np,
        "layer_norm_fwd": _layer_norm_fwd_np,
        "layer_norm_bwd": _layer_norm_bwd_np,
        "relu_fwd": _relu_fwd_np,
        "relu_bwd": _relu_bwd_np,
        "cross_entropy_fwd": _cross_entropy_fwd_np,
        "cross_entropy_bwd": _cross_entropy_bwd_np,
        "adam_update": _adam_update_np,
    }
}
if HAVE_NUMBA:
    _IMPLS["numba"] = {
        "softmax_fwd": _softmax_fwd_nb,
        "softmax_bwd": _softmax_bwd_nb,
        "layer_norm_fwd": _layer_norm_fwd_nb,
        "layer_norm_bwd": _layer_norm_bwd_nb,
        "relu_fwd": _relu_fwd_nb,
        "relu_bwd": _relu_bwd_nb,
        "cross_entropy_fwd": _cross_entropy_fwd_nb,
        "cross_entropy_bwd": _cross_entropy_bwd_nb,
        "adam_update": _adam_update_nb,
    }

_active = "numpy"


def set_backend(name):
    """Swap the live kernel set; returns the previous backend name."""
    global _active, softmax_fwd, softmax_bwd, layer_norm_fwd, layer_norm_bwd
    global relu_fwd, relu_bwd, cross_entropy_fwd, cross_entropy_bwd, adam_update
    if name not in _IMPLS:
        raise ValueError(
            f"unknown backend '{name}' (available: {sorted(_IMPLS)})"
        )
    prev = _active
    impl = _IMPLS[name]
    softmax_fwd = impl["softmax_fwd"]
    softmax_bwd = impl["softmax_bwd"]
    layer_norm_fwd = impl["layer_norm_fwd"]
    layer_norm_bwd = impl["layer_norm_bwd"]
    relu_fwd = impl["relu_fwd"]
    relu_bwd = impl["relu_bwd"]
    cross_entropy_fwd = impl["cross_entropy_fwd"]
    cross_entropy_bwd = impl["cross_entropy_bwd"]
    adam_update = impl["adam_update"]
    _active = name
    return prev


def active_backend():
    return _active


def available_backends():
    return sorted(_IMPLS)


_env = os.environ.get("COQE_BACKEND", "").strip().lower()
if _env:
    set_backend(_env)
else:
    set_backend("numba" if HAVE_NUMBA else "numpy")
