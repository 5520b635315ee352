"""Reference predictors fit on in-context examples only.

These are the per-episode baselines plotted against the learned models:
minimum-norm least squares, an l1-regularized linear fit, and a small
ReLU net trained on the context pairs.
"""

import numpy as np

from . import rng
from .optim import Adam
from .tensor import Tensor, backward, mse_loss


class ConvergenceError(RuntimeError):
    pass


class FitResult:
    """Linear fit: coefficients, zero intercept, solver diagnostics."""

    def __init__(self, coef, iterations=0, residual=0.0):
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = 0.0
        self.iterations = int(iterations)
        self.residual = float(residual)

    def predict(self, x):
        return np.asarray(x, dtype=np.float64) @ self.coef


def _canonical_order(xs, ys):
    """Sort pairs lexicographically so the fit ignores context order."""
    keys = np.concatenate([xs, ys[:, None]], axis=1)
    order = np.lexsort(keys.T[::-1])
    return xs[order], ys[order]


def least_squares(xs, ys):
    """Minimum-norm least-squares fit; n = 0 predicts zero everywhere.

    Context pairs are canonically ordered first, so permuting them
    changes nothing, bitwise.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
        raise ValueError("least_squares: non-finite inputs")
    if xs.ndim != 2 or ys.shape != (xs.shape[0],):
        raise ValueError(
            f"expected xs (n, d) and ys (n,), got {xs.shape} / {ys.shape}"
        )
    n, d = xs.shape
    if n == 0:
        return FitResult(np.zeros(d))
    xs, ys = _canonical_order(xs, ys)
    coef, res, _, _ = np.linalg.lstsq(xs, ys, rcond=None)
    resid = float(np.sum((xs @ coef - ys) ** 2))
    return FitResult(coef, residual=resid)


def _soft_threshold(value, radius):
    return np.sign(value) * max(abs(value) - radius, 0.0)


def lasso(xs, ys, lam, tol=1e-8, max_sweeps=100_000):
    """Cyclic coordinate descent for (1/2n)||Xw - y||^2 + lam ||w||_1.

    Runs until the KKT subgradient residual drops below tol; raises
    ConvergenceError at the sweep cap.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
        raise ValueError("lasso: non-finite inputs")
    n, d = xs.shape
    if n == 0:
        return FitResult(np.zeros(d))
    xs, ys = _canonical_order(xs, ys)
    col_sq = (xs * xs).sum(axis=0) / n
    w = np.zeros(d)
    resid = ys.copy()                       # y - X w
    for sweep in range(1, max_sweeps + 1):
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            rho = xs[:, j] @ resid / n + col_sq[j] * w[j]
            new = _soft_threshold(rho, lam) / col_sq[j]
            if new != w[j]:
                resid += xs[:, j] * (w[j] - new)
                w[j] = new
        kkt = kkt_residual(xs, ys, w, lam)
        if kkt < tol:
            return FitResult(w, iterations=sweep, residual=kkt)
    raise ConvergenceError(
        f"lasso did not reach KKT tolerance {tol} in {max_sweeps} sweeps"
    )


def kkt_residual(xs, ys, w, lam):
    """Max violation of the l1 subgradient optimality conditions."""
    n = xs.shape[0]
    grad = xs.T @ (xs @ w - ys) / n
    active = w != 0
    viol = np.abs(grad + lam * np.sign(w)) * active
    viol_zero = np.maximum(np.abs(grad) - lam, 0.0) * ~active
    return float(np.maximum(viol, viol_zero).max())


class ReluFit:
    """Two-layer ReLU net y = a . relu(W x) fit on context pairs."""

    def __init__(self, w, a, train_mse, steps):
        self.w = w
        self.a = a
        self.train_mse = float(train_mse)
        self.steps = int(steps)

    def predict(self, x):
        pre = np.maximum(np.asarray(x, dtype=np.float64) @ self.w.T, 0.0)
        return pre @ self.a


def fit_relu_net(xs, ys, hidden=10, steps=2000, lr=1e-2, seed=0):
    """Adam-fit the task family's own architecture to the context."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    n, d = xs.shape
    if n < 1:
        raise ValueError("fit_relu_net needs at least one context pair")
    g = rng.stream(seed, "baselines/relu-fit")
    params = {
        "w": Tensor(g.normal(size=(hidden, d)) * np.sqrt(2.0 / d),
                    requires_grad=True),
        "a": Tensor(g.normal(size=(hidden, 1)) * np.sqrt(2.0 / hidden),
                    requires_grad=True),
    }
    opt = Adam(params, lr=lr)
    target = Tensor(ys)
    xt = Tensor(xs)
    for _ in range(steps):
        opt.zero_grad()
        pred = ((xt @ params["w"].transpose()).relu() @ params["a"]).reshape(-1)
        loss = mse_loss(pred, target)
        if not np.isfinite(loss.data):
            raise FloatingPointError("fit_relu_net: loss went non-finite")
        backward(loss)
        opt.step()
    result = ReluFit(params["w"].data.copy(), params["a"].data.copy()[:, 0],
                     0.0, steps)
    result.train_mse = float(((result.predict(xs) - ys) ** 2).mean())
    return result


def prefix_curve(fit_fn, xs, ys, xq, yq):
    """Squared error of a per-prefix refit baseline, (B, k+1).

    Position j scores the prediction for the (j+1)-th input after
    fitting on the first j pairs; the last position is the query.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    xq = np.asarray(xq, dtype=np.float64)
    yq = np.asarray(yq, dtype=np.float64)
    b, k, _ = xs.shape
    errs = np.empty((b, k + 1))
    for i in range(b):
        for j in range(k + 1):
            fit = fit_fn(xs[i, :j], ys[i, :j])
            x_next = xs[i, j] if j < k else xq[i]
            y_next = ys[i, j] if j < k else yq[i]
            errs[i, j] = (fit.predict(x_next) - y_next) ** 2
    return errs
