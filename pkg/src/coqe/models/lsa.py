"""Linear self-attention on joint (x, y) token matrices.

Tokens are columns: Z has shape (d + 1, n + 1), one column per context
pair [x_i; y_i] plus a final query column [x_q; 0].  The zero y-slot of
the query column is what makes the restricted layer equal an inner
product with a task vector built from the context alone.
"""

import numpy as np

from ..layers import gaussian_param
from ..tensor import ShapeError, Tensor, concat


def linear_attention(z, w_kq, w_ov, n):
    """LSA(Z) = Z + (1/n) * W_OV Z Z^T W_KQ Z, batched over axis 0."""
    if z.ndim != 3:
        raise ShapeError(f"expected (B, d+1, n+1) tokens, got {z.shape}")
    gram = z @ z.transpose(0, 2, 1)          # (B, D, D)
    keyed = w_kq @ z                         # (B, D, N)
    return z + (w_ov @ (gram @ keyed)) * (1.0 / float(n))


def lsa_task_vector(xs, ys, theta):
    """omega = (1/n) Theta^T sum_i y_i x_i, shape (B, d)."""
    if xs.ndim != 3 or ys.ndim != 2:
        raise ShapeError(
            f"expected xs (B, n, d) and ys (B, n), got {xs.shape} / {ys.shape}"
        )
    b, n = ys.shape[0], ys.shape[1]
    moment = (ys.reshape(b, 1, n) @ xs).reshape(b, xs.shape[2])
    return (moment @ theta) * (1.0 / float(n))


class RestrictedLsa:
    """One linear self-attention layer with the value/key-query weights
    pinned to the least-squares-readout structure.

    W_OV is all zeros except a 1 in the bottom-right corner, and W_KQ is
    block diagonal: a free (d, d) block Theta acting on x-parts and a
    scalar acting on the y-slot.  Under that structure the updated
    bottom-right entry of the token matrix is exactly <omega, x_q> with
    omega = (1/n) Theta^T sum_i y_i x_i, for any value of the y-slot
    scalar.
    """

    def __init__(self, input_dim, seed=0, theta_std=1.0, y_scalar=0.0,
                 dtype=np.float64):
        self.input_dim = int(input_dim)
        self.dtype = np.dtype(dtype)
        self.params = {
            "theta": gaussian_param(
                (self.input_dim, self.input_dim), seed, "lsa.theta",
                std=theta_std, dtype=self.dtype,
            ),
        }
        self.y_scalar = float(y_scalar)

    def _w_kq(self):
        d = self.input_dim
        top = np.zeros((d, 1), dtype=self.dtype)
        bot = np.zeros((1, d + 1), dtype=self.dtype)
        bot[0, d] = self.y_scalar
        upper = concat([self.params["theta"], Tensor(top)], axis=1)
        return concat([upper, Tensor(bot)], axis=0)

    def _w_ov(self):
        d = self.input_dim
        w = np.zeros((d + 1, d + 1), dtype=self.dtype)
        w[d, d] = 1.0
        return Tensor(w)

    def tokens(self, xs, ys, xq):
        """Stack context pairs and the query into (B, d+1, n+1) columns."""
        xs = np.asarray(xs, dtype=self.dtype)
        ys = np.asarray(ys, dtype=self.dtype)
        xq = np.asarray(xq, dtype=self.dtype)
        b, n, d = xs.shape
        if d != self.input_dim:
            raise ShapeError(f"expected inputs of dim {self.input_dim}, got {d}")
        z = np.zeros((b, d + 1, n + 1), dtype=self.dtype)
        z[:, :d, :n] = np.transpose(xs, (0, 2, 1))
        z[:, d, :n] = ys
        z[:, :d, n] = xq
        return Tensor(z), n

    def forward(self, xs, ys, xq):
        """Prediction read from the query column's y-slot, shape (B,)."""
        z, n = self.tokens(xs, ys, xq)
        out = linear_attention(z, self._w_kq(), self._w_ov(), n)
        return out[:, -1, -1]

    def task_vector(self, xs, ys):
        xs = np.asarray(xs, dtype=self.dtype)
        ys = np.asarray(ys, dtype=self.dtype)
        return lsa_task_vector(Tensor(xs), Tensor(ys), self.params["theta"])


def duality_gap(model, xs, ys, xq):
    """max |forward - <task_vector, x_q>| over the batch."""
    direct = model.forward(xs, ys, xq).data
    omega = model.task_vector(xs, ys).data
    via_dual = np.einsum("bd,bd->b", omega, np.asarray(xq, dtype=omega.dtype))
    return float(np.max(np.abs(direct - via_dual)))
