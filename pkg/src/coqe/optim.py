"""Bias-corrected Adam over a named parameter dict, with optional
decoupled weight decay (the L2-regularization knob, off by default)."""

import numpy as np

from . import kernels as K


class Adam:
    """Standard Adam; moments live in the parameter dtype, updates in place."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8,
                 weight_decay=0.0):
        if lr <= 0:
            raise ValueError(f"lr must be positive, got {lr}")
        if not 0 <= beta1 < 1 or not 0 <= beta2 < 1:
            raise ValueError("betas must lie in [0, 1)")
        self.params = dict(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.t = 0
        for name, p in self.params.items():
            if not p.data.flags["C_CONTIGUOUS"]:
                raise ValueError(f"parameter '{name}' must be C-contiguous")
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        self.t += 1
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            if g.shape != p.data.shape:
                raise ValueError(
                    f"gradient shape {g.shape} does not match parameter "
                    f"'{name}' shape {p.data.shape}"
                )
            dt = p.data.dtype.type
            K.adam_update(
                p.data.ravel(),
                np.ascontiguousarray(g, dtype=p.data.dtype).ravel(),
                self.m[name].ravel(),
                self.v[name].ravel(),
                dt(self.lr),
                dt(self.beta1),
                dt(self.beta2),
                dt(self.eps),
                dt(1.0 - self.beta1 ** self.t),
                dt(1.0 - self.beta2 ** self.t),
                dt(1.0 - self.lr * self.weight_decay),
            )


def adam_step(params, grads, state):
    """Functional form: write grads onto the params, then advance state."""
    for name, g in grads.items():
        state.params[name].grad = g
    state.step()
    return state
