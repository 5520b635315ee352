"""Central-difference gradient verification for whole-model closures.

grad_check re-runs a loss closure with single coordinates of the parameters
nudged by +/-eps and compares the numeric slope against the analytic
gradient from backward(). It demands 64-bit parameters and a bitwise
deterministic closure (verified by double evaluation) - internal fresh
randomness would silently corrupt the numeric differences.
"""

import numpy as np

from . import rng
from .tensor import backward, zero_grads


class NondeterministicClosure(RuntimeError):
    pass


class PrecisionError(ValueError):
    pass


def grad_check(closure, params, eps=1e-5, max_coords=64, seed=0):
    """Max over sampled coordinates of
    |analytic - numeric| / (|analytic| + |numeric| + 1e-12)."""
    for name, p in params.items():
        if p.data.dtype != np.float64:
            raise PrecisionError(
                f"grad_check requires float64 parameters; '{name}' is {p.data.dtype}"
            )
    first = closure().item()
    second = closure().item()
    if first != second:
        raise NondeterministicClosure(
            f"closure returned {first!r} then {second!r} on identical state"
        )

    zero_grads(params)
    loss = closure()
    backward(loss)
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }

    worst = 0.0
    for name, p in sorted(params.items()):
        flat = p.data.reshape(-1)
        n = flat.shape[0]
        if n <= max_coords:
            coords = np.arange(n)
        else:
            coords = rng.stream(seed, f"grad-check/{name}").choice(
                n, size=max_coords, replace=False
            )
        aflat = analytic[name].reshape(-1)
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + eps
            up = closure().item()
            flat[idx] = orig - eps
            down = closure().item()
            flat[idx] = orig
            numeric = (up - down) / (2.0 * eps)
            a = aflat[idx]
            rel = abs(a - numeric) / (abs(a) + abs(numeric) + 1e-12)
            if rel > worst:
                worst = rel
    return worst
