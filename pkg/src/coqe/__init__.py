"""Desk-scale research harness for a context-query encoder (CoQE)
architecture, a standard Transformer baseline, the synthetic task suite
they train on, closed-form reference baselines, and evaluation probes."""

from . import kernels
from .tensor import (
    GraphError,
    NonFiniteError,
    ShapeError,
    Tensor,
    backward,
    concat,
    cross_entropy,
    dot_last,
    layer_norm,
    mse_loss,
    no_grad,
    zero_grads,
)

__all__ = [
    "GraphError",
    "NonFiniteError",
    "ShapeError",
    "Tensor",
    "backward",
    "concat",
    "cross_entropy",
    "dot_last",
    "kernels",
    "layer_norm",
    "mse_loss",
    "no_grad",
    "zero_grads",
]

__version__ = "0.1.0"
