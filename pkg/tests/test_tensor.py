"""Autograd engine: every op's gradient against central differences, plus
the deliberately narrow broadcasting contract."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coqe.tensor import (
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
)


def numeric_grad(f, x, eps=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += eps
        xm[idx] -= eps
        g[idx] = (f(xp) - f(xm)) / (2 * eps)
    return g


def check_unary(build, shape=(3, 4), seed=0, atol=1e-7, positive=False):
    x = np.random.default_rng(seed).normal(size=shape)
    if positive:
        x = np.abs(x) + 0.5
    t = Tensor(x, requires_grad=True)
    out = build(t)
    backward(out)

    def f(xv):
        return float(build(Tensor(xv)).data)

    np.testing.assert_allclose(t.grad, numeric_grad(f, x), atol=atol)


def test_add_sub_mul_grads():
    check_unary(lambda t: (t + t * 2.0 - 0.5).sum())
    check_unary(lambda t: (2.0 * t * t).mean())


def test_matmul_grad_both_sides():
    rng = np.random.default_rng(1)
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    out = (a @ b).sum()
    backward(out)
    ga = numeric_grad(lambda v: float((Tensor(v) @ b.detach()).sum().data),
                      a.data)
    gb = numeric_grad(lambda v: float((a.detach() @ Tensor(v)).sum().data),
                      b.data)
    np.testing.assert_allclose(a.grad, ga, atol=1e-7)
    np.testing.assert_allclose(b.grad, gb, atol=1e-7)


def test_batched_matmul_with_2d_weight_grad():
    rng = np.random.default_rng(2)
    x = Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)
    w = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
    backward((x @ w).sum())
    gw = numeric_grad(lambda v: float((x.detach() @ Tensor(v)).sum().data),
                      w.data)
    np.testing.assert_allclose(w.grad, gw, atol=1e-7)


def test_broadcast_2d_weight_times_batched_stack_grad():
    # (C, d) @ (b, d, 1): the 2-D operand is shared across the batch
    rng = np.random.default_rng(12)
    w = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    x = Tensor(rng.normal(size=(5, 4, 1)), requires_grad=True)
    backward((w @ x).sum())
    gw = numeric_grad(lambda v: float((Tensor(v) @ x.detach()).sum().data),
                      w.data)
    gx = numeric_grad(lambda v: float((w.detach() @ Tensor(v)).sum().data),
                      x.data)
    np.testing.assert_allclose(w.grad, gw, atol=1e-7)
    np.testing.assert_allclose(x.grad, gx, atol=1e-7)


def test_elementwise_nonlinearity_grads():
    check_unary(lambda t: t.relu().sum(), seed=3)
    check_unary(lambda t: t.exp().sum(), seed=4)
    check_unary(lambda t: t.cos().sum(), seed=5)
    check_unary(lambda t: t.abs().sum(), seed=6)
    check_unary(lambda t: t.power(3).sum(), seed=7)
    check_unary(lambda t: t.power(0.5).sum(), seed=8, positive=True)


def test_reduction_and_reshape_grads():
    check_unary(lambda t: t.sum(axis=1).power(2).sum(), seed=9)
    check_unary(lambda t: t.mean(axis=0).sum(), seed=10)
    check_unary(lambda t: t.reshape(12).power(2).sum(), seed=11)
    check_unary(lambda t: t.transpose().sum(axis=0).power(2).sum(), seed=12)


def test_getitem_and_take_grads():
    rng = np.random.default_rng(13)
    x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    backward(x[1:3].sum())
    expected = np.zeros((4, 3))
    expected[1:3] = 1.0
    np.testing.assert_array_equal(x.grad, expected)

    y = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    idx = np.array([0, 2, 2])
    backward(y.take(idx).sum())
    expected = np.zeros((4, 3))
    expected[0] = 1.0
    expected[2] = 2.0  # repeated index accumulates
    np.testing.assert_array_equal(y.grad, expected)


def test_softmax_grad():
    check_unary(lambda t: (t.softmax(axis=-1).power(2)).sum(), seed=14)


def test_concat_grad_splits_correctly():
    rng = np.random.default_rng(15)
    a = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
    b = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
    out = concat([a, b], axis=1)
    assert out.shape == (2, 5)
    backward((out.power(2)).sum())
    np.testing.assert_allclose(a.grad, 2 * a.data, atol=1e-12)
    np.testing.assert_allclose(b.grad, 2 * b.data, atol=1e-12)


def test_layer_norm_grad():
    rng = np.random.default_rng(16)
    x = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
    gain = Tensor(rng.normal(size=(5,)), requires_grad=True)
    bias = Tensor(rng.normal(size=(5,)), requires_grad=True)
    backward(layer_norm(x, gain, bias).power(2).sum())

    def f(xv):
        return float(layer_norm(Tensor(xv), gain.detach(), bias.detach())
                     .power(2).sum().data)

    np.testing.assert_allclose(x.grad, numeric_grad(f, x.data), atol=1e-6)


def test_cross_entropy_grad_and_value():
    rng = np.random.default_rng(17)
    logits = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    targets = np.array([0, 2, 1, 1])
    loss = cross_entropy(logits, targets)
    z = logits.data
    lse = np.log(np.exp(z).sum(axis=1))
    ref = float(np.mean(lse - z[np.arange(4), targets]))
    assert abs(float(loss.data) - ref) < 1e-12
    backward(loss)
    g = numeric_grad(
        lambda v: float(cross_entropy(Tensor(v), targets).data), z
    )
    np.testing.assert_allclose(logits.grad, g, atol=1e-7)


def test_mse_loss_matches_formula():
    rng = np.random.default_rng(18)
    pred = Tensor(rng.normal(size=(6,)), requires_grad=True)
    target = rng.normal(size=(6,))
    loss = mse_loss(pred, target)
    assert abs(float(loss.data) - np.mean((pred.data - target) ** 2)) < 1e-12
    backward(loss)
    np.testing.assert_allclose(pred.grad, 2 * (pred.data - target) / 6,
                               atol=1e-12)


def test_dot_last_is_trailing_inner_product():
    rng = np.random.default_rng(19)
    a = Tensor(rng.normal(size=(2, 3, 4)))
    b = Tensor(rng.normal(size=(2, 3, 4)))
    out = dot_last(a, b)
    np.testing.assert_allclose(out.data, np.einsum("bkd,bkd->bk",
                                                   a.data, b.data),
                               atol=1e-12)


# -- broadcasting contract ---------------------------------------------------


def test_trailing_suffix_broadcast_allowed():
    a = Tensor(np.ones((2, 3, 4)))
    b = Tensor(np.ones((4,)))
    assert (a + b).shape == (2, 3, 4)
    assert (a * b).shape == (2, 3, 4)


def test_scalar_broadcast_allowed():
    a = Tensor(np.ones((2, 3)))
    assert (a * Tensor(np.asarray(2.0))).shape == (2, 3)


def test_interior_dim1_broadcast_rejected():
    a = Tensor(np.ones((2, 3, 4)))
    b = Tensor(np.ones((2, 1, 4)))
    with pytest.raises(ShapeError):
        a + b
    with pytest.raises(ShapeError):
        a * b


def test_leading_dim1_broadcast_rejected():
    a = Tensor(np.ones((2, 3)))
    b = Tensor(np.ones((1, 3)))
    with pytest.raises(ShapeError):
        a + b


def test_suffix_broadcast_gradient_sums_leading_axes():
    a = Tensor(np.ones((2, 3)), requires_grad=True)
    b = Tensor(np.full((3,), 2.0), requires_grad=True)
    backward((a * b).sum())
    np.testing.assert_array_equal(b.grad, np.full(3, 2.0))
    np.testing.assert_array_equal(a.grad, np.full((2, 3), 2.0))


# -- error and mode contracts -------------------------------------------------


def test_non_finite_raises_at_op():
    a = Tensor(np.array([1.0, 0.0]))
    with np.errstate(divide="ignore"), pytest.raises(NonFiniteError):
        a.power(-1)


def test_backward_requires_scalar_root():
    a = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(GraphError):
        backward(a + a)


def test_no_grad_disables_graph():
    a = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        out = (a * 2.0).sum()
    assert not out.requires_grad
    assert out._parents == ()


def test_mixed_dtype_rejected():
    a = Tensor(np.ones(3, dtype=np.float32))
    b = Tensor(np.ones(3, dtype=np.float64))
    with pytest.raises((TypeError, ShapeError)):
        a + b


def test_grad_accumulates_across_uses():
    a = Tensor(np.array([3.0]), requires_grad=True)
    backward((a * a + a).sum())
    np.testing.assert_allclose(a.grad, [7.0])


@settings(max_examples=30, deadline=None)
@given(
    st.integers(1, 4), st.integers(1, 4), st.integers(1, 4),
    st.integers(0, 2 ** 31 - 1),
)
def test_matmul_grad_property(n, k, m, seed):
    rng = np.random.default_rng(seed)
    a = Tensor(rng.normal(size=(n, k)), requires_grad=True)
    b = Tensor(rng.normal(size=(k, m)), requires_grad=True)
    w = rng.normal(size=(n, m))
    backward((Tensor(w) * (a @ b)).sum())
    np.testing.assert_allclose(a.grad, w @ b.data.T, atol=1e-10)
    np.testing.assert_allclose(b.grad, a.data.T @ w, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2 ** 31 - 1))
def test_softmax_rows_are_distributions(n, seed):
    x = Tensor(np.random.default_rng(seed).normal(size=(3, n)) * 5)
    y = x.softmax(axis=-1).data
    assert (y >= 0).all()
    np.testing.assert_allclose(y.sum(axis=-1), 1.0, atol=1e-12)
