import numpy as np
import pytest

from gradgen.tensorcore import (
    NonFiniteError,
    Tensor,
    concat,
    exp,
    finite_checks,
    gather_rows,
    grad,
    layer_norm,
    log,
    logabsdet,
    logsigmoid,
    logsumexp,
    masked_softmax,
    narrow,
    no_grad,
    relu,
    sigmoid,
    tanh,
    tmean,
    transpose,
    tsum,
)

from conftest import assert_grads_match, numerical_grad

rng = np.random.default_rng(0)


def check_op(build, *shapes, seed=0):
    """Compare engine gradients of a scalar composite against finite differences."""
    r = np.random.default_rng(seed)
    arrays = [r.standard_normal(s) for s in shapes]
    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    loss = build(*leaves)
    got = grad(loss, leaves)
    for i, leaf in enumerate(leaves):
        def f(x, i=i):
            args = [Tensor(a) for a in arrays]
            args[i] = Tensor(x)
            return float(build(*args).data)

        assert_grads_match(got[leaf], numerical_grad(f, arrays[i].copy()))


def test_square_gradient_is_analytic():
    x = Tensor(3.0, requires_grad=True)
    g = grad(x * x, [x])
    assert g[x] == pytest.approx(6.0)


def test_add_mul_broadcast():
    check_op(lambda a, b: tsum((a + b) * a), (3, 4), (4,))
    check_op(lambda a, b: tsum(a * b), (2, 1, 4), (3, 4))


def test_matmul_shapes():
    check_op(lambda a, b: tsum(a @ b), (3, 4), (4, 2))
    # broadcast over a leading head axis
    check_op(lambda a, b: tsum(a @ b), (5, 3, 4), (5, 4, 2))
    check_op(lambda a, b: tsum(a @ b), (3, 4), (5, 4, 2))


def test_linear_fused():
    from gradgen.tensorcore import linear

    check_op(lambda x, w, b: tsum(linear(x, w, b) * linear(x, w, b)), (3, 4), (4, 2), (2,))
    # stacked-head form with broadcast bias
    check_op(lambda x, w, b: tsum(relu(linear(x, w, b))), (5, 4), (3, 4, 2), (3, 1, 2))
    check_op(lambda x, w: tsum(linear(x, w)), (3, 4), (4, 2))


def test_attention_scores_fused():
    from gradgen.tensorcore import attention_scores

    w = rng.standard_normal((2, 3, 3))
    check_op(lambda q, k: tsum(attention_scores(q, k, 0.5) * Tensor(w)), (2, 3, 4), (2, 3, 4), seed=2)


def test_softmax_then_dot_matches_finite_differences():
    w = rng.standard_normal(5)

    def build(x):
        full = np.ones((5,), dtype=bool)
        return tsum(masked_softmax(x, full) * Tensor(w))

    check_op(build, (5,), seed=3)


def test_layer_norm_sum_matches_finite_differences():
    gain = Tensor(np.ones(4))
    bias = Tensor(np.zeros(4))
    check_op(lambda x: tsum(layer_norm(x, gain, bias)), (4,), seed=4)
    check_op(lambda x: tsum(tanh(layer_norm(x, gain, bias))), (3, 4), seed=5)


def test_layer_norm_affine_gradients():
    check_op(
        lambda x, g, b: tsum(layer_norm(x, g, b) * layer_norm(x, g, b)),
        (3, 4),
        (4,),
        (4,),
        seed=6,
    )


def test_layer_norm_moments():
    x = Tensor(rng.standard_normal((7, 16)) * 3.0 + 1.5)
    out = layer_norm(x, Tensor(np.ones(16)), Tensor(np.zeros(16)), eps=0.0).data
    assert np.abs(out.mean(axis=-1)).max() < 1e-10
    assert np.abs(out.var(axis=-1) - 1.0).max() < 1e-8


def test_masked_softmax_rows():
    logits = Tensor(rng.standard_normal((6, 6)))
    mask = rng.random((6, 6)) < 0.5
    np.fill_diagonal(mask, False)
    mask[3] = False  # empty neighborhood row
    out = masked_softmax(logits, mask).data
    assert np.all(out >= 0.0)
    assert np.all(out[~mask] == 0.0)
    sums = out.sum(axis=-1)
    nonempty = mask.any(axis=-1)
    assert np.abs(sums[nonempty] - 1.0).max() < 1e-12
    assert np.all(sums[~nonempty] == 0.0)


def test_masked_softmax_gradient():
    mask = rng.random((4, 4)) < 0.6
    mask[2] = False
    w = rng.standard_normal((4, 4))
    check_op(lambda x: tsum(masked_softmax(x, mask) * Tensor(w)), (4, 4), seed=7)


def test_pointwise_gradients():
    check_op(lambda x: tsum(relu(x) * relu(x)), (11,), seed=8)
    check_op(lambda x: tsum(sigmoid(x)), (7,), seed=9)
    check_op(lambda x: tsum(logsigmoid(x)), (7,), seed=10)
    check_op(lambda x: tsum(exp(x * Tensor(0.3))), (5,), seed=11)
    check_op(lambda x: tsum(log(exp(x) + Tensor(1.0))), (5,), seed=12)


def test_logsigmoid_is_stable_far_from_zero():
    x = Tensor(np.array([-800.0, 800.0]))
    out = logsigmoid(x).data
    assert out[0] == pytest.approx(-800.0)
    assert out[1] == pytest.approx(0.0, abs=1e-12)


def test_logsumexp_matches_numpy_and_fd():
    x = rng.standard_normal((3, 5)) * 10
    got = logsumexp(Tensor(x), axis=-1).data
    ref = np.log(np.exp(x - x.max(-1, keepdims=True)).sum(-1)) + x.max(-1)
    np.testing.assert_allclose(got, ref, rtol=1e-12)
    check_op(lambda t: tsum(logsumexp(t, axis=-1)), (3, 5), seed=13)
    check_op(lambda t: logsumexp(t), (4,), seed=14)


def test_reductions_and_shape_ops():
    check_op(lambda x: tsum(x, axis=0).sum(), (3, 4), seed=15)
    check_op(lambda x: tmean(x, axis=1, keepdims=True).sum(), (3, 4), seed=16)
    check_op(lambda x: tsum(transpose(x, (1, 0)) @ x), (3, 4), seed=17)
    check_op(lambda x: tsum(x.reshape(2, 6) @ x.reshape(6, 2)), (3, 4), seed=18)
    check_op(lambda a, b: tsum(concat([a, b], axis=1) * concat([b, a], axis=1)), (2, 3), (2, 3), seed=19)
    check_op(lambda x: tsum(narrow(x, 1, 1, 2) * narrow(x, 1, 0, 2)), (3, 4), seed=20)


def test_gather_rows_accumulates_duplicates():
    idx = np.array([0, 2, 0])
    check_op(lambda x: tsum(gather_rows(x, idx) * gather_rows(x, idx)), (3, 2), seed=21)


def test_logabsdet_gradient():
    a = np.eye(3) + 0.2 * rng.standard_normal((3, 3))
    t = Tensor(a, requires_grad=True)
    g = grad(logabsdet(t), [t])[t]
    assert_grads_match(g, numerical_grad(lambda x: np.linalg.slogdet(x)[1], a.copy()))


def test_unused_leaf_gets_zero_gradient():
    x = Tensor(np.ones(3), requires_grad=True)
    y = Tensor(np.ones(3), requires_grad=True)
    g = grad(tsum(x * x), [x, y])
    np.testing.assert_array_equal(g[y], np.zeros(3))


def test_no_grad_skips_recording():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = tsum(x * x)
    assert y._bwd is None and not y.requires_grad


def test_reused_tensor_accumulates():
    x = Tensor(2.0, requires_grad=True)
    y = x * x * x  # d/dx x^3 = 12 at x=2
    assert grad(y, [x])[x] == pytest.approx(12.0)


def test_non_finite_objective_raises():
    x = Tensor(np.array([1e308]), requires_grad=True)
    with np.errstate(over="ignore"):
        y = tsum(x * x)  # overflows to inf
    with pytest.raises(NonFiniteError):
        grad(y, [x])


def test_finite_checks_name_offending_primitive():
    x = Tensor(np.array([2000.0]), requires_grad=True)
    with finite_checks(), np.errstate(over="ignore"):
        with pytest.raises(NonFiniteError, match="exp"):
            exp(x)


def test_grad_requires_scalar_objective():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        grad(x * x, [x])


def test_deep_chain_does_not_recurse():
    x = Tensor(1.0, requires_grad=True)
    y = x
    for _ in range(5000):
        y = y + Tensor(0.0)
    assert grad(y, [x])[x] == pytest.approx(1.0)
