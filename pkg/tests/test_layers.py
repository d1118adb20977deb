"""Layer primitives against closed forms, brute-force loops, and differences."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from allab.errors import DimensionError
from allab.layers import affine_backward, affine_forward, dropout, relu, softmax_cross_entropy


def fd_grad(f, x, h=1e-6):
    """Central finite differences of a scalar function, entry by entry."""
    g = np.zeros_like(x)
    flat, out = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = f()
        flat[i] = keep - h
        down = f()
        flat[i] = keep
        out[i] = (up - down) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


def matmul_loops(X, W, b):
    """Independent triple-loop affine reference."""
    n, d = X.shape
    m = W.shape[1]
    Y = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            acc = b[j]
            for k in range(d):
                acc += X[i, k] * W[k, j]
            Y[i, j] = acc
    return Y


# ---- affine ----------------------------------------------------------------

def test_affine_identity():
    assert np.array_equal(
        affine_forward([[1.0, 2.0]], np.eye(2), [0.0, 0.0]), [[1.0, 2.0]]
    )


def test_affine_zero_weights_returns_bias():
    assert np.array_equal(
        affine_forward([[1.0, 2.0]], np.zeros((2, 2)), [3.0, 4.0]), [[3.0, 4.0]]
    )


def test_affine_matches_triple_loop():
    rng = np.random.default_rng(0)
    X, W, b = rng.standard_normal((3, 4)), rng.standard_normal((4, 2)), rng.standard_normal(2)
    assert rel_err(affine_forward(X, W, b), matmul_loops(X, W, b)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(1, 5), d=st.integers(1, 5), m=st.integers(1, 5), seed=st.integers(0, 2**31)
)
def test_affine_matches_triple_loop_property(n, d, m, seed):
    rng = np.random.default_rng(seed)
    X, W, b = rng.standard_normal((n, d)), rng.standard_normal((d, m)), rng.standard_normal(m)
    assert rel_err(affine_forward(X, W, b), matmul_loops(X, W, b)) <= 1e-12


def test_affine_shape_mismatch():
    with pytest.raises(DimensionError):
        affine_forward(np.ones((2, 3)), np.ones((4, 2)), np.ones(2))
    with pytest.raises(DimensionError):
        affine_forward(np.ones((2, 3)), np.ones((3, 2)), np.ones(5))


def test_affine_backward_zero_upstream():
    dX, dW, db = affine_backward(np.ones((3, 2)), np.ones((2, 4)), np.zeros((3, 4)))
    assert not dX.any() and not dW.any() and not db.any()


def test_affine_backward_scalar_chain():
    dX, dW, db = affine_backward([[2.0]], [[3.0]], [[1.0]])
    assert dX == [[3.0]] and dW == [[2.0]] and db == [1.0]


def test_affine_backward_matches_differences():
    rng = np.random.default_rng(1)
    X, W, b = rng.standard_normal((5, 3)), rng.standard_normal((3, 4)), rng.standard_normal(4)
    V = rng.standard_normal((5, 4))
    loss = lambda: float((affine_forward(X, W, b) * V).sum())
    dX, dW, db = affine_backward(X, W, V)
    assert rel_err(dX, fd_grad(loss, X)) <= 1e-6
    assert rel_err(dW, fd_grad(loss, W)) <= 1e-6
    assert rel_err(db, fd_grad(loss, b)) <= 1e-6


# ---- relu ------------------------------------------------------------------

def test_relu_values_and_zero_convention():
    Y, back = relu(np.array([[-1.0, 0.0, 2.0]]))
    assert np.array_equal(Y, [[0.0, 0.0, 2.0]])
    assert np.array_equal(back(np.array([[1.0, 1.0, 1.0]])), [[0.0, 0.0, 1.0]])


def test_relu_all_negative():
    Y, back = relu(np.full((2, 3), -4.0))
    assert not Y.any()
    assert not back(np.ones((2, 3))).any()


# ---- softmax cross-entropy -------------------------------------------------

def test_softmax_ce_symmetric_two_logits():
    loss, probs, dlogits = softmax_cross_entropy(np.zeros((1, 2)), [0])
    assert loss == pytest.approx(np.log(2), abs=1e-12)
    assert np.allclose(probs, [[0.5, 0.5]])
    assert np.allclose(dlogits, [[-0.5, 0.5]])


def test_softmax_ce_saturated_no_overflow():
    loss, probs, _ = softmax_cross_entropy(np.array([[1000.0, 0.0]]), [0])
    assert 0 <= loss <= 1e-12
    assert np.isfinite(probs).all()


def test_softmax_ce_gradient_matches_differences():
    rng = np.random.default_rng(2)
    logits = rng.standard_normal((4, 3)) * 2
    labels = rng.integers(0, 3, 4)
    loss = lambda: softmax_cross_entropy(logits, labels)[0]
    _, _, dlogits = softmax_cross_entropy(logits, labels)
    assert rel_err(dlogits, fd_grad(loss, logits)) <= 1e-6


def test_softmax_ce_label_out_of_range():
    with pytest.raises(IndexError, match=r"label 3"):
        softmax_cross_entropy(np.zeros((2, 3)), [0, 3])
    with pytest.raises(IndexError):
        softmax_cross_entropy(np.zeros((1, 3)), [-1])


def test_softmax_ce_mean_reduction():
    # two identical rows give the same loss as one; gradient carries 1/n
    one = softmax_cross_entropy(np.array([[1.0, -1.0]]), [1])
    two = softmax_cross_entropy(np.array([[1.0, -1.0]] * 2), [1, 1])
    assert two[0] == pytest.approx(one[0], abs=1e-15)
    assert np.allclose(two[2], np.vstack([one[2], one[2]]) / 2)


# ---- dropout ---------------------------------------------------------------

def test_dropout_rate_zero_identity():
    X = np.random.default_rng(3).standard_normal((4, 5))
    Y, mask = dropout(X, 0.0, rng=None, train_mode=True)
    assert np.array_equal(Y, X) and mask is None


def test_dropout_eval_identity_any_rate():
    X = np.random.default_rng(4).standard_normal((4, 5))
    Y, mask = dropout(X, 0.9, rng=None, train_mode=False)
    assert np.array_equal(Y, X) and mask is None


def test_dropout_kept_entries_scaled():
    X = np.ones((20, 20))
    Y, mask = dropout(X, 0.5, rng=np.random.default_rng(5), train_mode=True)
    assert set(np.unique(Y)) <= {0.0, 2.0}
    assert np.array_equal(Y, X * mask)


def test_dropout_keep_fraction_monte_carlo():
    X = np.ones((1000, 1000))
    Y, _ = dropout(X, 0.5, rng=np.random.default_rng(6), train_mode=True)
    keep = (Y != 0).mean()
    assert abs(keep - 0.5) <= 0.002


def test_dropout_bad_arguments():
    with pytest.raises(ValueError):
        dropout(np.ones((2, 2)), 1.0)
    with pytest.raises(ValueError):
        dropout(np.ones((2, 2)), -0.1)
    with pytest.raises(ValueError):
        dropout(np.ones((2, 2)), 0.5, rng=None, train_mode=True)
