import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boolnet.bitcore import BooleanTensor, forward_layer
from boolnet.logicgrad import (
    LogicSignal, aggregate_backprop, aggregate_optim, backward_layer, bias_signal,
    edge_backprop_signal, edge_optim_signal,
)

from oracles import central_difference, signed_sum_in_order


@pytest.mark.parametrize("w, g, truth, mag", [
    (True, 0.5, True, 0.5),
    (False, -0.25, True, 0.25),
    (True, 0.0, True, 0.0),
    (False, 0.5, False, 0.5),
])
def test_edge_backprop_signal(w, g, truth, mag):
    s = edge_backprop_signal(w, g)
    assert bool(s.truth) == truth and float(s.magnitude) == mag


@pytest.mark.parametrize("x, g, truth, mag", [
    (True, 0.5, True, 0.5),
    (False, -1.0, True, 1.0),
    (False, 0.0, False, 0.0),
])
def test_edge_optim_signal(x, g, truth, mag):
    s = edge_optim_signal(x, g)
    assert bool(s.truth) == truth and float(s.magnitude) == mag


def test_zero_magnitude_contributes_nothing():
    for truth in (True, False):
        assert aggregate_backprop(LogicSignal([truth, True], [0.0, 0.3])) == 0.3


def test_negative_magnitude_rejected():
    with pytest.raises(ValueError):
        LogicSignal([True], [-0.1])


def test_aggregate_backprop_example():
    s = edge_backprop_signal(np.array([True, False]), np.array([0.5, -0.25]))
    assert aggregate_backprop(s) == 0.75


def test_aggregate_optim_examples():
    s = edge_optim_signal(np.array([True, False]), np.array([0.5, -1.0]))
    assert aggregate_optim(s) == 1.5
    assert aggregate_optim(edge_optim_signal(np.array([True]), np.array([-2.0]))) == -2.0
    assert aggregate_optim(edge_optim_signal(np.array([True, False, True]), np.zeros(3))) == 0.0


def test_aggregate_backprop_n32_exact():
    rng = np.random.default_rng(0)
    w = rng.integers(0, 2, 32).astype(bool)
    g = rng.normal(size=32)
    expected = signed_sum_in_order(np.where(w, 1, -1), g, axis=0)
    assert aggregate_backprop(edge_backprop_signal(w, g)) == expected


def _pm(b):
    return np.where(b, 1.0, -1.0)


def test_backward_identity_case():
    g_down, q = backward_layer(BooleanTensor.from_bool([[True]]), BooleanTensor.from_bool([[True]]), [[1.0]])
    assert g_down.tolist() == [[1.0]] and q.tolist() == [[1.0]]


def test_backward_zero_upstream():
    rng = np.random.default_rng(1)
    g_down, q = backward_layer(BooleanTensor.random((3, 5), rng), BooleanTensor.random((5, 2), rng), np.zeros((3, 2)))
    assert not g_down.any() and not q.any()


def test_backward_random_matches_matmul():
    rng = np.random.default_rng(2)
    x, w = BooleanTensor.random((8, 16), rng), BooleanTensor.random((16, 4), rng)
    g = rng.normal(size=(8, 4))
    g_down, q = backward_layer(x, w, g)
    # exact against in-order signed sums
    xb, wb = x.to_bool(), w.to_bool()
    np.testing.assert_array_equal(g_down, signed_sum_in_order(_pm(wb)[None, :, :], g[:, None, :], axis=2))
    np.testing.assert_array_equal(q, signed_sum_in_order(_pm(xb)[:, :, None], g[:, None, :], axis=0))
    # and close to BLAS (different summation order)
    np.testing.assert_allclose(g_down, g @ _pm(wb).T, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(q, _pm(xb).T @ g, rtol=1e-12, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 32), st.integers(1, 64), st.integers(1, 32), st.integers(0, 2**32 - 1))
def test_aggregations_equal_signed_sums(K, m, n, seed):
    rng = np.random.default_rng(seed)
    x, w = BooleanTensor.random((K, m), rng), BooleanTensor.random((m, n), rng)
    g = rng.normal(size=(K, n)) * rng.choice([1e-3, 1.0, 1e3])
    g[rng.random((K, n)) < 0.1] = 0.0
    g_down, q = backward_layer(x, w, g)
    np.testing.assert_array_equal(g_down, signed_sum_in_order(_pm(w.to_bool())[None], g[:, None, :], axis=2))
    np.testing.assert_array_equal(q, signed_sum_in_order(_pm(x.to_bool())[:, :, None], g[:, None, :], axis=0))


def test_backward_dimension_errors():
    rng = np.random.default_rng(3)
    x, w = BooleanTensor.random((2, 3), rng), BooleanTensor.random((3, 4), rng)
    with pytest.raises(ValueError):
        backward_layer(x, w, np.zeros((2, 3)))
    with pytest.raises(ValueError):
        backward_layer(x, BooleanTensor.random((2, 4), rng), np.zeros((2, 4)))
    with pytest.raises(ValueError):
        backward_layer(x, w, np.full((2, 4), np.nan))


def test_bias_signal_is_column_sum():
    g = np.array([[0.5, -1.0], [0.25, 2.0]])
    np.testing.assert_array_equal(bias_signal(g), [0.75, 1.0])


def test_descent_consistency_against_finite_differences():
    # one layer, squared loss on pre-activations, relaxed to real weights
    rng = np.random.default_rng(4)
    K, m, n = 6, 5, 3
    x = BooleanTensor.random((K, m), rng)
    w = BooleanTensor.random((m, n), rng)
    b = BooleanTensor.random((n,), rng)
    y = rng.normal(size=(K, n)) * 3
    xp = x.to_pm(np.float64)

    def loss(wr):
        pre = xp @ wr + b.to_pm(np.float64)
        return 0.5 * np.sum((pre - y) ** 2)

    pre = forward_layer(x, w, b).astype(np.float64)
    _, q = backward_layer(x, w, pre - y)
    fd = central_difference(loss, w.to_pm(np.float64))
    np.testing.assert_allclose(q, fd, rtol=1e-6)
